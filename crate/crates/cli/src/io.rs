//! Bar input and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use homvol::OhlcBar;

use crate::error::{CliError, CliResult};

/// Reads `open,high,low,close[,horizon]` rows; the horizon defaults to 1.
///
/// Rows are numbered from 1 after the header.
pub fn read_bars(path: &Path) -> CliResult<Vec<OhlcBar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let need = |name: &str| col(name).ok_or_else(|| CliError::Input(format!("missing column '{name}'")));
    let (o, h, l, c) = (need("open")?, need("high")?, need("low")?, need("close")?);
    let t = col("horizon");
    let mut bars = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        let field = |i: usize, name: &str| -> CliResult<f64> {
            let s = rec.get(i).ok_or_else(|| CliError::Input(format!("row {row}: missing {name}")))?;
            s.parse::<f64>().map_err(|_| CliError::Input(format!("row {row}: {name} '{s}' is not a number")))
        };
        let horizon = match t {
            Some(i) if rec.get(i).is_some_and(|s| !s.is_empty()) => field(i, "horizon")?,
            _ => 1.0,
        };
        let bar = OhlcBar::new(field(o, "open")?, field(h, "high")?, field(l, "low")?, field(c, "close")?, horizon)
            .map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        bars.push(bar);
    }
    Ok(bars)
}

/// CSV writer on a buffered file; LF line endings.
pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Shortest decimal that round-trips; locale-independent.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn finish(mut w: csv::Writer<BufWriter<File>>) -> CliResult<()> {
    w.flush()?;
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))?.flush()?;
    Ok(())
}

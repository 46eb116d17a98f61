//! Scan CSVs: `#` header lines, then one row per grid point.

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use qpt_core::analysis::{Measure, ScanRecord};
use std::io::{Read, Write};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns after the parameter and the measures.
const TRAILING: [&str; 6] = ["n_sites", "energy", "gap", "degenerate", "anchor", "error"];
const WALL_TIME: &str = "wall_time";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_f64(s: &str) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| CliError::usage(format!("'{s}' is not a number")))
}

/// Version line followed by the echoed configuration, all `#`-prefixed.
pub fn header(cmd: Command, cfg: &RunConfig) -> String {
    let mut out = format!("# qpt {VERSION} {}\n", cmd.name());
    for line in cfg.echo().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Writes records one at a time, flushing after each.
pub struct ScanWriter<W: Write> {
    inner: csv::Writer<W>,
    timings: bool,
}

impl<W: Write> ScanWriter<W> {
    pub fn new(mut out: W, header: &str, axis: &str, measures: &[Measure], timings: bool) -> CliResult<Self> {
        out.write_all(header.as_bytes())?;
        let mut inner = csv::Writer::from_writer(out);
        let mut cols = vec![axis.to_string()];
        cols.extend(measures.iter().map(Measure::column));
        cols.extend(TRAILING.iter().map(|s| s.to_string()));
        if timings {
            cols.push(WALL_TIME.into());
        }
        inner.write_record(&cols)?;
        inner.flush()?;
        Ok(ScanWriter { inner, timings })
    }

    pub fn write(&mut self, rec: &ScanRecord) -> CliResult<()> {
        let mut row = vec![fmt_f64(rec.value)];
        row.extend(rec.values.iter().map(|v| fmt_f64(*v)));
        row.push(rec.n_sites.to_string());
        row.push(fmt_f64(rec.energy));
        row.push(fmt_f64(rec.gap));
        row.push(rec.degenerate.to_string());
        row.push((rec.anchor + 1).to_string());
        row.push(rec.error.clone().unwrap_or_default());
        if self.timings {
            row.push(fmt_f64(rec.wall_time));
        }
        self.inner.write_record(&row)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// A parsed scan file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCsv {
    /// Header lines without the leading `# `.
    pub header: Vec<String>,
    pub param: String,
    pub measures: Vec<Measure>,
    /// `wall_time` is 0 when the file has no timing column.
    pub records: Vec<ScanRecord>,
}

impl ScanCsv {
    pub fn column(&self, name: &str) -> CliResult<usize> {
        let m: Measure = name.parse().map_err(|e| CliError::usage(format!("column: {e}")))?;
        self.measures.iter().position(|x| *x == m).ok_or_else(|| CliError::usage(format!("no column '{name}'")))
    }
}

pub fn read_scan(mut input: impl Read) -> CliResult<ScanCsv> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]).to_string())
        .collect();
    let body: Vec<&str> = text.lines().skip(header.len()).collect();
    let joined = body.join("\n");
    let mut rdr = csv::ReaderBuilder::new().from_reader(joined.as_bytes());
    let cols: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let timings = cols.last().map(String::as_str) == Some(WALL_TIME);
    let n_trailing = TRAILING.len() + usize::from(timings);
    if cols.len() < 1 + n_trailing
        || cols[cols.len() - n_trailing..cols.len() - n_trailing + TRAILING.len()] != TRAILING
    {
        return Err(CliError::usage("not a qpt scan file: unexpected columns"));
    }
    let param = cols[0].clone();
    let measures: Vec<Measure> = cols[1..cols.len() - n_trailing]
        .iter()
        .map(|c| c.parse::<Measure>())
        .collect::<qpt_core::Result<_>>()
        .map_err(|e| CliError::usage(format!("column header: {e}")))?;
    let k = measures.len();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let values = (0..k).map(|i| parse_f64(field(1 + i))).collect::<CliResult<Vec<_>>>()?;
        let int = |i: usize| field(i).trim().parse::<usize>().map_err(|_| CliError::usage("bad integer field"));
        let error = field(k + 6).to_string();
        let anchor = int(k + 5)?;
        records.push(ScanRecord {
            param: param.clone(),
            value: parse_f64(field(0))?,
            n_sites: int(k + 1)?,
            values,
            energy: parse_f64(field(k + 2))?,
            gap: parse_f64(field(k + 3))?,
            degenerate: field(k + 4).trim() == "true",
            anchor: anchor.checked_sub(1).ok_or_else(|| CliError::usage("anchor column is 1-based"))?,
            error: if error.is_empty() { None } else { Some(error) },
            wall_time: if timings { parse_f64(field(k + 7))? } else { 0.0 },
        });
    }
    Ok(ScanCsv { header, param, measures, records })
}

pub fn read_scan_file(path: &std::path::Path) -> CliResult<ScanCsv> {
    let file = std::fs::File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    read_scan(std::io::BufReader::new(file)).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

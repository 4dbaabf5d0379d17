//! CSV ingestion with line-numbered diagnostics, and output writers.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use dshrink::sim::{Arm, Source, UnitRecord};
use dshrink::EstimatePair;

use crate::error::{CliError, CliResult};

pub const STRATUM_COLUMNS: [&str; 5] = ["stratum", "tau_u", "var_u", "tau_b", "var_b"];
pub const UNIT_COLUMNS: [&str; 4] = ["stratum", "source", "arm", "outcome"];

fn input_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {msg}", path.display()))
}

/// Opens a CSV with the required header and maps column names to indices.
fn open(path: &Path, required: &[&str]) -> CliResult<(csv::Reader<File>, Vec<usize>)> {
    let mut file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut probe = [0u8; 1];
    if file.read(&mut probe).map_err(|e| input_err(path, e))? == 0 {
        return Err(input_err(path, "file is empty"));
    }
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut rdr = ReaderBuilder::new().trim(Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| input_err(path, e))?.clone();
    let cols = required
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| input_err(path, format!("line 1: missing header column '{name}'")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((rdr, cols))
}

fn records(path: &Path, rdr: &mut csv::Reader<File>) -> CliResult<Vec<(u64, StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            input_err(path, format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    if out.is_empty() {
        return Err(input_err(path, "no data rows after the header"));
    }
    Ok(out)
}

fn number(path: &Path, line: u64, column: &str, raw: &str) -> CliResult<f64> {
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(input_err(path, format!("line {line}: column '{column}': '{raw}' is not a finite number"))),
    }
}

/// Reads a stratum-summary CSV into labels and an [`EstimatePair`].
pub fn read_strata(path: &Path) -> CliResult<(Vec<String>, EstimatePair)> {
    let (mut rdr, cols) = open(path, &STRATUM_COLUMNS)?;
    let mut labels = Vec::new();
    let mut v: [Vec<f64>; 4] = Default::default();
    for (line, rec) in records(path, &mut rdr)? {
        labels.push(rec.get(cols[0]).unwrap_or("").to_string());
        for (j, slot) in v.iter_mut().enumerate() {
            let name = STRATUM_COLUMNS[j + 1];
            let x = number(path, line, name, rec.get(cols[j + 1]).unwrap_or(""))?;
            if name.starts_with("var") && !(x > 0.0) {
                return Err(input_err(path, format!("line {line}: column '{name}': variance must be positive")));
            }
            slot.push(x);
        }
    }
    let [tau_u, var_u, tau_b, var_b] = v;
    let pair = EstimatePair::new(tau_u, tau_b, var_u, var_b).map_err(|e| input_err(path, e))?;
    Ok((labels, pair))
}

/// Reads a unit-level CSV.
pub fn read_units(path: &Path) -> CliResult<Vec<UnitRecord>> {
    let (mut rdr, cols) = open(path, &UNIT_COLUMNS)?;
    records(path, &mut rdr)?
        .into_iter()
        .map(|(line, rec)| {
            let field = |j: usize| rec.get(cols[j]).unwrap_or("");
            let source = match field(1) {
                "rct" => Source::Rct,
                "obs" => Source::Obs,
                other => {
                    return Err(input_err(path, format!("line {line}: column 'source': expected rct or obs, got '{other}'")))
                }
            };
            let arm = match field(2) {
                "treated" => Arm::Treated,
                "control" => Arm::Control,
                other => {
                    return Err(input_err(
                        path,
                        format!("line {line}: column 'arm': expected treated or control, got '{other}'"),
                    ))
                }
            };
            Ok(UnitRecord { stratum: field(0).to_string(), source, arm, outcome: number(path, line, "outcome", field(3))? })
        })
        .collect()
}

pub fn write_units(path: &Path, rows: &[UnitRecord]) -> CliResult<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.stratum.clone(), r.source.to_string(), r.arm.to_string(), crate::format::fmt_num(r.outcome)])
        .collect();
    let mut w = csv_writer(Some(path))?;
    write_table(&mut w, &UNIT_COLUMNS, &body)
}

pub fn csv_writer(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(|e| input_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_table<S: AsRef<str>>(w: &mut dyn Write, header: &[S], rows: &[Vec<String>]) -> CliResult<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let io_err = |e: csv::Error| CliError::Input(e.to_string());
    wtr.write_record(header.iter().map(AsRef::as_ref)).map_err(io_err)?;
    for r in rows {
        wtr.write_record(r).map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(&crate::format::round_json(value))
        .map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| input_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_strata_with_extra_columns_in_any_order() {
        let f = file("var_b,stratum,note,tau_u,var_u,tau_b\n0.5,a,x,1,2,0.3\n1,b,y,-1,1,0\n");
        let (labels, pair) = read_strata(f.path()).unwrap();
        assert_eq!(labels, ["a", "b"]);
        assert_eq!(pair.tau_u(), &[1.0, -1.0]);
        assert_eq!(pair.var_b(), &[0.5, 1.0]);
    }

    #[test]
    fn diagnostics_name_line_and_column() {
        let f = file("stratum,tau_u,var_u,tau_b,var_b\na,1,1,0,1\nb,oops,1,0,1\n");
        let e = read_strata(f.path()).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("tau_u"), "{e}");

        let f = file("stratum,tau_u,var_u,tau_b\na,1,1,0\n");
        let e = read_strata(f.path()).unwrap_err().to_string();
        assert!(e.contains("'var_b'"), "{e}");

        let f = file("stratum,tau_u,var_u,tau_b,var_b\na,1,0,0,1\n");
        assert!(read_strata(f.path()).unwrap_err().to_string().contains("line 2"));

        let f = file("");
        assert!(read_strata(f.path()).unwrap_err().to_string().contains("empty"));

        let f = file("stratum,source,arm,outcome\na,rct,placebo,1\n");
        let e = read_units(f.path()).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("arm"), "{e}");
        assert_eq!(read_units(f.path()).unwrap_err().exit_code(), 2);
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Pretty JSON of `body` with `schema_version` and `command` fields added.
/// Keys are sorted; floats use the shortest round-trip representation.
pub fn json_doc<T: Serialize>(command: &str, body: &T) -> CliResult<String> {
    let mut v = serde_json::to_value(body)?;
    let Value::Object(map) = &mut v else {
        return Err(CliError::Numeric("output is not a JSON object".into()));
    };
    map.insert("schema_version".into(), SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Single-line variant of [`json_doc`].
pub fn json_line<T: Serialize>(command: &str, body: &T) -> CliResult<String> {
    let v: Value = serde_json::from_str(&json_doc(command, body)?)?;
    let mut s = serde_json::to_string(&v)?;
    s.push('\n');
    Ok(s)
}

/// Adds the fields of `extra` to the object `base`.
pub fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

pub fn print(s: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, s: &str) -> CliResult<()> {
    std::fs::write(path, s).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Float formatting for CSV: shortest round-trip, `NaN` for missing values.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn csv_writer(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// Reads one numeric column from a CSV file. The first row is a header
/// unless every field in it parses as a number.
pub fn read_series(path: &Path, column: Option<&str>) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(CliError::Usage(format!("{} is empty", path.display()))),
    };
    let numeric = first.iter().all(|f| f.parse::<f64>().is_ok());
    let col = if numeric {
        if let Some(name) = column {
            return Err(CliError::Usage(format!("--column {name} given but the file has no header")));
        }
        first.len() - 1
    } else {
        let header: Vec<&str> = first.iter().collect();
        match column {
            Some(name) => header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| CliError::Usage(format!("no column named {name}")))?,
            None => header.iter().position(|h| *h == "x").unwrap_or(header.len() - 1),
        }
    };
    let mut values = Vec::new();
    if numeric {
        values.push(parse_field(&first, col, 1)?);
    }
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        values.push(parse_field(&rec, col, i + 2)?);
    }
    if values.is_empty() {
        return Err(CliError::Usage(format!("{} has no data rows", path.display())));
    }
    Ok(values)
}

fn parse_field(rec: &csv::StringRecord, col: usize, line: usize) -> CliResult<f64> {
    let field = rec
        .get(col)
        .ok_or_else(|| CliError::Usage(format!("line {line}: missing column")))?;
    let v: f64 = field
        .parse()
        .map_err(|_| CliError::Usage(format!("line {line}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("line {line}: value is not finite")));
    }
    Ok(v)
}

/// Parses JSON given inline (starting with `{`) or read from a file.
pub fn inline_or_file<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> CliResult<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("cannot read {what} {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
}

//! CSV and truth-file loading plus input digests.

use dcdp::data::{Dataset, ModelFamily};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or bad file content; exit code 2.
    Config(String),
    /// Failure while running a valid configuration; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_stderr_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<dcdp::error::Error> for CliError {
    fn from(err: dcdp::error::Error) -> Self {
        use dcdp::error::Error as E;
        match err {
            E::InfeasibleConfig(_) | E::InvalidGrid(_) | E::MissingResponse => {
                CliError::Config(err.to_string())
            }
            _ => CliError::Runtime(err.to_string()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Reads a headerless numeric CSV into a dataset. For regression the
/// response column is split out of the matrix; every other column joins the
/// design in file order.
pub fn load_csv(
    path: &Path,
    family: ModelFamily,
    response_col: Option<usize>,
) -> Result<(Dataset, String), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes.as_slice());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::config(format!(
                    "{}: line {}, column {}: not a number: {:?}",
                    path.display(),
                    i + 1,
                    j + 1,
                    field
                ))
            })?;
            row.push(v);
        }
        if i == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(CliError::config(format!(
                "{}: line {} has {} fields, expected {}",
                path.display(),
                i + 1,
                row.len(),
                width
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::config(format!("{}: no rows", path.display())));
    }

    let n = rows.len();
    let dataset = match family {
        ModelFamily::Regression => {
            if width < 2 {
                return Err(CliError::config(format!(
                    "{}: regression needs at least two columns, found {width}",
                    path.display()
                )));
            }
            let resp = response_col.unwrap_or(width - 1);
            if resp >= width {
                return Err(CliError::config(format!(
                    "--response-col {resp} out of range for {width} columns"
                )));
            }
            let p = width - 1;
            let mut xs = Vec::with_capacity(n * p);
            let mut ys = Vec::with_capacity(n);
            for row in &rows {
                for (j, &v) in row.iter().enumerate() {
                    if j == resp {
                        ys.push(v);
                    } else {
                        xs.push(v);
                    }
                }
            }
            Dataset::new(xs, n, p, Some(ys), family)?
        }
        _ => {
            if response_col.is_some() {
                return Err(CliError::config(
                    "--response-col only applies to the regression family",
                ));
            }
            let p = width;
            let mut xs = Vec::with_capacity(n * p);
            for row in &rows {
                xs.extend_from_slice(row);
            }
            Dataset::new(xs, n, p, None, family)?
        }
    };
    Ok((dataset, digest))
}

/// Writes a dataset as headerless CSV, regression response last.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    let ys = data.ys();
    for i in 0..data.n() {
        let mut fields: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(ys) = ys {
            fields.push(format!("{}", ys[i]));
        }
        wtr.write_record(&fields)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    wtr.flush()
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Writes change points one index per line.
pub fn write_truth(path: &Path, points: &[usize]) -> Result<(), CliError> {
    let mut body = String::new();
    for cp in points {
        body.push_str(&format!("{cp}\n"));
    }
    std::fs::write(path, body)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;
use serde_json::Value;

/// How a command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Passed,
    Violation,
    /// A hunt produced what it was looking for.
    Found,
    /// A hunt came back empty.
    NotFound,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Passed
        } else {
            Status::Violation
        }
    }

    pub fn code(self) -> ExitCode {
        match self {
            Status::Passed | Status::Found => ExitCode::SUCCESS,
            Status::Violation | Status::NotFound => ExitCode::from(1),
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Numerical(_) => ExitCode::from(3),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<mixedarea::Error> for Failure {
    fn from(e: mixedarea::Error) -> Self {
        use mixedarea::Error as E;
        match e {
            E::Parse(_) | E::Domain(_) | E::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Usage(msg)
    }
}

/// Rows for the `--csv` detail table.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), Failure> {
        let io = |e: csv::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Usage(e.to_string()))
    }
}

/// Full-precision text for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn new(status: Status, result: impl Serialize) -> Result<Self, Failure> {
        let result = serde_json::to_value(result).map_err(|e| Failure::Numerical(e.to_string()))?;
        Ok(Outcome { status, result, table: None })
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    version: &'a str,
    status: Status,
    inputs: &'a Value,
    result: &'a Value,
}

/// Writes the JSON summary and the CSV table; no timestamps, so reruns are
/// byte-identical.
pub fn emit(command: &str, inputs: &Value, outcome: &Outcome, out: Option<&Path>, csv: Option<&Path>) -> Result<(), Failure> {
    let summary = Summary {
        command,
        version: env!("CARGO_PKG_VERSION"),
        status: outcome.status,
        inputs,
        result: &outcome.result,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))?,
    }
    if let Some(path) = csv {
        match &outcome.table {
            Some(t) => t.write(path)?,
            None => return Err(Failure::Usage(format!("`{command}` has no CSV detail table"))),
        }
    }
    Ok(())
}

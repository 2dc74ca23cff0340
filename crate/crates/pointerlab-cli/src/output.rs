//! Output formatting, provenance records, config-file merging and the
//! CLI error/exit-code policy.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

/// CSV columns carry 12 significant digits; JSON keeps full precision.
pub fn fmt_csv(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs: exit code 2.
    Input(String),
    /// The computation itself failed (no root, empty region, ...): exit 1.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<pointerlab::Error> for CliError {
    fn from(e: pointerlab::Error) -> Self {
        use pointerlab::Error::*;
        match e {
            DimensionMismatch(_) | InvalidParameter(_) | NonpositiveGamma(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(format!("I/O: {e}"))
    }
}

pub type CliResult = Result<(), CliError>;

/// Provenance block kept separate from the primary outputs so that
/// byte-level comparisons of results can exclude it.
#[derive(Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp: String,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// One machine-readable run summary.
#[derive(Serialize)]
pub struct RunRecord {
    pub inputs: Value,
    pub outputs: Value,
    pub provenance: Provenance,
}

impl RunRecord {
    pub fn new(inputs: Value, outputs: Value, seed: Option<u64>) -> Self {
        Self {
            inputs,
            outputs,
            provenance: Provenance::new(seed),
        }
    }

    pub fn print(&self) -> CliResult {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
        println!("{text}");
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Load a JSON object used to default any flag.
pub fn load_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Input("config must be a JSON object".into())),
        Err(e) => Err(CliError::Input(format!("config parse: {e}"))),
    }
}

pub fn cfg_f64(config: &Map<String, Value>, key: &str) -> Option<f64> {
    config.get(key).and_then(Value::as_f64)
}

pub fn cfg_u64(config: &Map<String, Value>, key: &str) -> Option<u64> {
    config.get(key).and_then(Value::as_u64)
}

pub fn cfg_str<'a>(config: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    config.get(key).and_then(Value::as_str)
}

/// `LO:HI:N` range specification.
#[derive(Debug, Clone, Copy)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl RangeSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Input(format!(
                "range must be LO:HI:N, got '{text}'"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Input(format!("bad range low '{}'", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Input(format!("bad range high '{}'", parts[1])))?;
        let points: usize = parts[2]
            .parse()
            .map_err(|_| CliError::Input(format!("bad range count '{}'", parts[2])))?;
        if !(lo < hi) {
            return Err(CliError::Input(format!("range needs lo < hi, got '{text}'")));
        }
        if points < 2 {
            return Err(CliError::Input(format!(
                "range needs at least 2 points, got {points}"
            )));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn linear(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64)
            .collect()
    }

    pub fn logarithmic(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.lo * (self.hi / self.lo).powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

/// CSV sink with a fixed header written first.
pub struct CsvSink<W: Write> {
    writer: W,
    columns: usize,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut writer: W, header: &[&str]) -> io::Result<Self> {
        writeln!(writer, "{}", header.join(","))?;
        Ok(Self {
            writer,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> io::Result<()> {
        debug_assert_eq!(cells.len(), self.columns, "column count must not vary");
        writeln!(self.writer, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

pub fn csv_file(path: &Path, header: &[&str]) -> Result<CsvSink<io::BufWriter<fs::File>>, CliError> {
    let file = fs::File::create(path)?;
    Ok(CsvSink::new(io::BufWriter::new(file), header)?)
}

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use ssm_core::SsmError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every emitted file.
#[derive(Clone, Debug)]
pub struct Header {
    pub invocation: String,
}

impl Header {
    pub fn new(argv: &[std::ffi::OsString]) -> Self {
        let words: Vec<String> = argv.iter().map(|a| quote(&a.to_string_lossy())).collect();
        Header { invocation: words.join(" ") }
    }

    pub fn lines(&self) -> Vec<String> {
        vec![format!("ssmfrc {VERSION} (ssm-core {})", ssm_core::VERSION), format!("invocation: {}", self.invocation)]
    }

    pub fn json(&self) -> Value {
        json!({ "program": "ssmfrc", "version": VERSION, "library_version": ssm_core::VERSION, "invocation": self.invocation })
    }
}

fn quote(s: &str) -> String {
    let plain = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:=,+@%".contains(c));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "'\\''"))
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

/// Text output preceded by `#` header lines.
pub fn emit_text(path: Option<&Path>, header: &Header, extra: &[String], body: &str) -> Result<(), Failure> {
    let mut text = String::new();
    for l in header.lines().iter().chain(extra) {
        text.push_str("# ");
        text.push_str(l);
        text.push('\n');
    }
    text.push_str(body);
    write_out(path, &text)
}

/// Text whose producer already placed the header comments.
pub fn emit_raw(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    write_out(path, text)
}

/// JSON object with the header under `"header"`.
pub fn emit_json(path: Option<&Path>, header: &Header, mut value: Value) -> Result<(), Failure> {
    if let Value::Object(m) = &mut value {
        m.insert("header".into(), header.json());
    }
    let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    text.push('\n');
    write_out(path, &text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Numerical = 3,
    Validation = 4,
}

/// A failed run: exit code plus the fields of the error record.
#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub module: String,
    pub error: String,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { kind: ExitKind::Usage, module: "cli".into(), error: "Usage".into(), message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure { kind: ExitKind::Validation, module: "cli".into(), error: "Validation".into(), message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure { kind: ExitKind::Usage, module: "cli".into(), error: "Io".into(), message: format!("{}: {e}", path.display()) }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }

    pub fn record(&self) -> Value {
        json!({
            "status": "error",
            "exit_code": self.code(),
            "module": self.module,
            "error": self.error,
            "message": self.message,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.module, self.message)
    }
}

impl From<SsmError> for Failure {
    fn from(e: SsmError) -> Self {
        let debug = format!("{e:?}");
        let name = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
        Failure {
            kind: if e.is_numerical() { ExitKind::Numerical } else { ExitKind::Usage },
            module: e.module().to_string(),
            error: name,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        assert_eq!(quote("frc"), "frc");
        assert_eq!(quote("0.98:1.02"), "0.98:1.02");
        assert_eq!(quote("{\"c\": 10}"), "'{\"c\": 10}'");
        assert_eq!(quote("it's"), "'it'\\''s'");
    }

    #[test]
    fn pipeline_errors_keep_provenance() {
        let f = Failure::from(SsmError::NewtonDivergence("x".into()));
        assert_eq!(f.code(), 3);
        assert_eq!(f.module, "continuation");
        assert_eq!(f.error, "NewtonDivergence");
        let f = Failure::from(SsmError::Malformed("y".into()));
        assert_eq!(f.code(), 2);
        assert_eq!(f.record()["module"], "model-core");
    }
}

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{Embedding, EncoderBackend, EncoderError, Pooling, MAX_TOKENS};

/// Runs an external embedding program once per batch.
///
/// The program reads one JSON request on stdin,
/// `{"checkpoint": str, "pooling": "first_token"|"mean", "max_length": 512, "texts": [str]}`,
/// and writes `{"vectors": [[f64; 768]]}` on stdout.
#[derive(Debug, Clone)]
pub struct ExternalEncoder {
    program: String,
    args: Vec<String>,
}

#[derive(Serialize)]
struct Request<'a> {
    checkpoint: &'a str,
    pooling: Pooling,
    max_length: usize,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct Response {
    vectors: Vec<Vec<f64>>,
}

impl ExternalEncoder {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalEncoder { program: program.into(), args }
    }

    /// Splits a command line on whitespace (no shell quoting).
    pub fn from_command_line(cmd: &str) -> Self {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next().unwrap_or_default();
        ExternalEncoder { program, args: parts.collect() }
    }

    fn load_err(&self, reason: impl Into<String>) -> EncoderError {
        EncoderError::EncoderLoadError { id: self.program.clone(), reason: reason.into() }
    }
}

impl EncoderBackend for ExternalEncoder {
    fn embed(&self, checkpoint: &str, texts: &[&str], pooling: Pooling) -> Result<Vec<Embedding>, EncoderError> {
        let request = serde_json::to_vec(&Request { checkpoint, pooling, max_length: MAX_TOKENS, texts })
            .map_err(|e| self.load_err(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.load_err(format!("cannot start {}: {e}", self.program)))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(&request)?;
        }
        let output = child.wait_with_output()?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(self.load_err(format!("exited with {}: {}", output.status, stderr.trim())));
        }
        let resp: Response =
            serde_json::from_slice(&output.stdout).map_err(|e| self.load_err(format!("malformed output: {e}")))?;
        resp.vectors.into_iter().map(Embedding::new).collect()
    }
}

//! Command templates with `{name}` placeholders, run under a timeout with
//! stderr captured.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("empty command template")]
    Empty,
    #[error("command template lacks placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("failed to start `{program}`: {reason}")]
    Spawn { program: String, reason: String },
    #[error("`{program}` timed out after {secs} s")]
    Timeout { program: String, secs: u64 },
    #[error("`{program}` exited with {status}: {stderr}")]
    Failed {
        program: String,
        status: String,
        stderr: String,
    },
}

/// A whitespace-split command line; placeholders are substituted inside each
/// token, so paths with spaces stay single arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandTemplate {
    tokens: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(template: &str, required: &[&str]) -> Result<Self, ProcessError> {
        let tokens: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(ProcessError::Empty);
        }
        for name in required {
            let ph = format!("{{{name}}}");
            if !tokens.iter().any(|t| t.contains(&ph)) {
                return Err(ProcessError::MissingPlaceholder(name.to_string()));
            }
        }
        Ok(Self { tokens })
    }

    pub fn render(&self, values: &[(&str, String)]) -> Vec<String> {
        self.tokens
            .iter()
            .map(|t| {
                values
                    .iter()
                    .fold(t.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
            })
            .collect()
    }
}

/// Runs `argv`, killing it after `timeout`. Non-zero exit is an error that
/// carries the captured stderr.
pub fn run_command(argv: &[String], timeout: Duration) -> Result<(), ProcessError> {
    let program = argv.first().ok_or(ProcessError::Empty)?.clone();
    let mut child = Command::new(&program)
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ProcessError::Spawn {
            program: program.clone(),
            reason: e.to_string(),
        })?;
    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });
    let status = match child.wait_timeout(timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ProcessError::Timeout {
                program,
                secs: timeout.as_secs(),
            });
        }
        Err(e) => {
            let _ = child.kill();
            return Err(ProcessError::Spawn {
                program,
                reason: e.to_string(),
            });
        }
    };
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ProcessError::Failed {
            program,
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }
    Ok(())
}

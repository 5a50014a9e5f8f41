use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use smclab::Error;

use crate::config::ConfigError;

/// Command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Numerical(String),
    Assert(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Assert(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
            Failure::Assert(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Capability(_) => {
                Failure::Config(msg)
            }
            _ => Failure::Numerical(msg),
        }
    }
}

/// Line-oriented `key = value` record of one invocation. It is the only
/// output carrying a timestamp.
#[derive(Debug)]
pub struct Manifest {
    dir: PathBuf,
    command: String,
    config_echo: Option<String>,
    params: Vec<(String, String)>,
    outputs: Vec<String>,
    statuses: Vec<(String, String)>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.txt";

    pub fn new(dir: &Path, command: &str) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Manifest {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_echo: None,
            params: Vec::new(),
            outputs: Vec::new(),
            statuses: Vec::new(),
        })
    }

    pub fn config_echo(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        self.write(name, contents)?;
        self.config_echo = Some(name.into());
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.into(), value.to_string()));
    }

    /// Writes `name` inside the output directory and lists it.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn status(&mut self, label: &str, status: impl ToString) {
        self.statuses.push((label.into(), status.to_string()));
    }

    pub fn finish(self) -> Result<(), Failure> {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut out = format!(
            "tool_version = smclab {}\ntimestamp_unix = {ts}\ncommand = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        if let Some(e) = &self.config_echo {
            out += &format!("config_echo = {e}\n");
        }
        for (k, v) in &self.params {
            out += &format!("param.{k} = {v}\n");
        }
        for o in &self.outputs {
            out += &format!("output = {o}\n");
        }
        for (label, s) in &self.statuses {
            out += &format!("status.{label} = {s}\n");
        }
        let path = self.dir.join(Self::FILE);
        fs::write(&path, out).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

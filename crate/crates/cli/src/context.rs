use std::fmt::Display;
use std::path::{Path, PathBuf};

use absa_core::textprep::TextPipeline;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{self, RunConfig};

/// Why a run failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

impl From<absa_core::Error> for Failure {
    fn from(e: absa_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

pub fn data_error(msg: impl Display) -> Failure {
    Failure::Data(msg.to_string())
}

/// One JSON event per line on standard error.
pub fn log(level: &str, event: &str, fields: Value) {
    let mut obj = json!({ "level": level, "event": event });
    if let (Some(o), Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    eprintln!("{obj}");
}

/// JSON artifact stamped with the producing command and config digest.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub command: String,
    pub config_digest: String,
    pub data: T,
}

pub struct Context {
    pub config: RunConfig,
    pub digest: String,
    pub workers: usize,
    out: PathBuf,
}

impl Context {
    pub fn new(
        config_path: Option<&Path>,
        sets: &[String],
        seed: Option<u64>,
        workers: usize,
        out: PathBuf,
    ) -> Result<Context, Failure> {
        let config = config::resolve(config_path, sets, seed).map_err(Failure::Usage)?;
        if workers == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        // Sizes the pool used by per-aspect training and grouped LDA.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
        let digest = config::digest(&config);
        Ok(Context {
            config,
            digest,
            workers,
            out,
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn text_pipeline(&self) -> Result<TextPipeline, Failure> {
        let t = &self.config.textprep;
        if t.stopwords.is_none() && t.lexicon.is_none() {
            return Ok(TextPipeline::bundled().clone());
        }
        Ok(TextPipeline::from_files(t.stopwords.as_deref(), t.lexicon.as_deref())?)
    }

    /// Path of an output file; parent directories are created.
    pub fn output(&self, name: &str) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| data_error(format!("{}: {e}", parent.display())))?;
        }
        Ok(path)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.output(name)?;
        std::fs::write(&path, contents).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_artifact<T: Serialize>(&self, name: &str, command: &str, data: T) -> Result<PathBuf, Failure> {
        let artifact = Artifact {
            command: command.to_string(),
            config_digest: self.digest.clone(),
            data,
        };
        let mut text = serde_json::to_string_pretty(&artifact)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Records the effective configuration next to the outputs.
    pub fn finish<A: Serialize>(&self, command: &str, args: &A) -> Result<(), Failure> {
        let run = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "args": args,
            "config": self.config,
            "config_digest": self.digest,
        });
        self.write("run.json", serde_json::to_string_pretty(&run)? + "\n")?;
        log("info", "done", json!({ "command": command, "out": self.out.display().to_string() }));
        Ok(())
    }
}

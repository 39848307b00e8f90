//! Run directory layout and deterministic report writing.
//!
//! Every run owns one directory containing a verbatim copy of the config,
//! a `summary.json` embedding the config hash and tolerance settings, and
//! any CSV data files. Outputs are byte-identical across repeated runs of
//! the same config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Tolerances;
use crate::CliError;

pub struct RunDir {
    pub dir: PathBuf,
    pub config_hash: String,
    pub tolerances: Tolerances,
}

impl RunDir {
    pub fn create(
        dir: PathBuf,
        raw_config: &[u8],
        tolerances: Tolerances,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(CliError::io)?;
        fs::write(dir.join("config.json"), raw_config).map_err(CliError::io)?;
        let config_hash = crate::config::config_hash(raw_config);
        Ok(Self { dir, config_hash, tolerances })
    }

    /// Writes `summary.json` with the common header fields first.
    pub fn write_summary<T: Serialize>(&self, command: &str, body: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Summary<'a, T> {
            command: &'a str,
            config_hash: &'a str,
            tolerances: &'a Tolerances,
            #[serde(flatten)]
            body: &'a T,
        }
        let summary = Summary { command, config_hash: &self.config_hash, tolerances: &self.tolerances, body };
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Numerical(e.to_string()))?;
        fs::write(self.dir.join("summary.json"), text + "\n").map_err(CliError::io)?;
        Ok(())
    }

    pub fn csv_writer(&self, name: &str) -> Result<impl Write, CliError> {
        let f = fs::File::create(self.dir.join(name)).map_err(CliError::io)?;
        Ok(std::io::BufWriter::new(f))
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

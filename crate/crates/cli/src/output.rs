use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Output directory for one run, with the provenance every artifact carries.
pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    digest: String,
    config_json: String,
}

impl Artifacts {
    pub fn new(config: &RunConfig, command: &'static str) -> CliResult<Self> {
        fs::create_dir_all(&config.out)
            .map_err(|e| CliError::data(anyhow!("cannot create {}: {e}", config.out.display())))?;
        Ok(Artifacts {
            dir: config.out.clone(),
            command,
            digest: config.digest(),
            config_json: config.to_json(),
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// `key=value` lines for `#`-commented headers.
    pub fn header(&self) -> Vec<String> {
        vec![
            format!("drskit {}", self.command),
            format!("config_digest={}", self.digest),
            format!("config={}", self.config_json),
        ]
    }

    /// Provenance object for JSON outputs.
    pub fn provenance(&self) -> Value {
        json!({
            "command": self.command,
            "config_digest": self.digest,
            "config": serde_json::from_str::<Value>(&self.config_json).expect("valid json"),
        })
    }

    /// Writes `name` through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial file.
    pub fn write<F>(&mut self, name: &str, fill: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        write_atomic(&path, fill)?;
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> CliResult<PathBuf> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)
        })
    }
}

pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io_err = |e: std::io::Error| CliError::data(anyhow!("writing {}: {e}", path.display()));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes `# line` for every header line.
pub fn comment_header(out: &mut dyn Write, header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, |o| o.write_all(b"first version, longer")).unwrap();
        write_atomic(&path, |o| o.write_all(b"second")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failed_fill_leaves_old_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, |o| o.write_all(b"kept")).unwrap();
        let r = write_atomic(&path, |_| Err(std::io::Error::other("boom")));
        assert!(r.is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), "kept");
    }
}

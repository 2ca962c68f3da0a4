use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Settings, Tolerances};
use crate::error::CliError;

/// Provenance block carried by every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub model: String,
    pub grid: usize,
    pub scheme: String,
    pub seed: u64,
    pub threads: usize,
    pub tolerances: Tolerances,
}

impl Header {
    pub fn new(settings: &Settings) -> Self {
        Self {
            tool: "qgeom",
            version: env!("CARGO_PKG_VERSION"),
            command: settings.command,
            config_hash: settings.config_hash(),
            model: serde_json::to_string(&settings.model).expect("model serializes"),
            grid: settings.grid,
            scheme: settings.scheme.label(),
            seed: settings.seed,
            threads: settings.threads,
            tolerances: settings.tolerances.clone(),
        }
    }

    /// `# key=value` lines for CSV files.
    pub fn comment_lines(&self) -> String {
        let t = &self.tolerances;
        let pairs: Vec<(&str, String)> = vec![
            ("tool", format!("{} {}", self.tool, self.version)),
            ("command", self.command.to_string()),
            ("config_hash", self.config_hash.clone()),
            ("model", self.model.clone()),
            ("grid", self.grid.to_string()),
            ("scheme", self.scheme.clone()),
            ("seed", self.seed.to_string()),
            ("threads", self.threads.to_string()),
            ("tol_metric", format!("{:e}", t.metric)),
            ("tol_det_identity", format!("{:e}", t.det_identity)),
            ("tol_riemann", format!("{:e}", t.riemann)),
            ("tol_scalar", format!("{:e}", t.scalar)),
            ("tol_einstein", format!("{:e}", t.einstein)),
            ("tol_euler", format!("{:e}", t.euler)),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("# {k}={v}\n"))
            .collect()
    }
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    header: &Header,
    body: &T,
) -> Result<PathBuf, CliError> {
    prepare(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(&JsonDoc { header, body })?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Header comments followed by CSV produced by `fill`.
pub fn write_csv<F>(dir: &Path, name: &str, header: &Header, fill: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
{
    let mut buf = header.comment_lines().into_bytes();
    fill(&mut buf)?;
    prepare(dir)?;
    let path = dir.join(name);
    fs::File::create(&path)?.write_all(&buf)?;
    Ok(path)
}

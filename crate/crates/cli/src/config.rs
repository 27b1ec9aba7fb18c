//! Optional TOML run file. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! mesh = "mesh.obj"
//! poses = "poses.json"
//! annotations = "annotations.json"
//! interest = "DJI_0123"
//! radius = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mesh: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub oracle_endpoint: Option<String>,
    pub rules: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub interest: Option<String>,
    pub radius: Option<f64>,
    pub concurrency: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub full_events: Option<bool>,
    pub negatives: Option<usize>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    /// Reads `path`; relative paths inside are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.mesh,
            &mut cfg.poses,
            &mut cfg.annotations,
            &mut cfg.rules,
            &mut cfg.vocab,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// First of flag, file value; error naming the flag when both are absent.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Config(format!("--{name} is required (flag or config file)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "mesh = \"m.obj\"\nposes = \"/abs/p.json\"\nradius = 2.5\n",
        )
        .unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.mesh, Some(dir.path().join("m.obj")));
        assert_eq!(cfg.poses, Some(PathBuf::from("/abs/p.json")));
        assert_eq!(cfg.radius, Some(2.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "radious = 2.5\n").unwrap();
        assert!(matches!(FileConfig::load(&path), Err(CliError::Parse(_))));
    }

    #[test]
    fn flags_win() {
        assert_eq!(required(Some(1), Some(2), "x").unwrap(), 1);
        assert_eq!(required(None, Some(2), "x").unwrap(), 2);
        assert!(matches!(
            required::<u8>(None, None, "x"),
            Err(CliError::Config(_))
        ));
    }
}

use std::env;
use std::path::PathBuf;

use anyhow::{Context, Result};

use chinpoint_core::CalibrationProfile;

pub const PROFILE_FILE: &str = "profile.txt";

pub struct Config {
    pub dir: PathBuf,
    pub profile: CalibrationProfile,
}

impl Config {
    /// Explicit profile file first, then `profile.txt` in the config dir,
    /// then the built-in defaults.
    pub fn resolve(dir: Option<PathBuf>, profile: Option<PathBuf>) -> Result<Self> {
        let dir = dir.unwrap_or_else(default_dir);
        let explicit = profile.is_some();
        let path = profile.unwrap_or_else(|| dir.join(PROFILE_FILE));
        let profile = match std::fs::read_to_string(&path) {
            Ok(text) => CalibrationProfile::from_text(&text)
                .with_context(|| format!("loading {}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && !explicit => {
                CalibrationProfile::default()
            }
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        Ok(Self { dir, profile })
    }

    pub fn profile_path(&self) -> PathBuf {
        self.dir.join(PROFILE_FILE)
    }
}

fn default_dir() -> PathBuf {
    if let Some(x) = env::var_os("XDG_CONFIG_HOME").filter(|x| !x.is_empty()) {
        return PathBuf::from(x).join("chinpoint");
    }
    match env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".config").join("chinpoint"),
        None => PathBuf::from(".chinpoint"),
    }
}

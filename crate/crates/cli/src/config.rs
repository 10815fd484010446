//! Optional TOML file with defaults for command-line flags. Flags given on
//! the command line always win.

use std::path::Path;

use serde::Deserialize;

use mada_core::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub decode: DecodeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub ratios: Option<[f64; 3]>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub alpha: Option<f64>,
    pub lambdas: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub method: Option<String>,
    pub actions: Option<usize>,
    pub gamma: Option<f64>,
    pub top_k: Option<usize>,
    pub top_p: Option<f64>,
    pub max_len: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

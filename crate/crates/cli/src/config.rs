//! Optional TOML file supplying defaults for `study` flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use crate::report::Format;

/// A number or a string such as `"2^-6"` or `"poisson"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamText {
    Number(f64),
    Text(String),
}

impl ParamText {
    pub fn text(&self) -> String {
        match self {
            ParamText::Number(v) => format!("{v}"),
            ParamText::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Rect,
    Trap,
    Random,
}

/// Every key is optional; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub eps: Option<Vec<ParamText>>,
    pub nu: Option<Vec<ParamText>>,
    pub alpha: Option<Vec<ParamText>>,
    pub mesh: Option<MeshKind>,
    pub n: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub quad_order: Option<usize>,
    pub error_quad_order: Option<usize>,
    pub frequency: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn texts(list: &Option<Vec<ParamText>>) -> Option<Vec<String>> {
    list.as_ref().map(|v| v.iter().map(ParamText::text).collect())
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ibo_core::engine::{IboKind, OptimizerOptions};
use ibo_core::pathologies::QuantizationSpec;
use ibo_core::trained::{LossTable, SigmaMethod};
use ibo_core::{io, numeric, GenerativeWorld};

/// How the encoder `p(t | x_P)` of `info`, `bounds` and `tempered` is chosen.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EncoderChoice {
    Named(EncoderName),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderName {
    /// `t = x_P`; forces `|T| = |X^N|`.
    Identity,
    /// Uniform over `T` for every dataset.
    Constant,
    /// Rows drawn from the flat Dirichlet with the master seed.
    Random,
}

/// Variational pair used by `bounds` and `tempered`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairChoice {
    /// `q_t = p(t)`, `q(x_P|t) = p(x_P|t)` of the encoder (minimizes the bound).
    #[default]
    Exact,
    /// Drawn with the master seed.
    Random,
    /// Bayes factorization of the encoder against a uniform reference.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: IboKind,
    #[serde(default)]
    pub nu: Option<f64>,
}

/// One JSON experiment document. Paths resolve against the config's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub world: Option<PathBuf>,
    #[serde(default)]
    pub t_size: Option<usize>,
    #[serde(default)]
    pub t_symbols: Option<Vec<String>>,
    #[serde(default)]
    pub encoder: Option<EncoderChoice>,
    #[serde(default)]
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default)]
    pub oracle_resolution: Option<f64>,
    #[serde(default)]
    pub loss: Option<PathBuf>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma_method: Option<SigmaMethod>,
    #[serde(default)]
    pub battery_count: Option<usize>,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    #[serde(default)]
    pub pair: PairChoice,
    #[serde(default)]
    pub quantization: Option<QuantizationSpec>,
    #[serde(default)]
    pub self_info_grid: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub sha256: String,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("config {} is not UTF-8", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| anyhow::Error::new(ibo_core::Error::Parse(e)))
            .with_context(|| format!("config {}", path.display()))?;
        Ok(Self {
            config,
            path: path.to_path_buf(),
            sha256: numeric::sha256_hex(&bytes),
        })
    }

    fn base(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base().join(p)
        }
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        match (cli, &self.config.output_dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => self.resolve(d),
            (None, None) => self.base().join("out"),
        }
    }

    pub fn world(&self) -> Result<GenerativeWorld> {
        let Some(p) = &self.config.world else {
            bail!(validation("field `world`: required by this command"));
        };
        let path = self.resolve(p);
        let text = fs::read_to_string(&path).with_context(|| format!("reading world file {}", path.display()))?;
        io::parse_world(&text).with_context(|| format!("world file {}", path.display()))
    }

    pub fn loss(&self) -> Result<LossTable> {
        let Some(p) = &self.config.loss else {
            bail!(validation("field `loss`: required by this command"));
        };
        let path = self.resolve(p);
        let text = fs::read_to_string(&path).with_context(|| format!("reading loss file {}", path.display()))?;
        io::parse_loss(&text).with_context(|| format!("loss file {}", path.display()))
    }

    pub fn encoder_file(&self, p: &Path) -> Result<ibo_core::Kernel> {
        let path = self.resolve(p);
        let text = fs::read_to_string(&path).with_context(|| format!("reading encoder file {}", path.display()))?;
        io::parse_kernel(&text).with_context(|| format!("encoder file {}", path.display()))
    }
}

/// A validation failure (exit code 1) that does not come from the core crate.
pub fn validation(msg: impl Into<String>) -> ibo_core::Error {
    ibo_core::Error::InvalidArgument(msg.into())
}

/// Nonempty list required by a command.
pub fn required_list<'a>(list: &'a Option<Vec<f64>>, field: &str) -> Result<&'a [f64]> {
    match list {
        None => bail!(validation(format!("field `{field}`: required by this command"))),
        Some(v) if v.is_empty() => bail!(validation(format!("field `{field}`: list is empty"))),
        Some(v) => Ok(v),
    }
}

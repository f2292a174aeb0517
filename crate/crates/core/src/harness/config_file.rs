//! Plain-text experiment configuration: one `key = value` per line, keys
//! matching the config field names (`model`, `law`, `rho`, `p_total`, `snr`,
//! `normalized`, `n`, `W`, `B`, `mtry_forest`, `min_node_size`, `test_size`,
//! `master_seed`, `workers`, `output`, `format`). Blank lines and lines
//! starting with `#` are ignored; unknown keys are errors.

use crate::dgp::{CovariateLaw, RegressionFn};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, MtryRule};

/// Options accumulated from a config file and/or command-line flags; applied
/// on top of defaults by [`PartialConfig::build`].
#[derive(Debug, Clone, Default)]
pub struct PartialConfig {
    pub label: Option<String>,
    pub model: Option<RegressionFn>,
    pub law: Option<LawName>,
    pub rho: Option<f64>,
    pub p_total: Option<usize>,
    pub snr: Option<f64>,
    pub normalized: Option<bool>,
    pub n: Option<usize>,
    pub runs: Option<usize>,
    pub trees: Option<usize>,
    pub mtry_forest: Option<MtryRule>,
    pub min_node_size: Option<usize>,
    pub test_size: Option<usize>,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<String>,
    pub format: Option<String>,
}

/// Covariate law by name; `rho` is carried separately so the two keys can
/// appear in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawName {
    Uniform,
    Normal,
    Equicorrelated,
}

impl std::str::FromStr for LawName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(LawName::Uniform),
            "normal" => Ok(LawName::Normal),
            "equicorrelated" => Ok(LawName::Equicorrelated),
            other => Err(Error::invalid(format!(
                "unknown law `{other}` (expected uniform, normal, or equicorrelated)"
            ))),
        }
    }
}

impl PartialConfig {
    /// Values from `other` win over `self`.
    pub fn overridden_by(mut self, other: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            label, model, law, rho, p_total, snr, normalized, n, runs, trees, mtry_forest,
            min_node_size, test_size, master_seed, workers, output, format
        );
        self
    }

    /// Resolves to a runnable configuration. `model` is required; the law
    /// defaults to the model's customary pairing (normal covariates for
    /// `linear`, uniform for `mars` and `hidden`).
    pub fn build(&self) -> Result<ExperimentConfig> {
        let model = self
            .model
            .ok_or_else(|| Error::invalid("missing config field `model`"))?;
        let law_name = self.law.unwrap_or(match model {
            RegressionFn::Linear => LawName::Normal,
            RegressionFn::Mars | RegressionFn::Hidden => LawName::Uniform,
        });
        let law = match law_name {
            LawName::Uniform => {
                if self.rho.is_some() {
                    return Err(Error::invalid(
                        "config field `rho` requires law = equicorrelated",
                    ));
                }
                CovariateLaw::IidUniform01
            }
            LawName::Normal => {
                if self.rho.is_some() {
                    return Err(Error::invalid(
                        "config field `rho` requires law = equicorrelated",
                    ));
                }
                CovariateLaw::IidStandardNormal
            }
            LawName::Equicorrelated => CovariateLaw::EquicorrelatedNormal {
                rho: self.rho.unwrap_or(0.0),
            },
        };
        let mut config = ExperimentConfig::new(model, law);
        if let Some(v) = &self.label {
            config.label = v.clone();
        }
        if let Some(v) = self.p_total {
            config.p_total = v;
        }
        if let Some(v) = self.snr {
            config.snr = v;
        }
        if let Some(v) = self.normalized {
            config.normalized = v;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = self.runs {
            config.runs = v;
        }
        if let Some(v) = self.trees {
            config.trees = v;
        }
        if let Some(v) = self.mtry_forest {
            config.mtry_forest = v;
        }
        if let Some(v) = self.min_node_size {
            config.min_node_size = v;
        }
        if let Some(v) = self.test_size {
            config.test_size = v;
        }
        if let Some(v) = self.master_seed {
            config.master_seed = v;
        }
        if let Some(v) = self.workers {
            config.workers = v;
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| {
        Error::invalid(format!("config field `{key}`: cannot parse `{value}`: {e}"))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::invalid(format!(
            "config field `{key}`: expected true/false, got `{other}`"
        ))),
    }
}

pub fn parse_config_file(text: &str) -> Result<PartialConfig> {
    let mut out = PartialConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::invalid(format!(
                "config line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "label" => out.label = Some(value.to_string()),
            "model" => out.model = Some(value.parse()?),
            "law" => out.law = Some(value.parse()?),
            "rho" => out.rho = Some(parse::<f64>(key, value)?),
            "p_total" => out.p_total = Some(parse(key, value)?),
            "snr" => out.snr = Some(parse(key, value)?),
            "normalized" => out.normalized = Some(parse_bool(key, value)?),
            "n" => out.n = Some(parse(key, value)?),
            "W" => out.runs = Some(parse(key, value)?),
            "B" => out.trees = Some(parse(key, value)?),
            "mtry_forest" => out.mtry_forest = Some(value.parse()?),
            "min_node_size" => out.min_node_size = Some(parse(key, value)?),
            "test_size" => out.test_size = Some(parse(key, value)?),
            "master_seed" => out.master_seed = Some(parse(key, value)?),
            "workers" => out.workers = Some(parse(key, value)?),
            "output" => out.output = Some(value.to_string()),
            "format" => out.format = Some(value.to_string()),
            other => {
                return Err(Error::invalid(format!(
                    "unknown config key `{other}` on line {}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}

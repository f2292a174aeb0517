//! Canned experiment batteries reproducing the published tables. Each preset
//! fixes the protocol (model, covariate law, dimensions, SNR, training size,
//! mtry rule); scale knobs (replicates, trees, test size) can be overridden
//! for desk-scale runs without touching the seed derivation.

use crate::dgp::{CovariateLaw, RegressionFn};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, ExperimentConfig, MtryRule, ReportRow};

pub const PRESET_NAMES: [&str; 9] = [
    "table1",
    "table2",
    "table3",
    "table4_dist",
    "table5_irrelevant",
    "table6_rho",
    "table7_joint",
    "appendixC_low",
    "appendixC_high",
];

/// Scale-down knobs; `None` keeps the full protocol value.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScaleOverrides {
    pub runs: Option<usize>,
    pub trees: Option<usize>,
    pub test_size: Option<usize>,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
}

impl ScaleOverrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(v) = self.runs {
            config.runs = v;
        }
        if let Some(v) = self.trees {
            config.trees = v;
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
    }
}

fn replication_base(model: RegressionFn) -> ExperimentConfig {
    // replication protocol: model-specific n and mtry, original covariate law
    let (law, n, mtry) = match model {
        RegressionFn::Linear => (CovariateLaw::IidStandardNormal, 100, MtryRule::ThirdOfP),
        RegressionFn::Mars => (CovariateLaw::IidUniform01, 200, MtryRule::ThirdOfP),
        RegressionFn::Hidden => (CovariateLaw::IidUniform01, 500, MtryRule::HalfOfP),
    };
    let mut config = ExperimentConfig::new(model, law);
    config.n = n;
    config.mtry_forest = mtry;
    config
}

fn replication_table(name: &str, model: RegressionFn) -> Vec<ExperimentConfig> {
    let mut out = Vec::with_capacity(6);
    for &normalized in &[false, true] {
        for &snr in &[0.05, 1.0, 6.0] {
            let mut config = replication_base(model);
            config.snr = snr;
            config.normalized = normalized;
            config.label = format!(
                "{name}/{}/snr{snr}",
                if normalized { "normalized" } else { "original" }
            );
            out.push(config);
        }
    }
    out
}

/// Shared protocol of the data-characteristics studies: n = 250, mtry p/3,
/// normalized signal.
fn study_base(model: RegressionFn, law: CovariateLaw, snr: f64) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(model, law);
    config.n = 250;
    config.snr = snr;
    config
}

fn dist_table(name: &str, snr: f64) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for model in [RegressionFn::Linear, RegressionFn::Mars, RegressionFn::Hidden] {
        for law in [CovariateLaw::IidStandardNormal, CovariateLaw::IidUniform01] {
            let mut config = study_base(model, law, snr);
            config.label = format!("{name}/{}/{}", model.name(), law.name());
            out.push(config);
        }
    }
    out
}

fn irrelevant_table(name: &str, snr: f64) -> Vec<ExperimentConfig> {
    let cases = [
        (RegressionFn::Linear, CovariateLaw::IidStandardNormal, [1, 25]),
        (RegressionFn::Mars, CovariateLaw::IidUniform01, [1, 25]),
        (RegressionFn::Hidden, CovariateLaw::IidUniform01, [1, 13]),
    ];
    let mut out = Vec::new();
    for (model, law, counts) in cases {
        for irrelevant in counts {
            let mut config = study_base(model, law, snr);
            config.p_total = model.relevant_count() + irrelevant;
            config.label = format!("{name}/{}/irr{}", model.name(), irrelevant);
            out.push(config);
        }
    }
    out
}

fn rho_table(name: &str, snr: f64) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for model in [RegressionFn::Linear, RegressionFn::Mars, RegressionFn::Hidden] {
        for rho in [0.0, 0.5] {
            let mut config = study_base(model, CovariateLaw::EquicorrelatedNormal { rho }, snr);
            config.label = format!("{name}/{}/rho{rho}", model.name());
            out.push(config);
        }
    }
    out
}

fn joint_table(name: &str) -> Vec<ExperimentConfig> {
    let cases = [
        (RegressionFn::Linear, [1usize, 25, 55]),
        (RegressionFn::Mars, [1, 25, 55]),
        (RegressionFn::Hidden, [1, 13, 28]),
    ];
    let mut out = Vec::new();
    for (model, counts) in cases {
        for irrelevant in counts {
            for rho in [0.0, 0.5, 0.9] {
                let mut config =
                    study_base(model, CovariateLaw::EquicorrelatedNormal { rho }, 1.0);
                config.p_total = model.relevant_count() + irrelevant;
                config.label = format!("{name}/{}/irr{}/rho{}", model.name(), irrelevant, rho);
                out.push(config);
            }
        }
    }
    out
}

/// The experiment list behind a preset, scale overrides applied.
pub fn preset_configs(name: &str, overrides: &ScaleOverrides) -> Result<Vec<ExperimentConfig>> {
    let mut configs = match name {
        "table1" => replication_table(name, RegressionFn::Linear),
        "table2" => replication_table(name, RegressionFn::Mars),
        "table3" => replication_table(name, RegressionFn::Hidden),
        "table4_dist" => dist_table(name, 1.0),
        "table5_irrelevant" => irrelevant_table(name, 1.0),
        "table6_rho" => rho_table(name, 1.0),
        "table7_joint" => joint_table(name),
        "appendixC_low" => {
            let mut v = dist_table("appendixC_low/dist", 0.05);
            v.extend(irrelevant_table("appendixC_low/irrelevant", 0.05));
            v.extend(rho_table("appendixC_low/rho", 0.05));
            v
        }
        "appendixC_high" => {
            let mut v = dist_table("appendixC_high/dist", 6.0);
            v.extend(irrelevant_table("appendixC_high/irrelevant", 6.0));
            v.extend(rho_table("appendixC_high/rho", 6.0));
            v
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown preset `{other}` (valid: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    for config in &mut configs {
        overrides.apply(config);
    }
    Ok(configs)
}

/// Runs every experiment of a preset and returns one row per experiment.
pub fn run_table_preset(name: &str, overrides: &ScaleOverrides) -> Result<Vec<ReportRow>> {
    preset_configs(name, overrides)?
        .iter()
        .map(|config| run_experiment(config).map(|out| out.row))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes_match_the_tables() {
        let ov = ScaleOverrides::default();
        assert_eq!(preset_configs("table1", &ov).unwrap().len(), 6);
        assert_eq!(preset_configs("table2", &ov).unwrap().len(), 6);
        assert_eq!(preset_configs("table3", &ov).unwrap().len(), 6);
        assert_eq!(preset_configs("table4_dist", &ov).unwrap().len(), 6);
        assert_eq!(preset_configs("table5_irrelevant", &ov).unwrap().len(), 6);
        assert_eq!(preset_configs("table6_rho", &ov).unwrap().len(), 6);
        // 3 models x 3 irrelevant-counts, each at 3 correlations
        assert_eq!(preset_configs("table7_joint", &ov).unwrap().len(), 27);
        assert_eq!(preset_configs("appendixC_low", &ov).unwrap().len(), 18);
        assert_eq!(preset_configs("appendixC_high", &ov).unwrap().len(), 18);
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let err = preset_configs("table9", &ScaleOverrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("table9"));
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "{msg} missing {name}");
        }
    }

    #[test]
    fn overrides_scale_without_touching_protocol() {
        let ov = ScaleOverrides {
            runs: Some(4),
            trees: Some(5),
            test_size: Some(100),
            master_seed: None,
            workers: Some(1),
        };
        for config in preset_configs("table1", &ov).unwrap() {
            assert_eq!((config.runs, config.trees, config.test_size), (4, 5, 100));
            assert_eq!(config.n, 100);
            assert_eq!(config.master_seed, 42);
        }
    }

    #[test]
    fn every_preset_config_validates() {
        for name in PRESET_NAMES {
            for config in preset_configs(name, &ScaleOverrides::default()).unwrap() {
                config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }
}

//! Experiment orchestration: paired bagging/forest replicates over simulated
//! data, table presets, sweeps, and figure data.
//!
//! Seed derivation, frozen (see [`crate::seed`]): from the master seed,
//! `"calibrate"` scales the signal, `"test"` draws the shared test set,
//! `("train", w)` draws training set `w`, and `("ensemble", w)` seeds the
//! trees of replicate `w`. The ensemble seed is shared by bagging and forest,
//! so the two methods see identical training data and identical bootstrap
//! streams; with `mtry = p` or perfectly correlated covariates their
//! predictions coincide bit for bit.

mod config_file;
pub mod output;
pub mod presets;

pub use config_file::{parse_config_file, PartialConfig};

use rayon::prelude::*;
use serde::Serialize;

use crate::cart::GrowthParams;
use crate::dgp::{CovariateLaw, Dataset, DgpSpec, RegressionFn, DEFAULT_CALIB_N};
use crate::ensemble::{train_ensemble, EnsembleModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{compare, conditional_slice, ComparisonReport, RunAccumulator, SliceBin};
use crate::seed::subseed;

/// Environment variable overriding the worker count of every experiment.
pub const WORKERS_ENV: &str = "FORESTLAB_WORKERS";

/// How the forest's `mtry` is chosen from the covariate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtryRule {
    /// `max(1, floor(p / 3))`
    ThirdOfP,
    /// `max(1, floor(p / 2))`
    HalfOfP,
    Fixed(usize),
}

impl MtryRule {
    pub fn resolve(&self, p: usize) -> usize {
        match *self {
            MtryRule::ThirdOfP => (p / 3).max(1),
            MtryRule::HalfOfP => (p / 2).max(1),
            MtryRule::Fixed(k) => k,
        }
    }
}

impl std::str::FromStr for MtryRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p/3" => Ok(MtryRule::ThirdOfP),
            "p/2" => Ok(MtryRule::HalfOfP),
            other => other
                .parse::<usize>()
                .map(MtryRule::Fixed)
                .map_err(|_| Error::invalid(format!("mtry must be `p/3`, `p/2`, or an integer, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for MtryRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MtryRule::ThirdOfP => write!(f, "p/3"),
            MtryRule::HalfOfP => write!(f, "p/2"),
            MtryRule::Fixed(k) => write!(f, "{k}"),
        }
    }
}

/// A fully specified paired experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub model: RegressionFn,
    pub law: CovariateLaw,
    pub p_total: usize,
    pub snr: f64,
    pub normalized: bool,
    /// Training set size.
    pub n: usize,
    /// Number of training replicates (`W`).
    pub runs: usize,
    /// Trees per ensemble (`B`).
    pub trees: usize,
    pub mtry_forest: MtryRule,
    pub min_node_size: usize,
    pub test_size: usize,
    pub master_seed: u64,
    /// Worker threads; 0 means one per CPU.
    pub workers: usize,
}

impl ExperimentConfig {
    /// Protocol defaults: 500 replicates of 500-tree ensembles on `n = 250`,
    /// moderate SNR, normalized signal, one shared test set of 10,000.
    pub fn new(model: RegressionFn, law: CovariateLaw) -> Self {
        ExperimentConfig {
            label: model.name().to_string(),
            model,
            law,
            p_total: model.relevant_count(),
            snr: 1.0,
            normalized: true,
            n: 250,
            runs: 500,
            trees: 500,
            mtry_forest: MtryRule::ThirdOfP,
            min_node_size: 5,
            test_size: 10_000,
            master_seed: 42,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law
            .validate()
            .map_err(|e| Error::invalid(format!("config field `rho`: {e}")))?;
        if self.p_total < self.model.relevant_count() {
            return Err(Error::invalid(format!(
                "config field `p_total`: {} is below the {} relevant covariates of {}",
                self.p_total,
                self.model.relevant_count(),
                self.model.name()
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::invalid(format!(
                "config field `snr`: must be positive, got {}",
                self.snr
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("config field `n`: must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("config field `W`: must be at least 1"));
        }
        if self.trees == 0 {
            return Err(Error::invalid("config field `B`: must be at least 1"));
        }
        if self.min_node_size == 0 {
            return Err(Error::invalid(
                "config field `min_node_size`: must be at least 1",
            ));
        }
        if self.test_size == 0 {
            return Err(Error::invalid("config field `test_size`: must be at least 1"));
        }
        let mtry = self.mtry_forest.resolve(self.p_total);
        if mtry == 0 || mtry > self.p_total {
            return Err(Error::invalid(format!(
                "config field `mtry_forest`: resolves to {mtry}, outside [1, {}]",
                self.p_total
            )));
        }
        Ok(())
    }
}

/// One table column: every reported quantity for one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub preset: String,
    pub sigma_f: f64,
    pub sigma_eps: f64,
    pub bias_sq_bag: f64,
    pub bias_sq_forest: f64,
    pub var_bag: f64,
    pub var_forest: f64,
    pub tree_var_bag: f64,
    pub tree_var_forest: f64,
    pub corr_bag: f64,
    pub corr_forest: f64,
    /// Empirical test-set noise, `mean_j (y_j - f_j)^2`; the known floor
    /// `sigma_eps^2` is available in the per-method decompositions.
    pub irreducible: f64,
    pub mse_bag: f64,
    pub mse_forest: f64,
    /// NaN when the paired differences were all equal.
    pub t_statistic: f64,
    pub delta_r_percent: f64,
}

/// A completed experiment: the summary row plus everything needed for
/// conditional (per-covariate) figure data.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub row: ReportRow,
    pub comparison: ComparisonReport,
    pub bagging: RunAccumulator,
    pub forest: RunAccumulator,
    pub test_x: Matrix,
    pub spec: DgpSpec,
}

struct MethodRun {
    preds: Vec<f64>,
    stats: Vec<(f64, f64)>,
}

fn evaluate(model: &EnsembleModel, test_x: &Matrix) -> Result<MethodRun> {
    let b = model.num_trees() as f64;
    let mut preds = Vec::with_capacity(test_x.rows());
    let mut stats = Vec::with_capacity(test_x.rows());
    for j in 0..test_x.rows() {
        let (s, q) = model.predict_stats(test_x.row(j))?;
        preds.push(s / b);
        stats.push((s, q));
    }
    Ok(MethodRun { preds, stats })
}

fn effective_workers(config: &ExperimentConfig) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(config.workers)
}

/// Runs the full paired protocol for one configuration.
///
/// Replicates are distributed over a bounded worker pool; each produces a
/// private partial result and the partials are folded in replicate order, so
/// the output is bit-identical for any worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let spec = DgpSpec::resolve(
        config.model,
        config.law,
        config.p_total,
        config.snr,
        config.normalized,
        DEFAULT_CALIB_N,
        subseed(config.master_seed, "calibrate", &[]),
    )?;

    let test = spec.generate(config.test_size, subseed(config.master_seed, "test", &[]))?;
    let signal: Vec<f64> = (0..test.n())
        .map(|j| spec.signal(test.x.row(j)))
        .collect::<Result<_>>()?;

    let bag_params = GrowthParams {
        mtry: config.p_total,
        min_node_size: config.min_node_size,
        bootstrap: true,
    };
    let forest_params = GrowthParams {
        mtry: config.mtry_forest.resolve(config.p_total),
        min_node_size: config.min_node_size,
        bootstrap: true,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(effective_workers(config))
        .build()
        .map_err(|e| Error::Runtime(format!("worker pool: {e}")))?;

    let run_one = |w: usize| -> Result<(MethodRun, MethodRun)> {
        let train = spec.generate(config.n, subseed(config.master_seed, "train", &[w as u64]))?;
        let ensemble_seed = subseed(config.master_seed, "ensemble", &[w as u64]);
        let bag = train_ensemble(&train, &bag_params, config.trees, ensemble_seed)?;
        let forest = train_ensemble(&train, &forest_params, config.trees, ensemble_seed)?;
        Ok((evaluate(&bag, &test.x)?, evaluate(&forest, &test.x)?))
    };
    let partials: Vec<(MethodRun, MethodRun)> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<_>>()
    })?;

    let mut bag_acc = RunAccumulator::new(signal.clone(), test.y.clone(), config.trees)?;
    let mut forest_acc = RunAccumulator::new(signal, test.y.clone(), config.trees)?;
    for (bag_run, forest_run) in &partials {
        bag_acc.accumulate_run(&bag_run.preds, &bag_run.stats)?;
        forest_acc.accumulate_run(&forest_run.preds, &forest_run.stats)?;
    }

    let comparison = compare(&bag_acc, &forest_acc, spec.sigma_eps)?;
    let row = ReportRow {
        preset: config.label.clone(),
        sigma_f: spec.sigma_f,
        sigma_eps: spec.sigma_eps,
        bias_sq_bag: comparison.bagging.bias_sq,
        bias_sq_forest: comparison.forest.bias_sq,
        var_bag: comparison.bagging.variance,
        var_forest: comparison.forest.variance,
        tree_var_bag: comparison.bagging.tree_variance,
        tree_var_forest: comparison.forest.tree_variance,
        corr_bag: comparison.bagging.pairwise_correlation,
        corr_forest: comparison.forest.pairwise_correlation,
        irreducible: bag_acc.empirical_noise(),
        mse_bag: comparison.bagging.mse_empirical,
        mse_forest: comparison.forest.mse_empirical,
        t_statistic: comparison.t_statistic,
        delta_r_percent: comparison.delta_r_percent,
    };
    Ok(ExperimentOutput {
        row,
        comparison,
        bagging: bag_acc,
        forest: forest_acc,
        test_x: test.x,
        spec,
    })
}

/// Regenerates the training dataset of replicate `w` — the exact bytes both
/// methods trained on.
pub fn training_dataset(config: &ExperimentConfig, w: usize) -> Result<Dataset> {
    config.validate()?;
    let spec = DgpSpec::resolve(
        config.model,
        config.law,
        config.p_total,
        config.snr,
        config.normalized,
        DEFAULT_CALIB_N,
        subseed(config.master_seed, "calibrate", &[]),
    )?;
    spec.generate(config.n, subseed(config.master_seed, "train", &[w as u64]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Irrelevant,
    Rho,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "irrelevant" => Ok(SweepKind::Irrelevant),
            "rho" => Ok(SweepKind::Rho),
            other => Err(Error::invalid(format!(
                "unknown sweep kind `{other}` (expected irrelevant or rho)"
            ))),
        }
    }
}

/// Per-grid-point summary, convenient for plotting.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub value: f64,
    pub delta_r_percent: f64,
    pub bias_sq_bag: f64,
    pub bias_sq_forest: f64,
    pub var_bag: f64,
    pub var_forest: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<ReportRow>,
    pub curve: Vec<CurvePoint>,
}

/// Runs one full paired experiment per grid value. `Irrelevant` grids list
/// counts of appended irrelevant covariates; `Rho` grids list pairwise
/// correlations (the covariate law becomes equicorrelated normal).
pub fn run_sweep(kind: SweepKind, base: &ExperimentConfig, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid must be nonempty"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut curve = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut config = base.clone();
        match kind {
            SweepKind::Irrelevant => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!(
                        "irrelevant-covariate count must be a nonnegative integer, got {value}"
                    )));
                }
                config.p_total = base.model.relevant_count() + value as usize;
                config.label = format!("{}/irr{}", base.label, value as usize);
            }
            SweepKind::Rho => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::invalid(format!(
                        "rho must lie in [0, 1], got {value}"
                    )));
                }
                config.law = CovariateLaw::EquicorrelatedNormal { rho: value };
                config.label = format!("{}/rho{}", base.label, value);
            }
        }
        let output = run_experiment(&config)?;
        curve.push(CurvePoint {
            value,
            delta_r_percent: output.row.delta_r_percent,
            bias_sq_bag: output.row.bias_sq_bag,
            bias_sq_forest: output.row.bias_sq_forest,
            var_bag: output.row.var_bag,
            var_forest: output.row.var_forest,
        });
        rows.push(output.row);
    }
    Ok(SweepResult { rows, curve })
}

/// Binned conditional differences along one covariate of the test set
/// (`covariate_index` is 0-based).
pub fn figure_data(
    output: &ExperimentOutput,
    covariate_index: usize,
    bins: usize,
) -> Result<Vec<SliceBin>> {
    if covariate_index >= output.test_x.cols() {
        return Err(Error::invalid(format!(
            "covariate index {covariate_index} out of range (p = {})",
            output.test_x.cols()
        )));
    }
    let values = output.test_x.column(covariate_index);
    conditional_slice(&output.bagging, &output.forest, &values, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn smoke_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(RegressionFn::Mars, CovariateLaw::IidUniform01);
        c.label = "smoke".into();
        c.n = 10;
        c.runs = 2;
        c.trees = 1;
        c.test_size = 20;
        c.workers = 1;
        c
    }

    #[test]
    fn mtry_rules_resolve_with_floor_one() {
        assert_eq!(MtryRule::ThirdOfP.resolve(5), 1);
        assert_eq!(MtryRule::ThirdOfP.resolve(6), 2);
        assert_eq!(MtryRule::ThirdOfP.resolve(30), 10);
        assert_eq!(MtryRule::ThirdOfP.resolve(2), 1);
        assert_eq!(MtryRule::HalfOfP.resolve(2), 1);
        assert_eq!(MtryRule::HalfOfP.resolve(5), 2);
        assert_eq!("p/3".parse::<MtryRule>().unwrap(), MtryRule::ThirdOfP);
        assert_eq!("p/2".parse::<MtryRule>().unwrap(), MtryRule::HalfOfP);
        assert_eq!("4".parse::<MtryRule>().unwrap(), MtryRule::Fixed(4));
        assert!("p/4".parse::<MtryRule>().is_err());
    }

    #[test]
    fn validation_names_the_bad_field() {
        let mut c = smoke_config();
        c.snr = -1.0;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("snr"), "{err}");
        let mut c = smoke_config();
        c.p_total = 2;
        assert!(c.validate().unwrap_err().to_string().contains("p_total"));
        let mut c = smoke_config();
        c.runs = 0;
        assert!(c.validate().unwrap_err().to_string().contains("W"));
        let mut c = smoke_config();
        c.mtry_forest = MtryRule::Fixed(99);
        assert!(c.validate().unwrap_err().to_string().contains("mtry_forest"));
    }

    #[test]
    fn smoke_experiment_completes_and_splits_exactly() {
        let output = run_experiment(&smoke_config()).unwrap();
        assert_eq!(output.bagging.runs(), 2);
        // exact split: bias^2 + variance == grand mean squared signal error,
        // checked through the plugin identity
        for report in [&output.comparison.bagging, &output.comparison.forest] {
            assert_eq!(
                report.mse_plugin,
                report.bias_sq + report.variance + report.irreducible
            );
            assert!(report.bias_sq.is_finite() && report.variance >= -1e-12);
        }
        // B = 1: diagnostics are undefined
        assert!(output.row.tree_var_bag.is_nan());
        assert!(output.row.corr_forest.is_nan());
    }

    #[test]
    fn training_data_is_shared_between_methods() {
        let config = smoke_config();
        let a = training_dataset(&config, 1).unwrap();
        let b = training_dataset(&config, 1).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = training_dataset(&config, 2).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut config = smoke_config();
        config.runs = 4;
        config.trees = 3;
        config.workers = 1;
        let one = run_experiment(&config).unwrap();
        config.workers = 4;
        let four = run_experiment(&config).unwrap();
        assert_eq!(one.row.mse_bag.to_bits(), four.row.mse_bag.to_bits());
        assert_eq!(one.row.mse_forest.to_bits(), four.row.mse_forest.to_bits());
        assert_eq!(
            one.row.delta_r_percent.to_bits(),
            four.row.delta_r_percent.to_bits()
        );
    }

    #[test]
    fn sweep_validates_grids() {
        let base = smoke_config();
        assert!(run_sweep(SweepKind::Rho, &base, &[]).is_err());
        assert!(run_sweep(SweepKind::Rho, &base, &[1.5]).is_err());
        assert!(run_sweep(SweepKind::Irrelevant, &base, &[-1.0]).is_err());
        assert!(run_sweep(SweepKind::Irrelevant, &base, &[1.5]).is_err());
    }

    #[test]
    fn irrelevant_sweep_adjusts_p_total() {
        let mut base = smoke_config();
        base.trees = 2;
        let result = run_sweep(SweepKind::Irrelevant, &base, &[1.0, 4.0]).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.curve[0].value, 1.0);
        assert!(result.rows[0].preset.ends_with("irr1"));
        assert!(result.rows[1].preset.ends_with("irr4"));
    }

    #[test]
    fn figure_data_covers_identical_methods_with_zeros() {
        // forest with mtry = p is bagging: every conditional difference is 0
        let mut config = smoke_config();
        config.trees = 2;
        config.runs = 3;
        config.test_size = 40;
        config.mtry_forest = MtryRule::Fixed(5);
        let output = run_experiment(&config).unwrap();
        assert_eq!(output.row.delta_r_percent, 0.0);
        for bin in figure_data(&output, 2, 4).unwrap() {
            assert_eq!(bin.d_mse, 0.0);
            assert_eq!(bin.d_bias_sq, 0.0);
            assert_eq!(bin.d_var, 0.0);
        }
        assert!(figure_data(&output, 7, 4).is_err());
    }

    #[test]
    fn plugin_and_empirical_mse_agree_at_smoke_scale() {
        let mut config = smoke_config();
        config.runs = 8;
        config.trees = 4;
        config.n = 60;
        config.test_size = 400;
        let output = run_experiment(&config).unwrap();
        let report = &output.comparison.bagging;
        let gap = (report.mse_plugin - report.mse_empirical).abs() / report.mse_empirical;
        assert!(gap < 0.25, "plugin/empirical gap {gap}");
        assert_abs_diff_eq!(
            output.row.irreducible,
            report.irreducible,
            epsilon = report.irreducible * 0.3
        );
    }
}

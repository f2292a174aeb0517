//! Unconditional MSE decompositions, tree-level dispersion diagnostics, and
//! paired comparison statistics, all fed by streaming per-point accumulators.
//!
//! Conventions, fixed here and relied on by the tests:
//!
//! - Per-point variances over training replicates use the population divisor
//!   `W`, which makes `bias^2 + variance` an exact algebraic split of the
//!   mean squared signal error. The sample divisor `W - 1` appears only in
//!   the paired t statistic.
//! - The cross-moment `E[T1 T2]` of two trees at a point is estimated by the
//!   all-pairs U-statistic `(S^2 - Q) / (B (B - 1))` per replicate, where `S`
//!   and `Q` are the within-replicate sum and sum of squares of tree
//!   predictions — same estimand as using the first two trees, far less
//!   noise, and it streams.
//! - At points where the pooled tree variance vanishes the pairwise
//!   correlation is defined as 1 (constant trees are perfectly correlated);
//!   such points are counted in the diagnostics. Estimated correlations are
//!   clamped to `[-1, 1]` and clamping is counted too.

use serde::Serialize;

use crate::error::{Error, Result};

/// Streaming sufficient statistics for one method over `W` training
/// replicates, evaluated on a fixed test set of `J` points. Everything a
/// report needs is summed in place; per-tree predictions are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAccumulator {
    signal: Vec<f64>,
    response: Vec<f64>,
    trees_per_run: usize,
    runs: usize,
    sum_p: Vec<f64>,
    sum_p2: Vec<f64>,
    sum_sqerr: Vec<f64>,
    sum_s: Vec<f64>,
    sum_q: Vec<f64>,
    sum_s2: Vec<f64>,
    mse_runs: Vec<f64>,
}

/// Per-point conditional quantities derived from an accumulator.
#[derive(Debug, Clone, Copy)]
pub struct PointProfile {
    /// `mean_w (y_j - p_wj)^2`
    pub cond_mse: f64,
    /// `f_j - mean_w p_wj`
    pub bias: f64,
    /// population variance of `p_wj` over replicates
    pub variance: f64,
}

impl RunAccumulator {
    /// `signal[j]` is the noiseless regression value at test point `j`,
    /// `response[j]` the observed noisy value; both are fixed for the life of
    /// the accumulator. `trees_per_run` is the ensemble size `B`.
    pub fn new(signal: Vec<f64>, response: Vec<f64>, trees_per_run: usize) -> Result<Self> {
        if signal.is_empty() || signal.len() != response.len() {
            return Err(Error::invalid(format!(
                "test vectors must be nonempty and equal-length ({} vs {})",
                signal.len(),
                response.len()
            )));
        }
        if trees_per_run == 0 {
            return Err(Error::invalid("trees_per_run must be at least 1"));
        }
        let j = signal.len();
        Ok(RunAccumulator {
            signal,
            response,
            trees_per_run,
            runs: 0,
            sum_p: vec![0.0; j],
            sum_p2: vec![0.0; j],
            sum_sqerr: vec![0.0; j],
            sum_s: vec![0.0; j],
            sum_q: vec![0.0; j],
            sum_s2: vec![0.0; j],
            mse_runs: Vec::new(),
        })
    }

    pub fn num_points(&self) -> usize {
        self.signal.len()
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn trees_per_run(&self) -> usize {
        self.trees_per_run
    }

    /// Per-replicate test MSEs, in accumulation order.
    pub fn mse_runs(&self) -> &[f64] {
        &self.mse_runs
    }

    /// Folds in one training replicate: `ensemble_preds[j]` is the ensemble
    /// prediction at test point `j`, `per_tree_stats[j]` the pair
    /// `(sum, sum of squares)` of that replicate's tree predictions there.
    pub fn accumulate_run(
        &mut self,
        ensemble_preds: &[f64],
        per_tree_stats: &[(f64, f64)],
    ) -> Result<()> {
        let j = self.num_points();
        if ensemble_preds.len() != j || per_tree_stats.len() != j {
            return Err(Error::invalid(format!(
                "expected {j} test points, got {} predictions and {} tree stats",
                ensemble_preds.len(),
                per_tree_stats.len()
            )));
        }
        let mut sqerr_total = 0.0;
        for k in 0..j {
            let p = ensemble_preds[k];
            let (s, q) = per_tree_stats[k];
            let err = self.response[k] - p;
            self.sum_p[k] += p;
            self.sum_p2[k] += p * p;
            self.sum_sqerr[k] += err * err;
            self.sum_s[k] += s;
            self.sum_q[k] += q;
            self.sum_s2[k] += s * s;
            sqerr_total += err * err;
        }
        self.mse_runs.push(sqerr_total / j as f64);
        self.runs += 1;
        Ok(())
    }

    /// Field-wise merge of an accumulator over a disjoint set of replicates;
    /// `other`'s replicates are appended after `self`'s.
    pub fn merge(&mut self, other: &RunAccumulator) -> Result<()> {
        if self.signal != other.signal
            || self.response != other.response
            || self.trees_per_run != other.trees_per_run
        {
            return Err(Error::invalid(
                "accumulators disagree on test set or ensemble size",
            ));
        }
        for k in 0..self.num_points() {
            self.sum_p[k] += other.sum_p[k];
            self.sum_p2[k] += other.sum_p2[k];
            self.sum_sqerr[k] += other.sum_sqerr[k];
            self.sum_s[k] += other.sum_s[k];
            self.sum_q[k] += other.sum_q[k];
            self.sum_s2[k] += other.sum_s2[k];
        }
        self.mse_runs.extend_from_slice(&other.mse_runs);
        self.runs += other.runs;
        Ok(())
    }

    /// Grand mean over replicates and points of `(y_j - p_wj)^2` — the
    /// headline empirical test MSE.
    pub fn empirical_mse(&self) -> Result<f64> {
        if self.runs == 0 {
            return Err(Error::invalid("accumulator holds no replicates"));
        }
        let total: f64 = self.sum_sqerr.iter().sum();
        Ok(total / (self.runs * self.num_points()) as f64)
    }

    /// Mean over the test set of `(y_j - f_j)^2`, the empirical counterpart
    /// of the irreducible error.
    pub fn empirical_noise(&self) -> f64 {
        let total: f64 = self
            .response
            .iter()
            .zip(&self.signal)
            .map(|(y, f)| (y - f) * (y - f))
            .sum();
        total / self.num_points() as f64
    }

    pub fn point_profiles(&self) -> Result<Vec<PointProfile>> {
        if self.runs < 2 {
            return Err(Error::invalid(
                "conditional decomposition needs at least 2 replicates",
            ));
        }
        let w = self.runs as f64;
        Ok((0..self.num_points())
            .map(|k| {
                let mean_p = self.sum_p[k] / w;
                PointProfile {
                    cond_mse: self.sum_sqerr[k] / w,
                    bias: self.signal[k] - mean_p,
                    variance: self.sum_p2[k] / w - mean_p * mean_p,
                }
            })
            .collect())
    }

    /// Bias–variance decomposition conditioning on the test point first:
    /// squared bias and variance are computed per point over replicates,
    /// then averaged over the test set. `mse_plugin` is their sum plus
    /// `sigma_eps^2` exactly; `mse_empirical` is measured against the noisy
    /// test responses.
    pub fn decompose(&self, sigma_eps: f64) -> Result<DecompositionReport> {
        let profiles = self.point_profiles()?;
        let j = profiles.len() as f64;
        let bias_sq = profiles.iter().map(|p| p.bias * p.bias).sum::<f64>() / j;
        let variance = profiles.iter().map(|p| p.variance).sum::<f64>() / j;
        let irreducible = sigma_eps * sigma_eps;
        let diag = if self.trees_per_run >= 2 {
            self.tree_diagnostics()?
        } else {
            TreeDiagnostics {
                tree_variance: f64::NAN,
                pairwise_correlation: f64::NAN,
                correlation_ratio_of_averages: f64::NAN,
                degenerate_points: 0,
                clamped_points: 0,
            }
        };
        Ok(DecompositionReport {
            bias_sq,
            variance,
            tree_variance: diag.tree_variance,
            pairwise_correlation: diag.pairwise_correlation,
            irreducible,
            mse_empirical: self.empirical_mse()?,
            mse_plugin: bias_sq + variance + irreducible,
        })
    }

    /// Average individual-tree variance and pairwise correlation over the
    /// test set, pooling all `W x B` tree predictions per point.
    pub fn tree_diagnostics(&self) -> Result<TreeDiagnostics> {
        if self.runs < 2 {
            return Err(Error::invalid("tree diagnostics need at least 2 replicates"));
        }
        let b = self.trees_per_run;
        if b < 2 {
            return Err(Error::invalid(
                "pairwise correlation needs at least 2 trees per replicate",
            ));
        }
        let w = self.runs as f64;
        let pool = w * b as f64;
        let pairs = b as f64 * (b as f64 - 1.0);
        let mut var_sum = 0.0;
        let mut corr_sum = 0.0;
        let mut cov_sum = 0.0;
        let mut degenerate = 0usize;
        let mut clamped = 0usize;
        for k in 0..self.num_points() {
            let mean_t = self.sum_s[k] / pool;
            let second = self.sum_q[k] / pool;
            let tree_var = second - mean_t * mean_t;
            let cross = (self.sum_s2[k] - self.sum_q[k]) / (w * pairs);
            let cov = cross - mean_t * mean_t;
            var_sum += tree_var;
            cov_sum += cov;
            // numerically-zero variance: constant trees, correlation 1
            if tree_var <= second.abs() * 1e-12 {
                degenerate += 1;
                corr_sum += 1.0;
            } else {
                let corr = cov / tree_var;
                if !(-1.0..=1.0).contains(&corr) {
                    clamped += 1;
                }
                corr_sum += corr.clamp(-1.0, 1.0);
            }
        }
        let j = self.num_points() as f64;
        let mean_var = var_sum / j;
        Ok(TreeDiagnostics {
            tree_variance: mean_var,
            pairwise_correlation: corr_sum / j,
            correlation_ratio_of_averages: if mean_var.abs() > 0.0 {
                (cov_sum / j) / mean_var
            } else {
                1.0
            },
            degenerate_points: degenerate,
            clamped_points: clamped,
        })
    }
}

/// One method's bias–variance picture.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecompositionReport {
    pub bias_sq: f64,
    pub variance: f64,
    /// Mean over the test set of the pooled individual-tree variance
    /// (NaN when the ensembles had a single tree).
    pub tree_variance: f64,
    /// Mean over the test set of the per-point pairwise tree correlation
    /// (NaN when the ensembles had a single tree).
    pub pairwise_correlation: f64,
    /// `sigma_eps^2`, the known noise floor.
    pub irreducible: f64,
    pub mse_empirical: f64,
    /// `bias_sq + variance + irreducible`, exact by construction.
    pub mse_plugin: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeDiagnostics {
    pub tree_variance: f64,
    /// Mean over points of the per-point correlation (the reported figure).
    pub pairwise_correlation: f64,
    /// Alternative ratio-of-averages estimate, kept for diagnostics.
    pub correlation_ratio_of_averages: f64,
    /// Points where the pooled tree variance was numerically zero.
    pub degenerate_points: usize,
    /// Points where the estimated correlation fell outside `[-1, 1]`.
    pub clamped_points: usize,
}

/// Bias–variance decomposition conditioning on the fitted model first:
/// `errors[w][j] = f_j - p_wj`. Per replicate, the mean error and the
/// population variance of errors over the test set; both averaged over
/// replicates. Returns `(bias_sq, variance)`.
pub fn decompose_conditional_on_fhat(errors: &[Vec<f64>]) -> Result<(f64, f64)> {
    if errors.is_empty() {
        return Err(Error::invalid("error matrix has no replicates"));
    }
    let j = errors[0].len();
    if j < 2 {
        return Err(Error::invalid(
            "conditional-on-model decomposition needs at least 2 test points",
        ));
    }
    if errors.iter().any(|row| row.len() != j) {
        return Err(Error::invalid("ragged error matrix"));
    }
    let mut bias_sq = 0.0;
    let mut variance = 0.0;
    for row in errors {
        let mean = row.iter().sum::<f64>() / j as f64;
        let var = row.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / j as f64;
        bias_sq += mean * mean;
        variance += var;
    }
    let w = errors.len() as f64;
    Ok((bias_sq / w, variance / w))
}

/// Relative gap in the large-B variance identity
/// `variance ~= correlation x tree variance`, using the test-set-averaged
/// quantities of the report. Exact only pointwise; averaged over points it
/// is a diagnostic, not an invariant.
pub fn decorrelation_identity_gap(report: &DecompositionReport) -> Result<f64> {
    if report.variance == 0.0 {
        return Err(Error::Degenerate(
            "zero ensemble variance, identity gap undefined".into(),
        ));
    }
    Ok((report.variance - report.pairwise_correlation * report.tree_variance).abs()
        / report.variance)
}

/// Percentage relative MSE difference, `100 (mse_bag - mse_forest) / mse_forest`.
pub fn relative_difference(mse_bag: f64, mse_forest: f64) -> Result<f64> {
    if !(mse_forest > 0.0) {
        return Err(Error::invalid(format!(
            "relative difference needs a positive denominator, got {mse_forest}"
        )));
    }
    Ok(100.0 * (mse_bag - mse_forest) / mse_forest)
}

#[derive(Debug, Clone, Copy)]
pub struct PairedT {
    pub t: f64,
    pub mean: f64,
    /// Sample standard deviation (divisor `W - 1`).
    pub std: f64,
}

/// t statistic for per-replicate differences: `mean / (std / sqrt(W))`.
pub fn paired_t(z: &[f64]) -> Result<PairedT> {
    let w = z.len();
    if w < 2 {
        return Err(Error::invalid("paired t needs at least 2 replicates"));
    }
    let mean = z.iter().sum::<f64>() / w as f64;
    let ss: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = (ss / (w - 1) as f64).sqrt();
    if std == 0.0 {
        return Err(Error::Degenerate(
            "per-replicate differences have zero spread".into(),
        ));
    }
    Ok(PairedT {
        t: mean / (std / (w as f64).sqrt()),
        mean,
        std,
    })
}

/// Paired comparison of two methods evaluated on the same replicates.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub bagging: DecompositionReport,
    pub forest: DecompositionReport,
    pub delta_r_percent: f64,
    /// NaN when the per-replicate differences are all equal (see
    /// `t_degenerate`).
    pub t_statistic: f64,
    pub t_degenerate: bool,
    pub z_bar: f64,
    pub z_std: f64,
    pub runs: usize,
}

pub fn compare(
    bagging: &RunAccumulator,
    forest: &RunAccumulator,
    sigma_eps: f64,
) -> Result<ComparisonReport> {
    if bagging.runs() != forest.runs() {
        return Err(Error::invalid(format!(
            "paired comparison needs equal replicate counts, got {} and {}",
            bagging.runs(),
            forest.runs()
        )));
    }
    let z: Vec<f64> = bagging
        .mse_runs()
        .iter()
        .zip(forest.mse_runs())
        .map(|(b, f)| b - f)
        .collect();
    let (t_statistic, t_degenerate, z_bar, z_std) = match paired_t(&z) {
        Ok(pt) => (pt.t, false, pt.mean, pt.std),
        Err(Error::Degenerate(_)) => {
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            (f64::NAN, true, mean, 0.0)
        }
        Err(e) => return Err(e),
    };
    let bag_report = bagging.decompose(sigma_eps)?;
    let forest_report = forest.decompose(sigma_eps)?;
    Ok(ComparisonReport {
        delta_r_percent: relative_difference(
            bag_report.mse_empirical,
            forest_report.mse_empirical,
        )?,
        bagging: bag_report,
        forest: forest_report,
        t_statistic,
        t_degenerate,
        z_bar,
        z_std,
        runs: bagging.runs(),
    })
}

/// One equal-count quantile bin of per-point conditional differences.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub bin_mid: f64,
    /// bagging minus forest, conditional MSE
    pub d_mse: f64,
    /// bagging minus forest, conditional squared bias
    pub d_bias_sq: f64,
    /// bagging minus forest, conditional variance
    pub d_var: f64,
    pub count: usize,
}

/// Bins the per-point conditional differences between two methods by a
/// covariate's test-set values, using equal-count quantile bins.
pub fn conditional_slice(
    bagging: &RunAccumulator,
    forest: &RunAccumulator,
    covariate_values: &[f64],
    bins: usize,
) -> Result<Vec<SliceBin>> {
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    let j = bagging.num_points();
    if forest.num_points() != j || covariate_values.len() != j {
        return Err(Error::invalid(
            "covariate values must match the accumulators' test set",
        ));
    }
    let mut distinct: Vec<f64> = covariate_values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < bins {
        return Err(Error::invalid(format!(
            "only {} distinct covariate values for {} bins",
            distinct.len(),
            bins
        )));
    }

    let bag = bagging.point_profiles()?;
    let forest_p = forest.point_profiles()?;
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| covariate_values[a].total_cmp(&covariate_values[b]));

    let mut out = Vec::with_capacity(bins);
    for bin in 0..bins {
        let start = bin * j / bins;
        let end = (bin + 1) * j / bins;
        let members = &order[start..end];
        let count = members.len();
        let mut d_mse = 0.0;
        let mut d_bias_sq = 0.0;
        let mut d_var = 0.0;
        for &idx in members {
            d_mse += bag[idx].cond_mse - forest_p[idx].cond_mse;
            d_bias_sq += bag[idx].bias * bag[idx].bias - forest_p[idx].bias * forest_p[idx].bias;
            d_var += bag[idx].variance - forest_p[idx].variance;
        }
        let low = covariate_values[members[0]];
        let high = covariate_values[members[count - 1]];
        out.push(SliceBin {
            bin_low: low,
            bin_high: high,
            bin_mid: 0.5 * (low + high),
            d_mse: d_mse / count as f64,
            d_bias_sq: d_bias_sq / count as f64,
            d_var: d_var / count as f64,
            count,
        });
    }
    Ok(out)
}

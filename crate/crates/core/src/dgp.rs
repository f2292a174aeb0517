//! Data-generating processes: covariate laws, benchmark regression functions,
//! signal normalization, and SNR-controlled noise.
//!
//! A resolved [`DgpSpec`] fixes everything needed to simulate: the regression
//! function, the covariate law, the total covariate count (relevant ones
//! first, any appended ones are irrelevant by construction), the
//! signal-to-noise ratio, and the calibrated signal scale `sigma_f`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::substream;

/// Benchmark regression functions. Each reads only its first
/// `relevant_count` coordinates, so covariates appended beyond that count
/// leave the conditional mean unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionFn {
    /// Sum of the first five coordinates.
    Linear,
    /// Friedman's benchmark: `10 sin(pi x1 x2) + 20 (x3 - 0.05)^2 + 10 x4 + 5 x5`.
    Mars,
    /// A narrow jump: `x1 - 1(0.6 <= x2 <= 0.65)`.
    Hidden,
}

impl RegressionFn {
    pub fn relevant_count(self) -> usize {
        match self {
            RegressionFn::Linear | RegressionFn::Mars => 5,
            RegressionFn::Hidden => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegressionFn::Linear => "linear",
            RegressionFn::Mars => "mars",
            RegressionFn::Hidden => "hidden",
        }
    }

    /// Raw (un-normalized) function value.
    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() < self.relevant_count() {
            return Err(Error::invalid(format!(
                "{} needs at least {} covariates, got {}",
                self.name(),
                self.relevant_count(),
                x.len()
            )));
        }
        Ok(match self {
            RegressionFn::Linear => x[0] + x[1] + x[2] + x[3] + x[4],
            RegressionFn::Mars => {
                10.0 * (PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.05) * (x[2] - 0.05)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            // the jump interval is closed on both ends
            RegressionFn::Hidden => x[0] - if x[1] >= 0.6 && x[1] <= 0.65 { 1.0 } else { 0.0 },
        })
    }
}

impl std::str::FromStr for RegressionFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(RegressionFn::Linear),
            "mars" => Ok(RegressionFn::Mars),
            "hidden" => Ok(RegressionFn::Hidden),
            other => Err(Error::invalid(format!(
                "unknown model `{other}` (expected linear, mars, or hidden)"
            ))),
        }
    }
}

/// Covariate sampling law, applied i.i.d. across rows.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum CovariateLaw {
    /// Each coordinate uniform on `[0, 1)`.
    IidUniform01,
    /// Each coordinate standard normal.
    IidStandardNormal,
    /// Jointly normal coordinates with unit variances and a common pairwise
    /// correlation `rho`, built by the single-factor construction
    /// `x_j = sqrt(rho) z0 + sqrt(1 - rho) z_j`. Exact for every
    /// `rho in [0, 1]`, including the singular boundary `rho = 1` where all
    /// coordinates coincide.
    EquicorrelatedNormal { rho: f64 },
}

impl CovariateLaw {
    pub fn validate(&self) -> Result<()> {
        if let CovariateLaw::EquicorrelatedNormal { rho } = self {
            if !(0.0..=1.0).contains(rho) || rho.is_nan() {
                return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            CovariateLaw::IidUniform01 => "uniform",
            CovariateLaw::IidStandardNormal => "normal",
            CovariateLaw::EquicorrelatedNormal { .. } => "equicorrelated",
        }
    }

    fn fill_row(&self, rng: &mut ChaCha8Rng, row: &mut [f64]) {
        match *self {
            CovariateLaw::IidUniform01 => {
                for v in row.iter_mut() {
                    *v = rng.gen::<f64>();
                }
            }
            CovariateLaw::IidStandardNormal => {
                for v in row.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            CovariateLaw::EquicorrelatedNormal { rho } => {
                let shared = rho.sqrt();
                let own = (1.0 - rho).sqrt();
                let z0: f64 = rng.sample(StandardNormal);
                for v in row.iter_mut() {
                    let zj: f64 = rng.sample(StandardNormal);
                    *v = shared * z0 + own * zj;
                }
            }
        }
    }
}

/// Draws an `n x p` covariate matrix from `law`.
pub fn sample_covariates(law: &CovariateLaw, n: usize, p: usize, seed: u64) -> Result<Matrix> {
    law.validate()?;
    if n == 0 || p == 0 {
        return Err(Error::invalid("covariate matrix needs n >= 1 and p >= 1"));
    }
    let mut rng = substream(seed, "covariates", &[]);
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        law.fill_row(&mut rng, x.row_mut(i));
    }
    Ok(x)
}

/// Sample standard deviation of `f` over `calib_n` covariate draws
/// (divisor `calib_n - 1`).
pub fn estimate_sigma_f(
    f: RegressionFn,
    law: &CovariateLaw,
    p_total: usize,
    calib_n: usize,
    seed: u64,
) -> Result<f64> {
    law.validate()?;
    if calib_n < 10_000 {
        return Err(Error::invalid(format!(
            "calibration needs at least 10,000 draws, got {calib_n}"
        )));
    }
    if p_total < f.relevant_count() {
        return Err(Error::invalid(format!(
            "p_total {} below the {} relevant covariates of {}",
            p_total,
            f.relevant_count(),
            f.name()
        )));
    }
    let mut rng = substream(seed, "calibrate", &[]);
    let mut row = vec![0.0; p_total];
    // Welford, single pass
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..calib_n {
        law.fill_row(&mut rng, &mut row);
        let v = f.eval(&row)?;
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (calib_n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Degenerate(format!(
            "{} has zero sample variance under {}",
            f.name(),
            law.name()
        )));
    }
    Ok(var.sqrt())
}

/// A fully resolved data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub f: RegressionFn,
    pub law: CovariateLaw,
    pub p_total: usize,
    pub snr: f64,
    pub normalized: bool,
    /// Calibrated standard deviation of the raw signal `f(X)`.
    pub sigma_f: f64,
    /// Noise standard deviation implied by the SNR: `1/sqrt(snr)` when
    /// normalized, `sigma_f/sqrt(snr)` otherwise.
    pub sigma_eps: f64,
}

/// Default calibration sample size for `sigma_f`.
pub const DEFAULT_CALIB_N: usize = 100_000;

impl DgpSpec {
    /// Calibrates `sigma_f` and fixes the noise scale for the requested SNR.
    pub fn resolve(
        f: RegressionFn,
        law: CovariateLaw,
        p_total: usize,
        snr: f64,
        normalized: bool,
        calib_n: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::invalid(format!("snr must be positive, got {snr}")));
        }
        let sigma_f = estimate_sigma_f(f, &law, p_total, calib_n, seed)?;
        let effective = if normalized { 1.0 } else { sigma_f };
        Ok(DgpSpec {
            f,
            law,
            p_total,
            snr,
            normalized,
            sigma_f,
            sigma_eps: effective / snr.sqrt(),
        })
    }

    /// Noiseless regression value at `x`, with normalization applied.
    pub fn signal(&self, x: &[f64]) -> Result<f64> {
        let raw = self.f.eval(x)?;
        Ok(if self.normalized { raw / self.sigma_f } else { raw })
    }

    /// Simulates a dataset of size `n`. Covariates and noise come from
    /// independent sub-streams of `seed`, so either can be regenerated or
    /// resized without disturbing the other.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::invalid("dataset size must be at least 1"));
        }
        let mut x_rng = substream(seed, "x", &[]);
        let mut eps_rng = substream(seed, "eps", &[]);
        let mut x = Matrix::zeros(n, self.p_total);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            self.law.fill_row(&mut x_rng, x.row_mut(i));
            let z: f64 = eps_rng.sample(StandardNormal);
            y.push(self.signal(x.row(i))? + self.sigma_eps * z);
        }
        Ok(Dataset { x, y })
    }
}

/// A simulated regression sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// SHA-256 over the raw bytes of `x` and `y`; two datasets with equal
    /// digests are bit-identical.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.p() as u64).to_le_bytes());
        for v in self.x.as_slice() {
            h.update(v.to_le_bytes());
        }
        for v in &self.y {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LINEAR_SIGMA: f64 = 2.236_067_977_499_79; // sqrt(5)
    const HIDDEN_SIGMA: f64 = 0.361_708_906_903_511_76; // sqrt(1/12 + 0.05*0.95)
    const MARS_SIGMA: f64 = 7.129_268_109_096_543; // quadrature over [0,1]^5

    #[test]
    fn eval_matches_hand_values() {
        assert_eq!(
            RegressionFn::Linear.eval(&[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap(),
            5.0
        );
        // indicator active: 0.5 - 1
        assert_eq!(RegressionFn::Hidden.eval(&[0.5, 0.62]).unwrap(), -0.5);
        // interval is closed at both endpoints
        assert_eq!(RegressionFn::Hidden.eval(&[0.0, 0.6]).unwrap(), -1.0);
        assert_eq!(RegressionFn::Hidden.eval(&[0.0, 0.65]).unwrap(), -1.0);
        assert_eq!(RegressionFn::Hidden.eval(&[0.0, 0.66]).unwrap(), 0.0);
        // 10 sin(0) + 20 (0 - 0.05)^2 = 0.05
        assert_abs_diff_eq!(
            RegressionFn::Mars.eval(&[0.0; 5]).unwrap(),
            0.05,
            epsilon = 1e-15
        );
    }

    #[test]
    fn eval_rejects_short_input() {
        assert!(RegressionFn::Linear.eval(&[1.0, 2.0]).is_err());
        assert!(RegressionFn::Hidden.eval(&[1.0]).is_err());
    }

    #[test]
    fn extra_covariates_are_ignored() {
        let mut x = vec![0.3, 0.7, 0.1, 0.9, 0.4, 0.0, 0.0];
        let base = RegressionFn::Mars.eval(&x).unwrap();
        x[5] = 123.0;
        x[6] = -7.0;
        assert_eq!(RegressionFn::Mars.eval(&x).unwrap(), base);
    }

    #[test]
    fn sigma_f_linear_matches_analytic() {
        let est = estimate_sigma_f(
            RegressionFn::Linear,
            &CovariateLaw::IidStandardNormal,
            5,
            200_000,
            11,
        )
        .unwrap();
        assert_abs_diff_eq!(est, LINEAR_SIGMA, epsilon = 0.02);
    }

    #[test]
    fn sigma_f_hidden_matches_analytic() {
        let est = estimate_sigma_f(
            RegressionFn::Hidden,
            &CovariateLaw::IidUniform01,
            2,
            200_000,
            11,
        )
        .unwrap();
        assert_abs_diff_eq!(est, HIDDEN_SIGMA, epsilon = 0.005);
    }

    #[test]
    fn sigma_f_mars_matches_quadrature() {
        let est = estimate_sigma_f(
            RegressionFn::Mars,
            &CovariateLaw::IidUniform01,
            5,
            1_000_000,
            11,
        )
        .unwrap();
        assert_abs_diff_eq!(est, MARS_SIGMA, epsilon = 0.02);
        // ballpark of the commonly reported estimate
        assert_abs_diff_eq!(est, 7.11, epsilon = 0.1);
    }

    #[test]
    fn sigma_f_validates_inputs() {
        assert!(estimate_sigma_f(
            RegressionFn::Linear,
            &CovariateLaw::IidUniform01,
            5,
            100,
            0
        )
        .is_err());
        assert!(estimate_sigma_f(
            RegressionFn::Linear,
            &CovariateLaw::IidUniform01,
            3,
            10_000,
            0
        )
        .is_err());
    }

    #[test]
    fn equicorrelated_rho_one_collapses_rows() {
        let law = CovariateLaw::EquicorrelatedNormal { rho: 1.0 };
        let x = sample_covariates(&law, 50, 4, 3).unwrap();
        for i in 0..50 {
            let row = x.row(i);
            for j in 1..4 {
                assert_eq!(row[j], row[0]);
            }
        }
    }

    fn column_correlation(x: &Matrix, a: usize, b: usize) -> f64 {
        let n = x.rows() as f64;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.rows() {
            let (u, v) = (x.get(i, a), x.get(i, b));
            sa += u;
            sb += v;
            saa += u * u;
            sbb += v * v;
            sab += u * v;
        }
        let cov = sab / n - (sa / n) * (sb / n);
        let va = saa / n - (sa / n) * (sa / n);
        let vb = sbb / n - (sb / n) * (sb / n);
        cov / (va * vb).sqrt()
    }

    #[test]
    fn equicorrelated_pairwise_correlations_match_rho() {
        for &rho in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let law = CovariateLaw::EquicorrelatedNormal { rho };
            let x = sample_covariates(&law, 100_000, 5, 17).unwrap();
            for a in 0..5 {
                for b in (a + 1)..5 {
                    let r = column_correlation(&x, a, b);
                    assert!(
                        (r - rho).abs() < 0.01,
                        "rho={rho}, pair ({a},{b}): sample correlation {r}"
                    );
                }
            }
        }
    }

    #[test]
    fn equicorrelated_rejects_bad_rho() {
        for rho in [-0.1, 1.1, f64::NAN] {
            let law = CovariateLaw::EquicorrelatedNormal { rho };
            assert!(sample_covariates(&law, 10, 2, 0).is_err());
        }
    }

    #[test]
    fn uniform_law_stays_in_unit_interval() {
        let x = sample_covariates(&CovariateLaw::IidUniform01, 10_000, 3, 5).unwrap();
        assert!(x.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn normalized_signal_has_unit_variance() {
        let spec = DgpSpec::resolve(
            RegressionFn::Linear,
            CovariateLaw::IidStandardNormal,
            5,
            1.0,
            true,
            DEFAULT_CALIB_N,
            23,
        )
        .unwrap();
        let x = sample_covariates(&spec.law, 100_000, 5, 99).unwrap();
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..x.rows() {
            let g = spec.signal(x.row(i)).unwrap();
            let delta = g - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (g - mean);
        }
        let var = m2 / (x.rows() - 1) as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.02);
    }

    #[test]
    fn sigma_eps_tracks_snr() {
        for (snr, expect) in [(0.05, 4.472_135_954_999_58), (6.0, 0.408_248_290_463_863)] {
            let spec = DgpSpec::resolve(
                RegressionFn::Linear,
                CovariateLaw::IidStandardNormal,
                5,
                snr,
                true,
                DEFAULT_CALIB_N,
                23,
            )
            .unwrap();
            assert_abs_diff_eq!(spec.sigma_eps, expect, epsilon = 1e-12);
        }
        // un-normalized: sigma_eps = sigma_f / sqrt(snr)
        let spec = DgpSpec::resolve(
            RegressionFn::Linear,
            CovariateLaw::IidStandardNormal,
            5,
            0.05,
            false,
            DEFAULT_CALIB_N,
            23,
        )
        .unwrap();
        assert_abs_diff_eq!(spec.sigma_eps, spec.sigma_f / 0.05f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(spec.sigma_eps, 10.0, epsilon = 0.1);
    }

    #[test]
    fn irrelevant_covariates_do_not_touch_y() {
        let spec = DgpSpec::resolve(
            RegressionFn::Hidden,
            CovariateLaw::IidUniform01,
            10,
            1.0,
            true,
            DEFAULT_CALIB_N,
            31,
        )
        .unwrap();
        let data = spec.generate(200, 7).unwrap();
        for i in 0..data.n() {
            let mut row = data.x.row(i).to_vec();
            for j in spec.f.relevant_count()..spec.p_total {
                row[j] = -1e9;
            }
            let expected = spec.signal(&row).unwrap();
            assert_eq!(spec.signal(data.x.row(i)).unwrap(), expected);
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let spec = DgpSpec::resolve(
            RegressionFn::Mars,
            CovariateLaw::IidUniform01,
            5,
            1.0,
            true,
            10_000,
            3,
        )
        .unwrap();
        let a = spec.generate(64, 12).unwrap();
        let b = spec.generate(64, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        let c = spec.generate(64, 13).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}

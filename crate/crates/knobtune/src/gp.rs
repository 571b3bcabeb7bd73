//! Gaussian-process regression on unit-cube inputs.
//!
//! This is both the Bayesian-optimization surrogate and the standalone
//! exploitation regressor. Targets are standardized to zero mean / unit
//! variance before fitting; predictions are mapped back to raw units.
//! With at most a dozen or two training points per phase, every fit is an
//! exact dense Cholesky factorization; there is no incremental update.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor};

const LN_2PI: f64 = 1.8378770664093453;

/// Covariance function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Matern 5/2: tolerates plateaus and kinks better than RBF.
    Matern52,
    /// Squared exponential.
    Rbf,
}

/// Kernel hyperparameters. Length scales are in unit-cube units; the
/// variances are in standardized-target units squared.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelConfig {
    pub fn new(
        kind: KernelKind,
        length_scales: Vec<f64>,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        if length_scales.is_empty() || length_scales.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("length scales must be positive".into()));
        }
        if !(signal_variance > 0.0) {
            return Err(Error::Config("signal variance must be positive".into()));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::Config("noise variance must be non-negative".into()));
        }
        Ok(Self {
            kind,
            length_scales,
            signal_variance,
            noise_variance,
        })
    }

    /// Isotropic config: one shared length scale across `dims` inputs.
    pub fn isotropic(kind: KernelKind, dims: usize, length_scale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(kind, vec![length_scale; dims], 1.0, noise_variance)
    }

    /// Covariance between two points (without observation noise).
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((&x, &y), &l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        match self.kind {
            KernelKind::Rbf => self.signal_variance * (-0.5 * r2).exp(),
            KernelKind::Matern52 => {
                let r = r2.sqrt();
                let s = 5.0f64.sqrt() * r;
                self.signal_variance * (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
            }
        }
    }
}

/// A fitted Gaussian process.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets_raw: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    kernel: KernelConfig,
    factor: CholeskyFactor,
    /// (K + noise I)^-1 applied to the standardized targets.
    alpha: Vec<f64>,
    /// Jitter that made the factorization succeed.
    jitter: f64,
}

/// Targets whose stddev falls below this are treated as constant.
const STD_FLOOR: f64 = 1e-12;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Fits a GP to `inputs` (unit-cube points) and `targets` (raw units).
///
/// Targets are standardized internally; the covariance matrix gets additive
/// jitter starting at 1e-8, escalating tenfold up to 1e-2 until the Cholesky
/// factorization succeeds.
pub fn fit(inputs: &[Vec<f64>], targets: &[f64], kernel: KernelConfig) -> Result<GpModel> {
    if inputs.is_empty() {
        return Err(Error::Contract("gp fit needs at least one point".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let dims = inputs[0].len();
    if inputs.iter().any(|p| p.len() != dims) {
        return Err(Error::Contract("inputs have mixed dimensionality".into()));
    }
    if kernel.length_scales.len() != dims {
        return Err(Error::Contract(format!(
            "kernel has {} length scales for {dims}-dimensional inputs",
            kernel.length_scales.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Contract("targets must be finite".into()));
    }

    let n = inputs.len();
    let target_mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets
        .iter()
        .map(|t| (t - target_mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    let target_std = if std < STD_FLOOR { 1.0 } else { std };
    let standardized: Vec<f64> = targets
        .iter()
        .map(|t| (t - target_mean) / target_std)
        .collect();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&inputs[i], &inputs[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut jitter = JITTER_START;
    let factor = loop {
        let mut a = gram.clone();
        for i in 0..n {
            a[i * n + i] += kernel.noise_variance + jitter;
        }
        if let Some(f) = cholesky(&a, n) {
            break f;
        }
        if jitter >= JITTER_MAX {
            return Err(Error::Numerical(format!(
                "covariance factorization failed at maximum jitter {JITTER_MAX}"
            )));
        }
        jitter *= 10.0;
    };
    let alpha = factor.solve(&standardized);

    Ok(GpModel {
        inputs: inputs.to_vec(),
        targets_raw: targets.to_vec(),
        target_mean,
        target_std,
        kernel,
        factor,
        alpha,
        jitter,
    })
}

impl GpModel {
    pub fn num_points(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_dimensions(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    pub fn targets_raw(&self) -> &[f64] {
        &self.targets_raw
    }

    pub fn standardized_targets(&self) -> Vec<f64> {
        self.targets_raw
            .iter()
            .map(|t| (t - self.target_mean) / self.target_std)
            .collect()
    }

    /// Posterior mean and variance of the latent function at `x`, in raw
    /// target units. Variance is clamped at zero.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.num_dimensions());
        let n = self.inputs.len();
        let mut k_star = Vec::with_capacity(n);
        for p in &self.inputs {
            k_star.push(self.kernel.eval(x, p));
        }
        let mean_std: f64 = k_star.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = self.factor.solve_lower(&k_star);
        let reduction: f64 = v.iter().map(|vi| vi * vi).sum();
        let var_std = (self.kernel.eval(x, x) - reduction).max(0.0);

        let mean = mean_std * self.target_std + self.target_mean;
        let var = var_std * self.target_std * self.target_std;
        (mean, var)
    }

    /// Log marginal likelihood of the standardized targets under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = self.standardized_targets();
        let n = y.len() as f64;
        let data_fit: f64 = y.iter().zip(&self.alpha).map(|(yi, ai)| yi * ai).sum();
        -0.5 * data_fit - self.factor.log_det_half() - 0.5 * n * LN_2PI
    }

    /// Jitter actually applied during fitting (diagnostic).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

/// Hyperparameter grid used by [`optimize_hyperparams`].
const LENGTH_SCALE_GRID: [f64; 8] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 2.0];
const NOISE_GRID: [f64; 4] = [1e-6, 1e-4, 1e-2, 1e-1];

/// Selects an isotropic kernel by maximizing log marginal likelihood over a
/// fixed log-spaced grid. Signal variance stays at 1.0 because targets are
/// standardized. Ties break toward larger length scale, then larger noise.
pub fn optimize_hyperparams(
    inputs: &[Vec<f64>],
    targets: &[f64],
    kind: KernelKind,
) -> Result<KernelConfig> {
    if inputs.len() < 2 {
        return Err(Error::Contract(
            "hyperparameter optimization needs at least two points".into(),
        ));
    }
    let dims = inputs[0].len();
    let mut best: Option<(f64, KernelConfig)> = None;
    for &ls in &LENGTH_SCALE_GRID {
        for &noise in &NOISE_GRID {
            let candidate = KernelConfig::isotropic(kind, dims, ls, noise)?;
            let model = match fit(inputs, targets, candidate.clone()) {
                Ok(m) => m,
                Err(Error::Numerical(_)) => continue,
                Err(e) => return Err(e),
            };
            let lml = model.log_marginal_likelihood();
            // Grid iterates ls then noise in ascending order, so >= makes
            // the larger-scale/larger-noise candidate win exact ties.
            let better = match &best {
                None => true,
                Some((best_lml, _)) => lml >= *best_lml,
            };
            if better {
                best = Some((lml, candidate));
            }
        }
    }
    best.map(|(_, cfg)| cfg)
        .ok_or_else(|| Error::Numerical("no kernel in the grid could be fitted".into()))
}

/// Convenience: grid-select hyperparameters, then fit.
pub fn fit_auto(inputs: &[Vec<f64>], targets: &[f64], kind: KernelKind) -> Result<GpModel> {
    let kernel = optimize_hyperparams(inputs, targets, kind)?;
    fit(inputs, targets, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(ls: f64, dims: usize, noise: f64) -> KernelConfig {
        KernelConfig::isotropic(KernelKind::Matern52, dims, ls, noise).unwrap()
    }

    /// Independent interpolation oracle: Gauss-Jordan solve of K a = y,
    /// then k_*^T a. Shares no code with the Cholesky path.
    fn naive_predict_mean(
        inputs: &[Vec<f64>],
        targets_std: &[f64],
        cfg: &KernelConfig,
        x: &[f64],
    ) -> f64 {
        let n = inputs.len();
        let mut aug = vec![0.0; n * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                aug[i * (n + 1) + j] = cfg.eval(&inputs[i], &inputs[j])
                    + if i == j { cfg.noise_variance + 1e-8 } else { 0.0 };
            }
            aug[i * (n + 1) + n] = targets_std[i];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| {
                    aug[a * (n + 1) + col]
                        .abs()
                        .partial_cmp(&aug[b * (n + 1) + col].abs())
                        .unwrap()
                })
                .unwrap();
            for j in 0..=n {
                aug.swap(col * (n + 1) + j, pivot * (n + 1) + j);
            }
            let p = aug[col * (n + 1) + col];
            for j in 0..=n {
                aug[col * (n + 1) + j] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[r * (n + 1) + col];
                    for j in 0..=n {
                        aug[r * (n + 1) + j] -= f * aug[col * (n + 1) + j];
                    }
                }
            }
        }
        (0..n)
            .map(|i| cfg.eval(x, &inputs[i]) * aug[i * (n + 1) + n])
            .sum()
    }

    #[test]
    fn single_point_interpolates() {
        let model = fit(&[vec![0.3, 0.7]], &[5.0], kernel(0.5, 2, 0.0)).unwrap();
        let (mean, var) = model.predict(&[0.3, 0.7]);
        assert!((mean - 5.0).abs() < 1e-6);
        assert!(var.abs() < 1e-6);
    }

    #[test]
    fn duplicate_inputs_fit_via_jitter() {
        let inputs = vec![vec![0.5], vec![0.5], vec![0.5]];
        let model = fit(&inputs, &[2.0, 2.0, 2.0], kernel(0.5, 1, 0.0)).unwrap();
        let (mean, _) = model.predict(&[0.5]);
        assert!((mean - 2.0).abs() < 1e-5);
    }

    #[test]
    fn noiseless_fit_reproduces_training_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![i as f64 / 4.0, rng.gen::<f64>()])
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let model = fit(&inputs, &targets, kernel(0.5, 2, 0.0)).unwrap();
        for (p, t) in inputs.iter().zip(&targets) {
            let (mean, _) = model.predict(p);
            assert!((mean - t).abs() < 1e-6, "pred {mean} target {t}");
        }
    }

    #[test]
    fn predictions_match_naive_solver_off_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let inputs: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|p| p[0] * p[0] - p[1]).collect();
        let cfg = kernel(0.5, 2, 0.0);
        let model = fit(&inputs, &targets, cfg.clone()).unwrap();
        let y_std = model.standardized_targets();
        for _ in 0..20 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let (mean, _) = model.predict(&x);
            let naive = naive_predict_mean(&inputs, &y_std, &cfg, &x) * model.target_std()
                + model.target_mean();
            assert!((mean - naive).abs() < 1e-8, "{mean} vs {naive}");
        }
    }

    #[test]
    fn far_query_reverts_to_prior() {
        // In 1-D the unit cube caps distances at 1, so use a tiny length
        // scale to place the query >= 10 length scales away.
        let cfg = kernel(0.02, 1, 0.0);
        let model = fit(&[vec![0.0], vec![0.1]], &[4.0, 8.0], cfg).unwrap();
        let (mean, var) = model.predict(&[1.0]);
        let prior_mean = model.target_mean();
        let prior_var = model.kernel().signal_variance * model.target_std().powi(2);
        assert!((mean - prior_mean).abs() <= 0.01 * prior_mean.abs());
        assert!((var - prior_var).abs() <= 0.01 * prior_var);
    }

    #[test]
    fn two_point_posterior_mean_is_strictly_between() {
        let model = fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], kernel(0.5, 1, 0.0)).unwrap();
        let (mean, _) = model.predict(&[0.5]);
        assert!(mean > 0.0 && mean < 1.0, "mean {mean}");
        // Symmetry of the 2x2 system pins the midpoint prediction to the
        // target mean: k(0.5,0)=k(0.5,1) and the standardized targets are
        // +-1/std, so the weighted sum cancels to zero.
        assert!((mean - 0.5).abs() < 1e-9);
    }

    #[test]
    fn lml_closed_form_for_single_point() {
        let model = fit(&[vec![0.5]], &[3.0], kernel(0.5, 1, 0.0)).unwrap();
        let y = model.standardized_targets()[0];
        // Unit prior variance plus jitter: log det is ~0.
        let expected = -0.5 * (y * y + LN_2PI);
        assert!((model.log_marginal_likelihood() - expected).abs() < 1e-6);
    }

    #[test]
    fn lml_penalizes_excess_noise_on_noiseless_line() {
        let inputs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let targets: Vec<f64> = inputs.iter().map(|p| 2.0 * p[0]).collect();
        let mut lmls = Vec::new();
        for noise in [1e-6, 1e-2, 1e-1] {
            let model = fit(&inputs, &targets, kernel(0.75, 1, noise)).unwrap();
            lmls.push(model.log_marginal_likelihood());
        }
        assert!(lmls[0] > lmls[1] && lmls[1] > lmls[2], "{lmls:?}");
    }

    #[test]
    fn lml_is_deterministic() {
        let inputs = vec![vec![0.1], vec![0.9]];
        let a = fit(&inputs, &[1.0, 2.0], kernel(0.35, 1, 1e-4)).unwrap();
        let b = fit(&inputs, &[1.0, 2.0], kernel(0.35, 1, 1e-4)).unwrap();
        assert_eq!(a.log_marginal_likelihood(), b.log_marginal_likelihood());
    }

    #[test]
    fn hyperparam_grid_prefers_high_noise_on_shuffled_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut high_noise = 0;
        for _ in 0..50 {
            let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
            // Pure noise: targets carry no spatial structure.
            let targets: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let cfg = optimize_hyperparams(&inputs, &targets, KernelKind::Matern52).unwrap();
            if cfg.noise_variance == 1e-1 {
                high_noise += 1;
            }
        }
        assert!(high_noise >= 40, "only {high_noise}/50 trials chose max noise");
    }

    #[test]
    fn hyperparam_grid_generalizes_on_sinusoid() {
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let f = |x: f64| (2.0 * std::f64::consts::PI * x).sin() + 2.0;
        let targets: Vec<f64> = inputs.iter().map(|p| f(p[0])).collect();
        let model = fit_auto(&inputs, &targets, KernelKind::Matern52).unwrap();
        for i in 0..7 {
            let x = (i as f64 + 0.5) / 7.0;
            let (mean, _) = model.predict(&[x]);
            let truth = f(x);
            assert!(
                ((mean - truth) / truth).abs() < 0.10,
                "x={x} pred {mean} truth {truth}"
            );
        }
    }

    #[test]
    fn hyperparam_selection_is_deterministic() {
        let inputs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i % 2) as f64]).collect();
        let targets = vec![0.3, 1.1, 0.9, 2.0, 1.7, 2.5];
        let a = optimize_hyperparams(&inputs, &targets, KernelKind::Matern52).unwrap();
        let b = optimize_hyperparams(&inputs, &targets, KernelKind::Matern52).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_bounded_by_prior_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..=10);
            let dims = rng.gen_range(1..=3);
            let inputs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dims).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let targets: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let noise = [0.0, 1e-4, 1e-2][rng.gen_range(0..3)];
            let model = fit(&inputs, &targets, kernel(0.35, dims, noise)).unwrap();
            let prior = (model.kernel().signal_variance + model.kernel().noise_variance)
                * model.target_std().powi(2);
            for _ in 0..20 {
                let x: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
                let (_, var) = model.predict(&x);
                assert!(var >= 0.0);
                assert!(var <= prior * (1.0 + 1e-9), "var {var} prior {prior}");
            }
        }
    }

    #[test]
    fn predict_invariant_under_training_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let inputs: Vec<Vec<f64>> = (0..7).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let targets: Vec<f64> = (0..7).map(|_| rng.gen::<f64>()).collect();
        let model_a = fit(&inputs, &targets, kernel(0.5, 2, 1e-4)).unwrap();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let inputs_p: Vec<Vec<f64>> = perm.iter().map(|&i| inputs[i].clone()).collect();
        let targets_p: Vec<f64> = perm.iter().map(|&i| targets[i]).collect();
        let model_b = fit(&inputs_p, &targets_p, kernel(0.5, 2, 1e-4)).unwrap();
        for _ in 0..20 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let (ma, va) = model_a.predict(&x);
            let (mb, vb) = model_b.predict(&x);
            assert!((ma - mb).abs() < 1e-9);
            assert!((va - vb).abs() < 1e-9);
        }
    }

    #[test]
    fn adding_a_point_never_increases_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let dims = rng.gen_range(1..=2);
            let n = rng.gen_range(2..=8);
            let mut inputs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dims).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let mut targets: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let cfg = kernel(0.5, dims, 0.0);
            let before = fit(&inputs, &targets, cfg.clone()).unwrap();
            inputs.push((0..dims).map(|_| rng.gen::<f64>()).collect());
            targets.push(rng.gen::<f64>());
            let after = fit(&inputs, &targets, cfg).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
                // Compare in standardized units: refitting changes the
                // target scaling, the mathematical property holds for the
                // underlying kernel-space variance.
                let (_, va) = before.predict(&x);
                let (_, vb) = after.predict(&x);
                let va_std = va / before.target_std().powi(2);
                let vb_std = vb / after.target_std().powi(2);
                assert!(vb_std <= va_std + 1e-7, "{vb_std} > {va_std}");
            }
        }
    }

    #[test]
    fn kernels_peak_at_zero_distance_and_decay() {
        for kind in [KernelKind::Matern52, KernelKind::Rbf] {
            let cfg = KernelConfig::isotropic(kind, 1, 0.5, 0.0).unwrap();
            assert!((cfg.eval(&[0.3], &[0.3]) - cfg.signal_variance).abs() < 1e-12);
            let mut prev = cfg.eval(&[0.0], &[0.0]);
            for i in 1..=20 {
                let d = i as f64 * 0.05;
                let k = cfg.eval(&[0.0], &[d]);
                assert!(k < prev, "{kind:?} not decreasing at d={d}");
                prev = k;
            }
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = fit(&[vec![0.0], vec![0.0, 1.0]], &[1.0, 2.0], kernel(0.5, 1, 0.0));
        assert!(matches!(err, Err(Error::Contract(_))));
        let err = fit(&[vec![0.0]], &[1.0], kernel(0.5, 2, 0.0));
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}

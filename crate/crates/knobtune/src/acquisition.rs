//! Acquisition functions for constraint-weighted Bayesian optimization:
//! Expected Improvement, probability of feasibility, their product, and an
//! exact grid argmax that skips already-sampled settings.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::knobspace::{KnobSetting, KnobSpace};
use crate::spec::ConstraintDirection;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via the error function (double-precision accurate).
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Below this standard deviation the posterior is treated as deterministic.
const SIGMA_FLOOR: f64 = 1e-12;

/// Expected improvement of a Gaussian posterior over the incumbent.
///
/// For maximization with s = sqrt(variance) and z = (mean - incumbent)/s:
/// EI = (mean - incumbent) * Phi(z) + s * phi(z). Minimization mirrors the
/// sign. Degenerate posteriors (s below 1e-12) reduce to the positive part
/// of the predicted improvement.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64, maximize: bool) -> f64 {
    debug_assert!(variance >= 0.0);
    let gain = if maximize {
        mean - incumbent
    } else {
        incumbent - mean
    };
    let sigma = variance.max(0.0).sqrt();
    if sigma < SIGMA_FLOOR {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

/// Posterior probability that a constraint metric lands on the feasible
/// side of its set point.
pub fn prob_feasible(
    mean: f64,
    variance: f64,
    set_point: f64,
    direction: ConstraintDirection,
) -> f64 {
    debug_assert!(variance >= 0.0);
    let sigma = variance.max(0.0).sqrt();
    let margin = match direction {
        ConstraintDirection::Below => set_point - mean,
        ConstraintDirection::Above => mean - set_point,
    };
    if sigma < SIGMA_FLOOR {
        return if margin > 0.0 { 1.0 } else { 0.0 };
    }
    norm_cdf(margin / sigma)
}

/// One constraint surrogate: its GP, set point, and direction.
#[derive(Debug)]
pub struct ConstraintModel {
    pub model: GpModel,
    pub set_point: f64,
    pub direction: ConstraintDirection,
}

/// Everything needed to score a candidate setting.
#[derive(Debug)]
pub struct AcquisitionContext<'a> {
    pub objective_model: &'a GpModel,
    pub constraint_models: &'a [ConstraintModel],
    /// Best feasible objective observed so far (raw units); absent while no
    /// feasible sample exists.
    pub incumbent: Option<f64>,
    pub maximize: bool,
}

impl AcquisitionContext<'_> {
    /// EI weighted by the probability of meeting every constraint. Without a
    /// feasible incumbent the score is the feasibility probability alone, so
    /// the search hunts for a feasible region first.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut p_feasible = 1.0;
        for c in self.constraint_models {
            let (mean, var) = c.model.predict(x);
            p_feasible *= prob_feasible(mean, var, c.set_point, c.direction);
            if p_feasible == 0.0 {
                return 0.0;
            }
        }
        match self.incumbent {
            Some(incumbent) => {
                let (mean, var) = self.objective_model.predict(x);
                expected_improvement(mean, var, incumbent, self.maximize) * p_feasible
            }
            None => p_feasible,
        }
    }
}

/// Scores every unsampled grid setting and returns the best one.
/// Ties break toward the lexicographically smallest index vector.
pub fn argmax_acquisition(
    ctx: &AcquisitionContext<'_>,
    space: &KnobSpace,
    already_sampled: &HashSet<KnobSetting>,
) -> Result<KnobSetting> {
    let mut best: Option<(f64, KnobSetting)> = None;
    for setting in space.iter_settings() {
        if already_sampled.contains(&setting) {
            continue;
        }
        let x = space.normalize(&setting)?;
        let score = ctx.score(&x);
        // Lexicographic iteration order plus strict improvement keeps the
        // first (smallest) of any tied settings.
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, setting));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Exhausted("every setting has already been sampled".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{fit, KernelConfig, KernelKind};
    use crate::knobspace::{KnobDimension, KnobSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(dims: usize) -> KernelConfig {
        KernelConfig::isotropic(KernelKind::Matern52, dims, 0.35, 1e-6).unwrap()
    }

    fn line_space(n: usize) -> KnobSpace {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        KnobSpace::new(
            vec![KnobDimension::new("k", values).unwrap()],
            KnobSetting::new(vec![0]),
        )
        .unwrap()
    }

    #[test]
    fn ei_zero_without_gap_or_uncertainty() {
        assert_eq!(expected_improvement(2.0, 0.0, 2.0, true), 0.0);
    }

    #[test]
    fn ei_at_incumbent_with_unit_sigma_is_phi_zero() {
        let ei = expected_improvement(2.0, 1.0, 2.0, true);
        assert!((ei - 0.398942).abs() < 1e-6);
        let ei_min = expected_improvement(2.0, 1.0, 2.0, false);
        assert!((ei_min - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn ei_matches_monte_carlo() {
        // Oracle: E[max(N(mean, s^2) - incumbent, 0)] by simulation.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mean = 1.0;
        let sigma = 0.5f64;
        let incumbent = 0.0;
        let draws = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            acc += (mean + sigma * z - incumbent).max(0.0);
        }
        let mc = acc / draws as f64;
        let ei = expected_improvement(mean, sigma * sigma, incumbent, true);
        assert!((ei - mc).abs() < 1e-3, "ei {ei} mc {mc}");
    }

    #[test]
    fn prob_feasible_matches_normal_table() {
        assert!((prob_feasible(7.0, 1.0, 7.0, ConstraintDirection::Below) - 0.5).abs() < 1e-9);
        // mean two sigmas below the cap
        let p = prob_feasible(5.0, 1.0, 7.0, ConstraintDirection::Below);
        assert!((p - 0.97725).abs() < 1e-5);
        // deterministic infeasibility
        assert_eq!(prob_feasible(8.0, 0.0, 7.0, ConstraintDirection::Below), 0.0);
        assert_eq!(prob_feasible(8.0, 0.0, 7.0, ConstraintDirection::Above), 1.0);
    }

    #[test]
    fn prob_feasible_monotone_in_mean() {
        let mut prev = 1.0;
        for i in 0..20 {
            let mean = i as f64 * 0.5;
            let p = prob_feasible(mean, 2.0, 5.0, ConstraintDirection::Below);
            assert!(p <= prev + 1e-12);
            assert!((0.0..=1.0).contains(&p));
            prev = p;
        }
    }

    #[test]
    fn score_reduces_to_ei_without_constraints() {
        let model = fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], kernel(1)).unwrap();
        let ctx = AcquisitionContext {
            objective_model: &model,
            constraint_models: &[],
            incumbent: Some(1.0),
            maximize: true,
        };
        let x = vec![0.5];
        let (mean, var) = model.predict(&x);
        assert_eq!(ctx.score(&x), expected_improvement(mean, var, 1.0, true));
    }

    #[test]
    fn zero_feasibility_annihilates_score() {
        let objective = fit(&[vec![0.0], vec![1.0]], &[0.0, 10.0], kernel(1)).unwrap();
        // Constraint GP fitted on wildly infeasible values with near-zero
        // posterior uncertainty at the training points.
        let constraint = fit(&[vec![0.5]], &[100.0], kernel(1)).unwrap();
        let ctx = AcquisitionContext {
            objective_model: &objective,
            constraint_models: &[ConstraintModel {
                model: constraint,
                set_point: 1.0,
                direction: ConstraintDirection::Below,
            }],
            incumbent: Some(0.0),
            maximize: true,
        };
        assert_eq!(ctx.score(&[0.5]), 0.0);
    }

    #[test]
    fn without_incumbent_argmax_tracks_feasibility_alone() {
        let space = line_space(9);
        let xs: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 / 2.0]).collect();
        // Constraint improves toward x = 1; everything measured infeasible.
        let c_vals = vec![9.0, 7.0, 5.0];
        let objective = fit(&xs, &[1.0, 1.0, 1.0], kernel(1)).unwrap();
        let constraint = fit(&xs, &c_vals, kernel(1)).unwrap();
        let models = [ConstraintModel {
            model: constraint,
            set_point: 4.0,
            direction: ConstraintDirection::Below,
        }];
        let ctx = AcquisitionContext {
            objective_model: &objective,
            constraint_models: &models,
            incumbent: None,
            maximize: true,
        };
        let sampled = HashSet::new();
        let chosen = argmax_acquisition(&ctx, &space, &sampled).unwrap();

        // Independent oracle: exhaustive scan of the feasibility probability.
        let mut best = (f64::NEG_INFINITY, None);
        for s in space.iter_settings() {
            let x = space.normalize(&s).unwrap();
            let (m, v) = models[0].model.predict(&x);
            let p = prob_feasible(m, v, 4.0, ConstraintDirection::Below);
            if p > best.0 {
                best = (p, Some(s));
            }
        }
        assert_eq!(chosen, best.1.unwrap());
    }

    #[test]
    fn forced_choice_returns_the_only_unsampled_setting() {
        let space = line_space(3);
        let model = fit(&[vec![0.0], vec![1.0]], &[1.0, 2.0], kernel(1)).unwrap();
        let ctx = AcquisitionContext {
            objective_model: &model,
            constraint_models: &[],
            incumbent: Some(2.0),
            maximize: true,
        };
        let sampled: HashSet<KnobSetting> =
            [KnobSetting::new(vec![0]), KnobSetting::new(vec![2])].into_iter().collect();
        let chosen = argmax_acquisition(&ctx, &space, &sampled).unwrap();
        assert_eq!(chosen, KnobSetting::new(vec![1]));
    }

    #[test]
    fn constant_acquisition_ties_break_lexicographically() {
        // A single far-away training point leaves the posterior flat across
        // the grid, so every candidate scores the same.
        let space = line_space(4);
        let objective = fit(&[vec![100.0]], &[1.0], kernel(1)).unwrap();
        let ctx = AcquisitionContext {
            objective_model: &objective,
            constraint_models: &[],
            incumbent: Some(1.0),
            maximize: true,
        };
        let sampled: HashSet<KnobSetting> = [KnobSetting::new(vec![0])].into_iter().collect();
        let chosen = argmax_acquisition(&ctx, &space, &sampled).unwrap();
        assert_eq!(chosen, KnobSetting::new(vec![1]));
    }

    #[test]
    fn exhausted_space_is_an_error() {
        let space = line_space(2);
        let model = fit(&[vec![0.0]], &[1.0], kernel(1)).unwrap();
        let ctx = AcquisitionContext {
            objective_model: &model,
            constraint_models: &[],
            incumbent: None,
            maximize: true,
        };
        let sampled: HashSet<KnobSetting> =
            [KnobSetting::new(vec![0]), KnobSetting::new(vec![1])].into_iter().collect();
        assert!(matches!(
            argmax_acquisition(&ctx, &space, &sampled),
            Err(Error::Exhausted(_))
        ));
    }

    #[test]
    fn argmax_matches_exhaustive_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..10 {
            let space = KnobSpace::new(
                vec![
                    KnobDimension::new("a", (0..6).map(|i| i as f64).collect()).unwrap(),
                    KnobDimension::new("b", (0..5).map(|i| i as f64).collect()).unwrap(),
                ],
                KnobSetting::new(vec![0, 0]),
            )
            .unwrap();
            let n = rng.gen_range(3..=8);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let obj: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
            let con: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let objective = fit(&xs, &obj, kernel(2)).unwrap();
            let constraint = fit(&xs, &con, kernel(2)).unwrap();
            let models = [ConstraintModel {
                model: constraint,
                set_point: 5.0,
                direction: ConstraintDirection::Below,
            }];
            let incumbent = obj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ctx = AcquisitionContext {
                objective_model: &objective,
                constraint_models: &models,
                incumbent: Some(incumbent),
                maximize: true,
            };
            let sampled = HashSet::new();
            let fast = argmax_acquisition(&ctx, &space, &sampled).unwrap();

            let mut best_score = f64::NEG_INFINITY;
            let mut best = None;
            for s in space.iter_settings() {
                let x = space.normalize(&s).unwrap();
                let (om, ov) = objective.predict(&x);
                let (cm, cv) = models[0].model.predict(&x);
                let score = expected_improvement(om, ov, incumbent, true)
                    * prob_feasible(cm, cv, 5.0, ConstraintDirection::Below);
                if score > best_score {
                    best_score = score;
                    best = Some(s);
                }
            }
            assert_eq!(fast, best.unwrap());
        }
    }

    #[test]
    fn ei_grows_with_sigma_at_the_incumbent() {
        let mut prev = 0.0;
        for i in 1..10 {
            let ei = expected_improvement(1.0, (i as f64 * 0.1).powi(2), 1.0, true);
            assert!(ei > prev);
            prev = ei;
        }
    }
}

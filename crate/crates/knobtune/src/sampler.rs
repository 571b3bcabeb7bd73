//! The per-phase sampling engine.
//!
//! A sampling phase spends N measured rounds inside the knob space and then
//! commits to the best observed setting. The hybrid schedule is: Latin
//! hypercube initialization for the first M rounds, one GP-regressor
//! exploitation pick, constrained Bayesian optimization for the middle
//! rounds, and a final GP-regressor pick on everything measured so far.
//! Plain BO, pure regressors, random and LHS-only schedules are available as
//! baselines.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{argmax_acquisition, AcquisitionContext, ConstraintModel};
use crate::error::{Error, Result};
use crate::gp::{self, KernelKind};
use crate::knobspace::{order_min_switch_distance, KnobSetting, KnobSpace};
use crate::linalg::solve_spd;
use crate::spec::OptimizationSpec;

/// Search strategy for a sampling phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// LHS init, GP pick, constrained BO, final GP pick.
    Hybrid,
    /// LHS init, then constrained BO for every searching round.
    #[serde(rename = "bo")]
    BayesOptOnly,
    /// LHS init, then a GP-regressor exploitation pick every round.
    #[serde(rename = "gp")]
    GpRegressor,
    /// LHS init, then a ridge linear-regressor pick every round.
    #[serde(rename = "linear")]
    LinearRegressor,
    /// Uniform unsampled settings for all N rounds.
    Random,
    /// Latin hypercube stretched across all N rounds.
    #[serde(rename = "lhs")]
    LhsOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Hybrid,
        Strategy::BayesOptOnly,
        Strategy::GpRegressor,
        Strategy::LinearRegressor,
        Strategy::Random,
        Strategy::LhsOnly,
    ];

    pub fn parse(s: &str) -> Result<Strategy> {
        match s.to_ascii_lowercase().as_str() {
            "hybrid" => Ok(Strategy::Hybrid),
            "bo" | "bayesopt" => Ok(Strategy::BayesOptOnly),
            "gp" => Ok(Strategy::GpRegressor),
            "linear" => Ok(Strategy::LinearRegressor),
            "random" => Ok(Strategy::Random),
            "lhs" => Ok(Strategy::LhsOnly),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Hybrid => "hybrid",
            Strategy::BayesOptOnly => "bo",
            Strategy::GpRegressor => "gp",
            Strategy::LinearRegressor => "linear",
            Strategy::Random => "random",
            Strategy::LhsOnly => "lhs",
        }
    }
}

/// What kind of pick a given round performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundKind {
    Lhs,
    GpPick,
    LinearPick,
    BayesOpt,
    Random,
}

/// Phase budget: N total rounds, the first M of which are initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    pub total_rounds: usize,
    pub init_rounds: usize,
    pub strategy: Strategy,
}

impl SamplingSchedule {
    pub fn new(total_rounds: usize, init_rounds: usize, strategy: Strategy) -> Result<Self> {
        if init_rounds < 1 || init_rounds >= total_rounds {
            return Err(Error::Config(format!(
                "init rounds must satisfy 1 <= M < N (got M={init_rounds}, N={total_rounds})"
            )));
        }
        if strategy == Strategy::Hybrid && total_rounds < init_rounds + 2 {
            return Err(Error::Config(
                "hybrid needs N >= M + 2 for its two regressor bookends".into(),
            ));
        }
        Ok(Self {
            total_rounds,
            init_rounds,
            strategy,
        })
    }

    /// Default initialization budget: roughly a third of the phase, at
    /// least 3 rounds.
    pub fn default_init_rounds(total_rounds: usize) -> usize {
        ((total_rounds as f64 / 3.0).round() as usize).max(3)
    }

    pub fn with_default_init(total_rounds: usize, strategy: Strategy) -> Result<Self> {
        Self::new(total_rounds, Self::default_init_rounds(total_rounds), strategy)
    }

    /// The per-round pick kinds this schedule will execute (1-based round r
    /// maps to index r-1).
    pub fn round_plan(&self) -> Vec<RoundKind> {
        let n = self.total_rounds;
        let m = self.init_rounds;
        (1..=n)
            .map(|r| match self.strategy {
                Strategy::Random => RoundKind::Random,
                Strategy::LhsOnly => RoundKind::Lhs,
                _ if r <= m => RoundKind::Lhs,
                Strategy::Hybrid if r == m + 1 || r == n => RoundKind::GpPick,
                Strategy::Hybrid => RoundKind::BayesOpt,
                Strategy::BayesOptOnly => RoundKind::BayesOpt,
                Strategy::GpRegressor => RoundKind::GpPick,
                Strategy::LinearRegressor => RoundKind::LinearPick,
            })
            .collect()
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub knob: KnobSetting,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub round: usize,
}

/// The committed result of a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestChoice {
    pub knob: KnobSetting,
    pub objective: f64,
    pub constraints: Vec<f64>,
    /// False when no sampled knob met the constraints and the result is the
    /// minimal-violation fallback.
    pub feasible: bool,
}

/// Continuous Latin hypercube sample in the unit cube: `m` points across
/// `dims` dimensions, each dimension's m strata hit exactly once, with
/// uniform jitter inside each stratum.
pub fn lhs_unit_points(dims: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        strata.push(perm);
    }
    (0..m)
        .map(|i| {
            (0..dims)
                .map(|d| (strata[d][i] as f64 + rng.gen::<f64>()) / m as f64)
                .collect()
        })
        .collect()
}

/// Latin hypercube initialization plan over a discrete space.
///
/// Continuous LHS points are rounded to the grid; collisions are re-jittered
/// within their strata (up to 100 retries each) and finally resolved to the
/// nearest still-unused setting. The plan is forced to include the space's
/// default setting (replacing the generated point closest to it) and is
/// ordered as a minimal-switch-distance tour starting at the default.
pub fn lhs_samples(space: &KnobSpace, m: usize, seed: u64) -> Result<Vec<KnobSetting>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_samples_with_rng(space, m, &mut rng)
}

pub fn lhs_samples_with_rng(
    space: &KnobSpace,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<KnobSetting>> {
    if m == 0 {
        return Err(Error::Contract("cannot draw zero LHS samples".into()));
    }
    if m as u64 > space.size() {
        return Err(Error::Exhausted(format!(
            "space has {} settings, cannot draw {m} distinct samples",
            space.size()
        )));
    }
    let dims = space.num_dimensions();

    // Fixed strata per point; re-jitter keeps the stratification intact.
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        strata.push(perm);
    }
    let draw = |i: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dims)
            .map(|d| (strata[d][i] as f64 + rng.gen::<f64>()) / m as f64)
            .collect()
    };

    let mut chosen: Vec<KnobSetting> = Vec::with_capacity(m);
    let mut used: HashSet<KnobSetting> = HashSet::with_capacity(m);
    for i in 0..m {
        let mut setting = space.nearest_setting(&draw(i, rng))?;
        let mut retries = 0;
        while used.contains(&setting) && retries < 100 {
            setting = space.nearest_setting(&draw(i, rng))?;
            retries += 1;
        }
        if used.contains(&setting) {
            setting = nearest_unused(space, &setting, &used)?;
        }
        used.insert(setting.clone());
        chosen.push(setting);
    }

    // Make sure the workload's default setting is part of the plan.
    let default = space.default_setting.clone();
    if !used.contains(&default) {
        let closest = chosen
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (s.manhattan_distance(&default), *i))
            .map(|(i, _)| i)
            .expect("plan is non-empty");
        used.remove(&chosen[closest]);
        chosen[closest] = default.clone();
        used.insert(default.clone());
    }

    order_min_switch_distance(&chosen, &default)
}

/// Closest setting (Manhattan, lexicographic tie-break) not yet in `used`.
fn nearest_unused(
    space: &KnobSpace,
    target: &KnobSetting,
    used: &HashSet<KnobSetting>,
) -> Result<KnobSetting> {
    let mut best: Option<(usize, KnobSetting)> = None;
    for s in space.iter_settings() {
        if used.contains(&s) {
            continue;
        }
        let d = s.manhattan_distance(target);
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, s));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Exhausted("no unused setting left in the space".into()))
}

/// Mutable state of one sampling phase.
#[derive(Debug)]
pub struct SamplerState {
    schedule: SamplingSchedule,
    space: KnobSpace,
    spec: OptimizationSpec,
    history: Vec<Measurement>,
    warm_start: Vec<Measurement>,
    lhs_plan: Vec<KnobSetting>,
    rng: ChaCha8Rng,
}

impl SamplerState {
    pub fn new(
        schedule: SamplingSchedule,
        space: KnobSpace,
        spec: OptimizationSpec,
        seed: u64,
        warm_start: Vec<Measurement>,
    ) -> Result<Self> {
        spec.validate()?;
        space.validate()?;
        if (schedule.total_rounds as u64) > space.size() {
            return Err(Error::Config(format!(
                "N={} exceeds the {}-setting space",
                schedule.total_rounds,
                space.size()
            )));
        }
        for m in &warm_start {
            if !space.contains(&m.knob) {
                return Err(Error::Config(format!(
                    "warm-start knob {} is not in the space",
                    m.knob
                )));
            }
            if m.constraints.len() != spec.constraints.len() {
                return Err(Error::Config(
                    "warm-start measurement has wrong constraint count".into(),
                ));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lhs_plan = match schedule.strategy {
            Strategy::Random => Vec::new(),
            Strategy::LhsOnly => lhs_samples_with_rng(&space, schedule.total_rounds, &mut rng)?,
            _ => lhs_samples_with_rng(&space, schedule.init_rounds, &mut rng)?,
        };
        Ok(Self {
            schedule,
            space,
            spec,
            history: Vec::new(),
            warm_start,
            lhs_plan,
            rng,
        })
    }

    pub fn schedule(&self) -> &SamplingSchedule {
        &self.schedule
    }

    pub fn space(&self) -> &KnobSpace {
        &self.space
    }

    pub fn spec(&self) -> &OptimizationSpec {
        &self.spec
    }

    pub fn history(&self) -> &[Measurement] {
        &self.history
    }

    /// 1-based round the next sample belongs to.
    pub fn next_round(&self) -> usize {
        self.history.len() + 1
    }

    pub fn is_complete(&self) -> bool {
        self.history.len() >= self.schedule.total_rounds
    }

    /// Picks the knob setting for the next round.
    pub fn next_sample(&mut self) -> Result<KnobSetting> {
        let round = self.next_round();
        let n = self.schedule.total_rounds;
        if round > n {
            return Err(Error::PhaseComplete(n));
        }
        let kind = self.schedule.round_plan()[round - 1];
        match kind {
            RoundKind::Lhs => Ok(self.lhs_plan[round - 1].clone()),
            RoundKind::Random => self.random_unsampled(),
            RoundKind::GpPick => self.regressor_pick(RegressorKind::Gp),
            RoundKind::LinearPick => self.regressor_pick(RegressorKind::Linear),
            RoundKind::BayesOpt => self.bayes_opt_pick(),
        }
    }

    /// Records the measurement of the knob issued for the current round.
    pub fn record(&mut self, knob: KnobSetting, objective: f64, constraints: Vec<f64>) -> Result<()> {
        if self.is_complete() {
            return Err(Error::PhaseComplete(self.schedule.total_rounds));
        }
        if !self.space.contains(&knob) {
            return Err(Error::Contract(format!("knob {knob} not in space")));
        }
        if self.history.iter().any(|m| m.knob == knob) {
            return Err(Error::Contract(format!("knob {knob} measured twice in one phase")));
        }
        if !objective.is_finite() || constraints.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("measured metrics must be finite".into()));
        }
        if constraints.len() != self.spec.constraints.len() {
            return Err(Error::Contract(format!(
                "expected {} constraint values, got {}",
                self.spec.constraints.len(),
                constraints.len()
            )));
        }
        let round = self.next_round();
        self.history.push(Measurement {
            knob,
            objective,
            constraints,
            round,
        });
        Ok(())
    }

    /// Best measured knob of this phase by the user's objective, considering
    /// only measurements whose constraints were met. Falls back to the
    /// minimal-violation measurement when nothing was feasible.
    pub fn select_best(&self) -> Result<BestChoice> {
        select_best(&self.history, &self.spec)
    }

    fn sampled_set(&self) -> HashSet<KnobSetting> {
        self.history.iter().map(|m| m.knob.clone()).collect()
    }

    fn random_unsampled(&mut self) -> Result<KnobSetting> {
        let sampled = self.sampled_set();
        if sampled.len() as u64 >= self.space.size() {
            return Err(Error::Exhausted("no unsampled setting left".into()));
        }
        for _ in 0..200 {
            let indices: Vec<usize> = self
                .space
                .dimensions
                .iter()
                .map(|d| self.rng.gen_range(0..d.values.len()))
                .collect();
            let candidate = KnobSetting::new(indices);
            if !sampled.contains(&candidate) {
                return Ok(candidate);
            }
        }
        // Dense space relative to history: enumerate instead of rejecting.
        let unsampled: Vec<KnobSetting> = self
            .space
            .iter_settings()
            .filter(|s| !sampled.contains(s))
            .collect();
        Ok(unsampled[self.rng.gen_range(0..unsampled.len())].clone())
    }

    /// All model-visible data: warm-start measurements first, then this
    /// phase's history.
    fn training_data(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let all = self.warm_start.iter().chain(&self.history);
        let mut inputs = Vec::new();
        let mut objective = Vec::new();
        let mut constraints: Vec<Vec<f64>> = vec![Vec::new(); self.spec.constraints.len()];
        for m in all {
            inputs.push(self.space.normalize(&m.knob).expect("validated knob"));
            objective.push(m.objective);
            for (ci, &v) in m.constraints.iter().enumerate() {
                constraints[ci].push(v);
            }
        }
        (inputs, objective, constraints)
    }

    /// Best feasible objective over everything the models can see.
    fn incumbent(&self) -> Option<f64> {
        self.warm_start
            .iter()
            .chain(&self.history)
            .filter(|m| self.spec.all_met(&m.constraints))
            .map(|m| m.objective)
            .reduce(|best, o| if self.spec.is_better(o, best) { o } else { best })
    }

    fn bayes_opt_pick(&mut self) -> Result<KnobSetting> {
        let (inputs, objective, constraints) = self.training_data();
        if inputs.len() < 2 {
            return Err(Error::Contract(
                "bayesian optimization needs at least two measurements".into(),
            ));
        }
        let objective_model = gp::fit_auto(&inputs, &objective, KernelKind::Matern52)?;
        let mut constraint_models = Vec::with_capacity(constraints.len());
        for (ci, values) in constraints.iter().enumerate() {
            constraint_models.push(ConstraintModel {
                model: gp::fit_auto(&inputs, values, KernelKind::Matern52)?,
                set_point: self.spec.constraints[ci].set_point,
                direction: self.spec.constraints[ci].direction,
            });
        }
        let ctx = AcquisitionContext {
            objective_model: &objective_model,
            constraint_models: &constraint_models,
            incumbent: self.incumbent(),
            maximize: self.spec.maximizing(),
        };
        argmax_acquisition(&ctx, &self.space, &self.sampled_set())
    }

    fn regressor_pick(&mut self, kind: RegressorKind) -> Result<KnobSetting> {
        let (inputs, objective, constraints) = self.training_data();
        regressor_pick(
            &inputs,
            &objective,
            &constraints,
            &self.space,
            &self.spec,
            &self.sampled_set(),
            kind,
        )
    }
}

/// Regressor family used by exploitation picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorKind {
    Gp,
    /// Ridge least squares on normalized inputs (penalty 1e-3).
    Linear,
}

/// Fits one regressor per metric, predicts every unsampled setting, and
/// returns the one with the best predicted objective among those predicted
/// to meet every constraint. If nothing is predicted feasible, returns the
/// setting with the smallest predicted constraint violation.
pub fn regressor_pick(
    inputs: &[Vec<f64>],
    objective: &[f64],
    constraints: &[Vec<f64>],
    space: &KnobSpace,
    spec: &OptimizationSpec,
    already_sampled: &HashSet<KnobSetting>,
    kind: RegressorKind,
) -> Result<KnobSetting> {
    if inputs.len() < 2 {
        return Err(Error::Contract(
            "regressor pick needs at least two measurements".into(),
        ));
    }
    let objective_pred = Predictor::fit(inputs, objective, kind)?;
    let constraint_preds: Vec<Predictor> = constraints
        .iter()
        .map(|values| Predictor::fit(inputs, values, kind))
        .collect::<Result<_>>()?;

    let mut best_feasible: Option<(f64, KnobSetting)> = None;
    let mut least_violating: Option<(f64, KnobSetting)> = None;
    for setting in space.iter_settings() {
        if already_sampled.contains(&setting) {
            continue;
        }
        let x = space.normalize(&setting)?;
        let predicted_constraints: Vec<f64> =
            constraint_preds.iter().map(|p| p.predict(&x)).collect();
        if spec.all_met(&predicted_constraints) {
            let o = objective_pred.predict(&x);
            if best_feasible
                .as_ref()
                .map_or(true, |(bo, _)| spec.is_better(o, *bo))
            {
                best_feasible = Some((o, setting));
            }
        } else if best_feasible.is_none() {
            let violation = spec.total_violation(&predicted_constraints);
            if least_violating
                .as_ref()
                .map_or(true, |(bv, _)| violation < *bv)
            {
                least_violating = Some((violation, setting));
            }
        }
    }
    best_feasible
        .or(least_violating)
        .map(|(_, s)| s)
        .ok_or_else(|| Error::Exhausted("every setting has already been sampled".into()))
}

enum Predictor {
    Gp(gp::GpModel),
    Linear { weights: Vec<f64> },
}

impl Predictor {
    fn fit(inputs: &[Vec<f64>], targets: &[f64], kind: RegressorKind) -> Result<Predictor> {
        match kind {
            RegressorKind::Gp => Ok(Predictor::Gp(gp::fit_auto(
                inputs,
                targets,
                KernelKind::Matern52,
            )?)),
            RegressorKind::Linear => Ok(Predictor::Linear {
                weights: ridge_fit(inputs, targets, 1e-3)?,
            }),
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Gp(model) => model.predict(x).0,
            Predictor::Linear { weights } => {
                let mut y = weights[weights.len() - 1]; // intercept
                for (w, xi) in weights.iter().zip(x) {
                    y += w * xi;
                }
                y
            }
        }
    }
}

/// Ridge regression with an unpenalized intercept; returns d feature weights
/// followed by the intercept.
fn ridge_fit(inputs: &[Vec<f64>], targets: &[f64], penalty: f64) -> Result<Vec<f64>> {
    let n = inputs.len();
    let d = inputs[0].len();
    let p = d + 1;
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (row, &y) in inputs.iter().zip(targets) {
        let features: Vec<f64> = row.iter().cloned().chain(std::iter::once(1.0)).collect();
        if features.len() != p {
            return Err(Error::Contract("inputs have mixed dimensionality".into()));
        }
        for i in 0..p {
            xty[i] += features[i] * y;
            for j in 0..p {
                xtx[i * p + j] += features[i] * features[j];
            }
        }
    }
    for i in 0..d {
        xtx[i * p + i] += penalty;
    }
    // The intercept column makes X^T X singular only for n = 0.
    let _ = n;
    solve_spd(&xtx, &xty, p)
        .ok_or_else(|| Error::Numerical("ridge normal equations are singular".into()))
}

/// Best measurement by the user's spec: feasible measurements compete on the
/// objective; with no feasible measurement the minimal-total-violation one is
/// returned flagged as an infeasible fallback. Ties keep the earliest round.
pub fn select_best(history: &[Measurement], spec: &OptimizationSpec) -> Result<BestChoice> {
    if history.is_empty() {
        return Err(Error::Contract("select_best on empty history".into()));
    }
    let mut best_feasible: Option<&Measurement> = None;
    for m in history {
        if spec.all_met(&m.constraints)
            && best_feasible.map_or(true, |b| spec.is_better(m.objective, b.objective))
        {
            best_feasible = Some(m);
        }
    }
    if let Some(m) = best_feasible {
        return Ok(BestChoice {
            knob: m.knob.clone(),
            objective: m.objective,
            constraints: m.constraints.clone(),
            feasible: true,
        });
    }
    let fallback = history
        .iter()
        .min_by(|a, b| {
            spec.total_violation(&a.constraints)
                .partial_cmp(&spec.total_violation(&b.constraints))
                .expect("violations are finite")
        })
        .expect("history is non-empty");
    Ok(BestChoice {
        knob: fallback.knob.clone(),
        objective: fallback.objective,
        constraints: fallback.constraints.clone(),
        feasible: false,
    })
}

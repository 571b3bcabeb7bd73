//! Synthetic streaming workloads.
//!
//! A scenario pins a knob space, one or more execution phases with
//! knob-dependent response surfaces for the objective and each constraint,
//! a measurement-noise level, and a seed. Time is a simulated interval
//! counter; `interval_seconds` is reporting metadata only, so a 40-seed
//! benchmark sweep runs in seconds instead of hours.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knobspace::{KnobSetting, KnobSpace};

/// One Gaussian bump of a [`SurfaceSpec::BumpMix`] surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    /// Center in unit-cube coordinates, one entry per knob dimension.
    pub center: Vec<f64>,
    pub width: f64,
}

/// A core-count dimension paired with its (optional) frequency dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    /// Name of the dimension holding this cluster's core count.
    pub cores_dim: String,
    /// Name of the dimension holding this cluster's frequency; absent means
    /// the cluster always runs at full speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_dim: Option<String>,
    /// Relative compute weight of one core in this cluster.
    pub weight: f64,
}

/// A noiseless response surface over the knob space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    /// Throughput of a parallel workload with serial fraction and
    /// communication overhead: o = work / (t_serial + t_parallel/(p*f) + alpha*p)
    /// where p is the weighted active-core count and f the (active-core
    /// weighted) normalized frequency. With alpha > 0 the optimum sits at an
    /// interior core count rather than the largest one.
    ParallelScaling {
        work: f64,
        t_serial: f64,
        t_parallel: f64,
        alpha: f64,
        clusters: Vec<ClusterSpec>,
    },
    /// Sum of Gaussian bumps over unit-cube knob coordinates; non-convex and
    /// multi-modal.
    BumpMix { base: f64, bumps: Vec<Bump> },
    /// Board power draw: p_static + beta * sum_cluster(cores * f^3) + gamma * p.
    PowerModel {
        p_static: f64,
        beta: f64,
        gamma: f64,
        clusters: Vec<ClusterSpec>,
    },
    /// Explicit per-setting table, indexed by the space's lexicographic
    /// setting rank.
    Tabulated { values: Vec<f64> },
}

impl SurfaceSpec {
    fn validate(&self, space: &KnobSpace) -> Result<()> {
        match self {
            SurfaceSpec::ParallelScaling {
                work,
                t_serial,
                t_parallel,
                alpha,
                clusters,
            } => {
                if !(*work > 0.0) || !(*t_parallel > 0.0) {
                    return Err(Error::Config(
                        "parallel_scaling work and t_parallel must be positive".into(),
                    ));
                }
                if !(*t_serial >= 0.0) || !(*alpha >= 0.0) {
                    return Err(Error::Config(
                        "parallel_scaling t_serial and alpha must be non-negative".into(),
                    ));
                }
                validate_clusters(clusters, space)
            }
            SurfaceSpec::BumpMix { base, bumps } => {
                if !base.is_finite() {
                    return Err(Error::Config("bump_mix base must be finite".into()));
                }
                for b in bumps {
                    if !(b.width > 0.0) {
                        return Err(Error::Config("bump width must be positive".into()));
                    }
                    if b.center.len() != space.num_dimensions() {
                        return Err(Error::Config(format!(
                            "bump center has {} coordinates for a {}-dimensional space",
                            b.center.len(),
                            space.num_dimensions()
                        )));
                    }
                }
                Ok(())
            }
            SurfaceSpec::PowerModel {
                p_static,
                beta,
                gamma,
                clusters,
            } => {
                if !(*p_static >= 0.0) || !(*beta >= 0.0) || !(*gamma >= 0.0) {
                    return Err(Error::Config("power_model parameters must be non-negative".into()));
                }
                validate_clusters(clusters, space)
            }
            SurfaceSpec::Tabulated { values } => {
                if values.len() as u64 != space.size() {
                    return Err(Error::Config(format!(
                        "tabulated surface has {} entries for a {}-setting space",
                        values.len(),
                        space.size()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("tabulated values must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Noiseless surface value at a setting.
    pub fn evaluate(&self, space: &KnobSpace, knob: &KnobSetting) -> Result<f64> {
        match self {
            SurfaceSpec::ParallelScaling {
                work,
                t_serial,
                t_parallel,
                alpha,
                clusters,
            } => {
                let (p, f) = cluster_load(clusters, space, knob)?;
                if p <= 0.0 {
                    return Ok(0.0); // no active cores, nothing gets processed
                }
                Ok(work / (t_serial + t_parallel / (p * f) + alpha * p))
            }
            SurfaceSpec::BumpMix { base, bumps } => {
                let x = space.normalize(knob)?;
                let mut v = *base;
                for b in bumps {
                    let d2: f64 = x
                        .iter()
                        .zip(&b.center)
                        .map(|(xi, ci)| (xi - ci) * (xi - ci))
                        .sum();
                    v += b.amplitude * (-d2 / (2.0 * b.width * b.width)).exp();
                }
                Ok(v)
            }
            SurfaceSpec::PowerModel {
                p_static,
                beta,
                gamma,
                clusters,
            } => {
                let mut dynamic = 0.0;
                let mut weighted_cores = 0.0;
                for c in clusters {
                    let (cores, freq) = cluster_values(c, space, knob)?;
                    dynamic += beta * cores * freq.powi(3);
                    weighted_cores += c.weight * cores;
                }
                Ok(p_static + dynamic + gamma * weighted_cores)
            }
            SurfaceSpec::Tabulated { values } => {
                let rank = space.rank(knob)? as usize;
                Ok(values[rank])
            }
        }
    }
}

fn validate_clusters(clusters: &[ClusterSpec], space: &KnobSpace) -> Result<()> {
    if clusters.is_empty() {
        return Err(Error::Config("surface needs at least one cluster".into()));
    }
    for c in clusters {
        if !(c.weight > 0.0) {
            return Err(Error::Config("cluster weight must be positive".into()));
        }
        if space.dimension_index(&c.cores_dim).is_none() {
            return Err(Error::Config(format!(
                "cluster references unknown dimension `{}`",
                c.cores_dim
            )));
        }
        if let Some(fd) = &c.freq_dim {
            if space.dimension_index(fd).is_none() {
                return Err(Error::Config(format!(
                    "cluster references unknown dimension `{fd}`"
                )));
            }
        }
    }
    Ok(())
}

/// (core count, normalized frequency) of one cluster at a setting.
fn cluster_values(c: &ClusterSpec, space: &KnobSpace, knob: &KnobSetting) -> Result<(f64, f64)> {
    let values = space.values_at(knob)?;
    let cores_idx = space
        .dimension_index(&c.cores_dim)
        .ok_or_else(|| Error::Config(format!("unknown dimension `{}`", c.cores_dim)))?;
    let cores = values[cores_idx];
    let freq = match &c.freq_dim {
        None => 1.0,
        Some(fd) => {
            let idx = space
                .dimension_index(fd)
                .ok_or_else(|| Error::Config(format!("unknown dimension `{fd}`")))?;
            let max = *space.dimensions[idx]
                .values
                .last()
                .expect("dimensions are non-empty");
            values[idx] / max
        }
    };
    Ok((cores, freq))
}

/// Weighted active-core count and active-core-weighted mean normalized
/// frequency across clusters.
fn cluster_load(clusters: &[ClusterSpec], space: &KnobSpace, knob: &KnobSetting) -> Result<(f64, f64)> {
    let mut p = 0.0;
    let mut freq_weight = 0.0;
    let mut freq_acc = 0.0;
    for c in clusters {
        let (cores, freq) = cluster_values(c, space, knob)?;
        let w = c.weight * cores;
        p += w;
        freq_acc += w * freq;
        freq_weight += w;
    }
    let f = if freq_weight > 0.0 {
        freq_acc / freq_weight
    } else {
        1.0
    };
    Ok((p, f))
}

/// One execution phase: how long it lasts and what the workload's response
/// surfaces look like while it does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub length_intervals: u64,
    pub objective: SurfaceSpec,
    #[serde(default)]
    pub constraints: Vec<SurfaceSpec>,
}

/// A complete synthetic workload definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub space: KnobSpace,
    pub phases: Vec<PhaseSpec>,
    /// Coefficient of variation of the multiplicative measurement noise.
    pub noise_cv: f64,
    /// Length of one measurement interval; metadata for reporting only.
    pub interval_seconds: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.phases.is_empty() {
            return Err(Error::Config("scenario needs at least one phase".into()));
        }
        if !(self.noise_cv >= 0.0) {
            return Err(Error::Config("noise_cv must be non-negative".into()));
        }
        if !(self.interval_seconds > 0.0) {
            return Err(Error::Config("interval_seconds must be positive".into()));
        }
        let constraint_count = self.phases[0].constraints.len();
        for (i, phase) in self.phases.iter().enumerate() {
            if phase.length_intervals < 1 {
                return Err(Error::Config(format!("phase {i} must last at least one interval")));
            }
            if phase.constraints.len() != constraint_count {
                return Err(Error::Config(
                    "all phases must expose the same constraint metrics".into(),
                ));
            }
            phase.objective.validate(&self.space)?;
            for c in &phase.constraints {
                c.validate(&self.space)?;
            }
        }
        Ok(())
    }

    pub fn num_constraints(&self) -> usize {
        self.phases[0].constraints.len()
    }

    pub fn total_intervals(&self) -> u64 {
        self.phases.iter().map(|p| p.length_intervals).sum()
    }

    /// Scenario phase that contains interval `t` (0-based).
    pub fn phase_at(&self, interval: u64) -> Option<usize> {
        let mut start = 0;
        for (i, phase) in self.phases.iter().enumerate() {
            if interval < start + phase.length_intervals {
                return Some(i);
            }
            start += phase.length_intervals;
        }
        None
    }

    /// Noiseless objective and constraint values of `knob` during `phase_idx`.
    pub fn evaluate_true(&self, phase_idx: usize, knob: &KnobSetting) -> Result<(f64, Vec<f64>)> {
        let phase = self
            .phases
            .get(phase_idx)
            .ok_or_else(|| Error::Contract(format!("no phase {phase_idx}")))?;
        let o = phase.objective.evaluate(&self.space, knob)?;
        let c = phase
            .constraints
            .iter()
            .map(|s| s.evaluate(&self.space, knob))
            .collect::<Result<Vec<f64>>>()?;
        Ok((o, c))
    }

    /// One noisy measurement: the true values scaled by independent
    /// lognormal factors with median 1 and the configured coefficient of
    /// variation.
    pub fn measure(
        &self,
        phase_idx: usize,
        knob: &KnobSetting,
        rng: &mut impl Rng,
    ) -> Result<(f64, Vec<f64>)> {
        let (o, c) = self.evaluate_true(phase_idx, knob)?;
        if self.noise_cv == 0.0 {
            return Ok((o, c));
        }
        // Lognormal with median 1: sigma^2 = ln(1 + cv^2).
        let sigma = (1.0 + self.noise_cv * self.noise_cv).ln().sqrt();
        let mut noisy = |v: f64, rng: &mut dyn rand::RngCore| {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            v * (sigma * z).exp()
        };
        let o_noisy = noisy(o, rng);
        let c_noisy = c.into_iter().map(|v| noisy(v, rng)).collect();
        Ok((o_noisy, c_noisy))
    }

    /// Deterministic per-interval measurement: the noise draw depends only
    /// on (stream seed, interval counter).
    pub fn measure_at(
        &self,
        stream_seed: u64,
        interval: u64,
        knob: &KnobSetting,
    ) -> Result<(f64, Vec<f64>)> {
        let phase_idx = self.phase_at(interval).ok_or_else(|| {
            Error::Contract(format!(
                "interval {interval} is past the scenario end ({})",
                self.total_intervals()
            ))
        })?;
        let mut rng = interval_rng(stream_seed, interval);
        self.measure(phase_idx, knob, &mut rng)
    }
}

/// RNG for one (stream, interval) cell. SplitMix64 scrambling keeps streams
/// with nearby seeds uncorrelated.
pub fn interval_rng(stream_seed: u64, interval: u64) -> ChaCha8Rng {
    let mut z = stream_seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(interval);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Parses and validates a scenario file (see the README for the format).
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("scenario parse error: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario)
        .map_err(|e| Error::Config(format!("scenario serialize error: {e}")))?;
    std::fs::write(path.as_ref(), text)?;
    Ok(())
}

/// Names of the scenarios compiled into the binary.
pub const BUNDLED_SCENARIOS: [&str; 5] = [
    "heterogeneous-board",
    "big-server",
    "two-phase-video",
    "bumpy",
    "energy-floor",
];

/// Returns a bundled scenario by name.
pub fn bundled_scenario(name: &str) -> Result<Scenario> {
    let text = match name {
        "heterogeneous-board" => include_str!("../scenarios/heterogeneous-board.json"),
        "big-server" => include_str!("../scenarios/big-server.json"),
        "two-phase-video" => include_str!("../scenarios/two-phase-video.json"),
        "bumpy" => include_str!("../scenarios/bumpy.json"),
        "energy-floor" => include_str!("../scenarios/energy-floor.json"),
        other => {
            return Err(Error::Config(format!(
                "unknown bundled scenario `{other}` (available: {})",
                BUNDLED_SCENARIOS.join(", ")
            )))
        }
    };
    parse_scenario(text)
}

/// Loads either a bundled scenario by name or a scenario file by path.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario> {
    if BUNDLED_SCENARIOS.contains(&name_or_path) {
        bundled_scenario(name_or_path)
    } else {
        load_scenario(name_or_path)
    }
}

/// The canonical optimization problem each bundled scenario was designed
/// around (used as the CLI default).
pub fn bundled_problem(name: &str) -> Result<crate::spec::OptimizationSpec> {
    use crate::spec::{ConstraintDirection, ConstraintSpec, Direction, ObjectiveSpec};
    let spec = match name {
        "heterogeneous-board" => crate::spec::OptimizationSpec::new(
            ObjectiveSpec {
                name: "fps".into(),
                direction: Direction::Maximize,
            },
            vec![ConstraintSpec {
                name: "power".into(),
                set_point: 6.5,
                direction: ConstraintDirection::Below,
            }],
        )?,
        "big-server" => crate::spec::OptimizationSpec::maximize("fps"),
        "two-phase-video" => crate::spec::OptimizationSpec::new(
            ObjectiveSpec {
                name: "power".into(),
                direction: Direction::Minimize,
            },
            vec![ConstraintSpec {
                name: "fps".into(),
                set_point: 2.0,
                direction: ConstraintDirection::Above,
            }],
        )?,
        "bumpy" => crate::spec::OptimizationSpec::new(
            ObjectiveSpec {
                name: "score".into(),
                direction: Direction::Maximize,
            },
            vec![ConstraintSpec {
                name: "load".into(),
                set_point: 7.0,
                direction: ConstraintDirection::Below,
            }],
        )?,
        "energy-floor" => crate::spec::OptimizationSpec::new(
            ObjectiveSpec {
                name: "power".into(),
                direction: Direction::Minimize,
            },
            vec![ConstraintSpec {
                name: "fps".into(),
                set_point: 60.0,
                direction: ConstraintDirection::Above,
            }],
        )?,
        other => {
            return Err(Error::Config(format!(
                "no canonical problem for scenario `{other}`"
            )))
        }
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knobspace::KnobDimension;

    fn core_space(n: usize) -> KnobSpace {
        KnobSpace::new(
            vec![KnobDimension::new("cores", (1..=n).map(|i| i as f64).collect()).unwrap()],
            KnobSetting::new(vec![n - 1]),
        )
        .unwrap()
    }

    fn scaling(alpha: f64) -> SurfaceSpec {
        SurfaceSpec::ParallelScaling {
            work: 100.0,
            t_serial: 0.1,
            t_parallel: 10.0,
            alpha,
            clusters: vec![ClusterSpec {
                cores_dim: "cores".into(),
                freq_dim: None,
                weight: 1.0,
            }],
        }
    }

    #[test]
    fn no_overhead_scaling_is_monotone_in_cores() {
        let space = core_space(16);
        let surface = scaling(0.0);
        let mut prev = -1.0;
        for s in space.iter_settings() {
            let o = surface.evaluate(&space, &s).unwrap();
            assert!(o >= prev, "throughput dropped at {s}");
            prev = o;
        }
    }

    #[test]
    fn overhead_moves_the_optimum_interior() {
        let space = core_space(64);
        let surface = scaling(0.05);
        // Exhaustive scan oracle.
        let best = space
            .iter_settings()
            .max_by(|a, b| {
                surface
                    .evaluate(&space, a)
                    .unwrap()
                    .partial_cmp(&surface.evaluate(&space, b).unwrap())
                    .unwrap()
            })
            .unwrap();
        let best_cores = space.values_at(&best).unwrap()[0];
        assert!(
            best_cores > 1.0 && best_cores < 64.0,
            "optimum at {best_cores} cores is not interior"
        );
    }

    #[test]
    fn tabulated_returns_exact_entries() {
        let space = core_space(3);
        let surface = SurfaceSpec::Tabulated {
            values: vec![10.0, 6.0, 7.0],
        };
        surface.validate(&space).unwrap();
        for (i, s) in space.iter_settings().enumerate() {
            assert_eq!(surface.evaluate(&space, &s).unwrap(), [10.0, 6.0, 7.0][i]);
        }
    }

    #[test]
    fn tabulated_length_must_match_space() {
        let space = core_space(3);
        let surface = SurfaceSpec::Tabulated {
            values: vec![1.0, 2.0],
        };
        assert!(surface.validate(&space).is_err());
    }

    fn tiny_scenario(noise_cv: f64) -> Scenario {
        Scenario {
            space: core_space(4),
            phases: vec![PhaseSpec {
                length_intervals: 100,
                objective: scaling(0.02),
                constraints: vec![SurfaceSpec::PowerModel {
                    p_static: 1.0,
                    beta: 0.5,
                    gamma: 0.1,
                    clusters: vec![ClusterSpec {
                        cores_dim: "cores".into(),
                        freq_dim: None,
                        weight: 1.0,
                    }],
                }],
            }],
            noise_cv,
            interval_seconds: 3.0,
            seed: 7,
        }
    }

    #[test]
    fn zero_noise_measure_equals_truth() {
        let scenario = tiny_scenario(0.0);
        let knob = KnobSetting::new(vec![2]);
        let truth = scenario.evaluate_true(0, &knob).unwrap();
        let measured = scenario.measure_at(1, 5, &knob).unwrap();
        assert_eq!(truth, measured);
    }

    #[test]
    fn measurement_noise_matches_configured_cv() {
        let scenario = tiny_scenario(0.05);
        let knob = KnobSetting::new(vec![1]);
        let (true_o, _) = scenario.evaluate_true(0, &knob).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| scenario.measure(0, &knob, &mut rng).unwrap().0)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(
            (cv - 0.05).abs() < 0.2 * 0.05,
            "sample cv {cv} vs configured 0.05"
        );
        // Median stays on the true surface.
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!((median - true_o).abs() / true_o < 0.01);
    }

    #[test]
    fn measurements_are_deterministic_per_interval() {
        let scenario = tiny_scenario(0.03);
        let knob = KnobSetting::new(vec![3]);
        let a = scenario.measure_at(42, 17, &knob).unwrap();
        let b = scenario.measure_at(42, 17, &knob).unwrap();
        assert_eq!(a, b);
        let c = scenario.measure_at(42, 18, &knob).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn phase_boundaries_are_exact() {
        let mut scenario = tiny_scenario(0.0);
        scenario.phases.push(scenario.phases[0].clone());
        scenario.phases[0].length_intervals = 30;
        scenario.phases[1].length_intervals = 20;
        assert_eq!(scenario.phase_at(0), Some(0));
        assert_eq!(scenario.phase_at(29), Some(0));
        assert_eq!(scenario.phase_at(30), Some(1));
        assert_eq!(scenario.phase_at(49), Some(1));
        assert_eq!(scenario.phase_at(50), None);
    }

    #[test]
    fn evaluate_true_is_pure() {
        let scenario = tiny_scenario(0.1);
        let knob = KnobSetting::new(vec![2]);
        assert_eq!(
            scenario.evaluate_true(0, &knob).unwrap(),
            scenario.evaluate_true(0, &knob).unwrap()
        );
    }

    #[test]
    fn scenario_without_phases_is_rejected() {
        let mut scenario = tiny_scenario(0.0);
        scenario.phases.clear();
        assert!(scenario.validate().is_err());
    }

    #[test]
    fn scenario_round_trips_through_disk() {
        let scenario = tiny_scenario(0.03);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_scenario(&scenario, &path).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(scenario, loaded);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_scenario(r#"{"space": {}, "phases": [], "noise_cv": 0, "interval_seconds": 3, "seed": 0, "extra": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn bundled_scenarios_load_and_validate() {
        for name in BUNDLED_SCENARIOS {
            let scenario = bundled_scenario(name).unwrap();
            scenario.validate().unwrap();
            bundled_problem(name).unwrap();
        }
    }

    #[test]
    fn heterogeneous_board_size_near_odroid() {
        let scenario = bundled_scenario("heterogeneous-board").unwrap();
        let size = scenario.space.size();
        assert!(
            (5000..=7000).contains(&size),
            "heterogeneous-board has {size} settings"
        );
        assert_eq!(scenario.num_constraints(), 1);
    }

    #[test]
    fn two_phase_video_shift_exceeds_detector_threshold() {
        let scenario = bundled_scenario("two-phase-video").unwrap();
        let spec = bundled_problem("two-phase-video").unwrap();
        assert_eq!(scenario.phases.len(), 2);
        // The phase-1 constrained optimum must look >10% different across
        // the boundary so the default detector rule must fire.
        let mut best: Option<(f64, KnobSetting)> = None;
        for s in scenario.space.iter_settings() {
            let (o, c) = scenario.evaluate_true(0, &s).unwrap();
            if spec.all_met(&c) && best.as_ref().map_or(true, |(bo, _)| spec.is_better(o, *bo)) {
                best = Some((o, s));
            }
        }
        let (o1, best_knob) = best.expect("phase 1 has feasible settings");
        let (o2, c2) = scenario.evaluate_true(1, &best_knob).unwrap();
        let (_, c1) = scenario.evaluate_true(0, &best_knob).unwrap();
        let obj_shift = (o2 - o1).abs() / o1.abs();
        let con_shift = (c2[0] - c1[0]).abs() / c1[0].abs();
        assert!(
            obj_shift > 0.10 && con_shift > 0.10,
            "shift too small: obj {obj_shift}, constraint {con_shift}"
        );
    }
}

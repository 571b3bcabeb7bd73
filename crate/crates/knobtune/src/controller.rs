//! The outer control loop: run a sampling phase, commit the best knob,
//! monitor until the workload shifts, repeat.
//!
//! The pieces here are transport-agnostic. [`PhaseDetector`] implements the
//! relative-deviation rule; [`ControllerEvent`] is the structured log every
//! run emits; [`run_phase`] and [`control_loop`] drive a [`Workload`]
//! directly (the protocol server reuses the same pieces message by message).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knobspace::{KnobSetting, KnobSpace};
use crate::sampler::{BestChoice, Measurement, SamplerState, SamplingSchedule, Strategy};
use crate::spec::OptimizationSpec;

/// Numerator guard for relative deviations against a near-zero reference.
const REFERENCE_FLOOR: f64 = 1e-9;

/// Detector configuration with the published defaults: a deviation larger
/// than 10% that lasts two consecutive intervals flags a new phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold: f64,
    pub consecutive_required: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.10,
            consecutive_required: 2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("detector threshold must be in (0, 1)".into()));
        }
        if self.consecutive_required < 1 {
            return Err(Error::Config("detector needs at least one interval".into()));
        }
        Ok(())
    }
}

/// Verdict of one monitoring step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorOutcome {
    Stay,
    NewPhase,
}

/// Compares live measurements against the reference recorded for the chosen
/// knob during the sampling phase.
#[derive(Debug, Clone)]
pub struct PhaseDetector {
    reference_objective: f64,
    reference_constraints: Vec<f64>,
    config: DetectorConfig,
    violation_streak: u32,
}

impl PhaseDetector {
    pub fn new(reference_objective: f64, reference_constraints: Vec<f64>, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            reference_objective,
            reference_constraints,
            config,
            violation_streak: 0,
        })
    }

    pub fn from_choice(choice: &BestChoice, config: DetectorConfig) -> Result<Self> {
        Self::new(choice.objective, choice.constraints.clone(), config)
    }

    /// Max relative deviation across the objective and every constraint.
    fn distance(&self, objective: f64, constraints: &[f64]) -> f64 {
        let rel = |v: f64, reference: f64| (v - reference).abs() / reference.abs().max(REFERENCE_FLOOR);
        let mut d = rel(objective, self.reference_objective);
        for (v, r) in constraints.iter().zip(&self.reference_constraints) {
            d = d.max(rel(*v, *r));
        }
        d
    }

    /// Feeds one monitoring interval's measurements. Deviations beyond the
    /// threshold must persist for `consecutive_required` intervals before a
    /// new phase is declared; any quiet interval resets the streak.
    pub fn monitor_step(&mut self, objective: f64, constraints: &[f64]) -> MonitorOutcome {
        if self.distance(objective, constraints) > self.config.threshold {
            self.violation_streak += 1;
            if self.violation_streak >= self.config.consecutive_required {
                self.violation_streak = 0;
                return MonitorOutcome::NewPhase;
            }
        } else {
            self.violation_streak = 0;
        }
        MonitorOutcome::Stay
    }

    pub fn violation_streak(&self) -> u32 {
        self.violation_streak
    }
}

/// One entry of the controller's structured event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    PhaseStarted {
        phase_index: u32,
    },
    SampleRequested {
        round: usize,
        knob: KnobSetting,
    },
    SampleMeasured {
        round: usize,
        knob: KnobSetting,
        o: f64,
        c: Vec<f64>,
    },
    KnobChosen {
        knob: KnobSetting,
        o_ref: f64,
        c_ref: Vec<f64>,
        feasible: bool,
    },
    MonitorTick {
        o: f64,
        c: Vec<f64>,
    },
    NewPhaseDetected,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub interval: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Serializes an event log as line-delimited JSON records.
pub fn write_event_log(events: &[ControllerEvent], mut w: impl std::io::Write) -> Result<()> {
    for e in events {
        let line = serde_json::to_string(e)
            .map_err(|err| Error::Config(format!("event serialize error: {err}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Server-side knobs for a control session.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub schedule: SamplingSchedule,
    pub detector: DetectorConfig,
    pub seed: u64,
    /// Measurements from prior runs of the same configuration; they inform
    /// the first phase's models without consuming sampling rounds.
    pub warm_start: Vec<Measurement>,
}

impl ControllerConfig {
    pub fn new(schedule: SamplingSchedule, seed: u64) -> Self {
        Self {
            schedule,
            detector: DetectorConfig::default(),
            seed,
            warm_start: Vec::new(),
        }
    }
}

/// A workload the controller can actuate and observe, one measurement
/// interval at a time.
pub trait Workload {
    fn spec(&self) -> &OptimizationSpec;
    fn space(&self) -> &KnobSpace;
    fn set_knob(&mut self, knob: &KnobSetting) -> Result<()>;
    /// Runs one interval under the current knob. Returns the measured
    /// objective and constraints, or None when the workload has ended.
    fn measure_interval(&mut self) -> Result<Option<(f64, Vec<f64>)>>;
}

/// Runs one sampling phase to completion: N rounds of pick/apply/measure,
/// then the best-choice commit. Returns early with a best-so-far choice if
/// the workload ends mid-phase (None when it ends before any measurement).
pub fn run_phase(
    workload: &mut dyn Workload,
    sampler: &mut SamplerState,
    events: &mut Vec<ControllerEvent>,
    interval: &mut u64,
) -> Result<Option<BestChoice>> {
    while !sampler.is_complete() {
        let round = sampler.next_round();
        let knob = sampler.next_sample()?;
        events.push(ControllerEvent {
            interval: *interval,
            kind: EventKind::SampleRequested {
                round,
                knob: knob.clone(),
            },
        });
        workload.set_knob(&knob)?;
        let Some((o, c)) = workload.measure_interval()? else {
            // Workload ended mid-sampling: commit the best seen so far.
            let choice = if sampler.history().is_empty() {
                None
            } else {
                Some(sampler.select_best()?)
            };
            return Ok(choice);
        };
        sampler.record(knob.clone(), o, c.clone())?;
        events.push(ControllerEvent {
            interval: *interval,
            kind: EventKind::SampleMeasured { round, knob, o, c },
        });
        *interval += 1;
    }
    Ok(Some(sampler.select_best()?))
}

/// The full online loop of a session: sample, commit, monitor, re-sample on
/// phase change, until the workload ends. Returns the event log.
pub fn control_loop(workload: &mut dyn Workload, config: &ControllerConfig) -> Result<Vec<ControllerEvent>> {
    config.detector.validate()?;
    let mut events = Vec::new();
    let mut interval: u64 = 0;
    let mut phase_index: u32 = 0;

    'phases: loop {
        events.push(ControllerEvent {
            interval,
            kind: EventKind::PhaseStarted { phase_index },
        });
        // Warm-start data applies to the first phase only: after a detected
        // phase change the old surfaces are exactly what became stale.
        let warm = if phase_index == 0 {
            config.warm_start.clone()
        } else {
            Vec::new()
        };
        let mut sampler = SamplerState::new(
            config.schedule,
            workload.space().clone(),
            workload.spec().clone(),
            config.seed.wrapping_add(phase_index as u64),
            warm,
        )?;
        let choice = match run_phase(workload, &mut sampler, &mut events, &mut interval)? {
            Some(c) => c,
            None => break 'phases, // ended before the first measurement
        };
        if sampler.history().len() < config.schedule.total_rounds {
            // Truncated phase: apply best-so-far and stop.
            workload.set_knob(&choice.knob)?;
            events.push(ControllerEvent {
                interval,
                kind: EventKind::KnobChosen {
                    knob: choice.knob.clone(),
                    o_ref: choice.objective,
                    c_ref: choice.constraints.clone(),
                    feasible: choice.feasible,
                },
            });
            break 'phases;
        }
        workload.set_knob(&choice.knob)?;
        events.push(ControllerEvent {
            interval,
            kind: EventKind::KnobChosen {
                knob: choice.knob.clone(),
                o_ref: choice.objective,
                c_ref: choice.constraints.clone(),
                feasible: choice.feasible,
            },
        });
        let mut detector = PhaseDetector::from_choice(&choice, config.detector)?;

        loop {
            let Some((o, c)) = workload.measure_interval()? else {
                break 'phases;
            };
            events.push(ControllerEvent {
                interval,
                kind: EventKind::MonitorTick { o, c: c.clone() },
            });
            let outcome = detector.monitor_step(o, &c);
            interval += 1;
            if outcome == MonitorOutcome::NewPhase {
                events.push(ControllerEvent {
                    interval: interval - 1,
                    kind: EventKind::NewPhaseDetected,
                });
                phase_index += 1;
                continue 'phases;
            }
        }
    }

    events.push(ControllerEvent {
        interval,
        kind: EventKind::Finished,
    });
    Ok(events)
}

/// A simulator-backed workload: knob actuation is instant, each measurement
/// consumes one simulated interval, noise is keyed by (seed, interval).
#[derive(Debug)]
pub struct SimWorkload {
    scenario: crate::simulator::Scenario,
    spec: OptimizationSpec,
    stream_seed: u64,
    knob: KnobSetting,
    interval: u64,
    /// Timeline of (interval, knob applied) for post-hoc analysis.
    applied: Vec<(u64, KnobSetting)>,
}

impl SimWorkload {
    pub fn new(
        scenario: crate::simulator::Scenario,
        spec: OptimizationSpec,
        stream_seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        spec.validate()?;
        if spec.constraints.len() != scenario.num_constraints() {
            return Err(Error::Config(format!(
                "spec has {} constraints, scenario exposes {}",
                spec.constraints.len(),
                scenario.num_constraints()
            )));
        }
        let knob = scenario.space.default_setting.clone();
        Ok(Self {
            scenario,
            spec,
            stream_seed,
            knob,
            interval: 0,
            applied: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &crate::simulator::Scenario {
        &self.scenario
    }

    /// Knob that was active during each elapsed interval.
    pub fn applied_timeline(&self) -> &[(u64, KnobSetting)] {
        &self.applied
    }

    pub fn elapsed_intervals(&self) -> u64 {
        self.interval
    }
}

impl Workload for SimWorkload {
    fn spec(&self) -> &OptimizationSpec {
        &self.spec
    }

    fn space(&self) -> &KnobSpace {
        &self.scenario.space
    }

    fn set_knob(&mut self, knob: &KnobSetting) -> Result<()> {
        if !self.scenario.space.contains(knob) {
            return Err(Error::Contract(format!("knob {knob} not in space")));
        }
        self.knob = knob.clone();
        Ok(())
    }

    fn measure_interval(&mut self) -> Result<Option<(f64, Vec<f64>)>> {
        if self.interval >= self.scenario.total_intervals() {
            return Ok(None);
        }
        let (o, c) = self
            .scenario
            .measure_at(self.stream_seed, self.interval, &self.knob)?;
        self.applied.push((self.interval, self.knob.clone()));
        self.interval += 1;
        Ok(Some((o, c)))
    }
}

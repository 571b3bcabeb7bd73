//! The user-facing optimization problem: which metric to optimize, in which
//! direction, and which metrics must stay on which side of a set point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintDirection {
    /// Metric must stay strictly below the set point (e.g. a power cap).
    Below,
    /// Metric must stay strictly above the set point (e.g. an FPS floor).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub name: String,
    pub set_point: f64,
    pub direction: ConstraintDirection,
}

impl ConstraintSpec {
    /// Whether a measured value satisfies this constraint (strictly).
    pub fn is_met(&self, value: f64) -> bool {
        match self.direction {
            ConstraintDirection::Below => value < self.set_point,
            ConstraintDirection::Above => value > self.set_point,
        }
    }

    /// Positive excess beyond the set point, normalized by |set point|;
    /// zero when the constraint is met.
    pub fn normalized_violation(&self, value: f64) -> f64 {
        let excess = match self.direction {
            ConstraintDirection::Below => value - self.set_point,
            ConstraintDirection::Above => self.set_point - value,
        };
        excess.max(0.0) / self.set_point.abs().max(1e-9)
    }
}

/// A constrained optimization problem: one objective metric and zero or more
/// constraint metrics with set points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSpec {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

impl OptimizationSpec {
    pub fn new(objective: ObjectiveSpec, constraints: Vec<ConstraintSpec>) -> Result<Self> {
        let spec = Self {
            objective,
            constraints,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Shorthand for an unconstrained maximization problem.
    pub fn maximize(name: impl Into<String>) -> Self {
        Self {
            objective: ObjectiveSpec {
                name: name.into(),
                direction: Direction::Maximize,
            },
            constraints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = vec![self.objective.name.as_str()];
        for c in &self.constraints {
            if names.contains(&c.name.as_str()) {
                return Err(Error::Config(format!("duplicate metric name `{}`", c.name)));
            }
            if !c.set_point.is_finite() {
                return Err(Error::Config(format!(
                    "set point for `{}` must be finite",
                    c.name
                )));
            }
            names.push(&c.name);
        }
        Ok(())
    }

    pub fn maximizing(&self) -> bool {
        self.objective.direction == Direction::Maximize
    }

    /// True when `objective_a` is strictly better than `objective_b` in this
    /// problem's direction.
    pub fn is_better(&self, objective_a: f64, objective_b: f64) -> bool {
        match self.objective.direction {
            Direction::Maximize => objective_a > objective_b,
            Direction::Minimize => objective_a < objective_b,
        }
    }

    /// All constraints met by a measured constraint vector.
    pub fn all_met(&self, constraint_values: &[f64]) -> bool {
        self.constraints
            .iter()
            .zip(constraint_values)
            .all(|(c, &v)| c.is_met(v))
    }

    /// Sum of normalized violations across constraints.
    pub fn total_violation(&self, constraint_values: &[f64]) -> f64 {
        self.constraints
            .iter()
            .zip(constraint_values)
            .map(|(c, &v)| c.normalized_violation(v))
            .sum()
    }
}

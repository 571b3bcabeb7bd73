//! Discrete knob spaces.
//!
//! A knob space is the Cartesian grid spanned by a list of named dimensions,
//! each holding an ordered set of discrete numeric levels (core counts,
//! frequency steps, batch sizes, ...). A setting is a vector of per-dimension
//! indices into that grid. Searching happens in index space; the unit-cube
//! mapping below is what surrogate models and Latin hypercube sampling see.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tunable dimension: a name plus its ordered discrete levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnobDimension {
    pub name: String,
    pub values: Vec<f64>,
}

impl KnobDimension {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::Config(format!("dimension `{name}` has no values")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "dimension `{name}` values must be strictly increasing"
            )));
        }
        Ok(Self { name, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A point in a knob space, stored as per-dimension value indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnobSetting {
    pub indices: Vec<usize>,
}

impl KnobSetting {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    /// Total per-dimension index steps between two settings.
    ///
    /// This is the switch-cost proxy: each index step is one actuation step
    /// (one core more/less, one frequency notch).
    pub fn manhattan_distance(&self, other: &KnobSetting) -> usize {
        self.indices
            .iter()
            .zip(&other.indices)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }
}

impl std::fmt::Display for KnobSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, idx) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, ")")
    }
}

/// The Cartesian grid of all knob dimensions plus the workload's default
/// setting (the one used when no controller is attached).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnobSpace {
    pub dimensions: Vec<KnobDimension>,
    #[serde(rename = "default")]
    pub default_setting: KnobSetting,
}

impl KnobSpace {
    pub fn new(dimensions: Vec<KnobDimension>, default_setting: KnobSetting) -> Result<Self> {
        let space = Self {
            dimensions,
            default_setting,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() {
            return Err(Error::Config("knob space has no dimensions".into()));
        }
        for (i, dim) in self.dimensions.iter().enumerate() {
            if self.dimensions[..i].iter().any(|d| d.name == dim.name) {
                return Err(Error::Config(format!(
                    "duplicate dimension name `{}`",
                    dim.name
                )));
            }
            if dim.values.is_empty() {
                return Err(Error::Config(format!("dimension `{}` has no values", dim.name)));
            }
            if dim.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "dimension `{}` values must be strictly increasing",
                    dim.name
                )));
            }
        }
        if !self.contains(&self.default_setting) {
            return Err(Error::Config(format!(
                "default setting {} is not a valid index vector",
                self.default_setting
            )));
        }
        Ok(())
    }

    pub fn num_dimensions(&self) -> usize {
        self.dimensions.len()
    }

    /// Number of settings in the grid (product of per-dimension counts).
    pub fn size(&self) -> u64 {
        self.dimensions
            .iter()
            .map(|d| d.values.len() as u64)
            .product()
    }

    pub fn contains(&self, setting: &KnobSetting) -> bool {
        setting.indices.len() == self.dimensions.len()
            && setting
                .indices
                .iter()
                .zip(&self.dimensions)
                .all(|(&idx, dim)| idx < dim.values.len())
    }

    /// Actual knob values (not indices) at a setting.
    pub fn values_at(&self, setting: &KnobSetting) -> Result<Vec<f64>> {
        if !self.contains(setting) {
            return Err(Error::Contract(format!(
                "setting {} is not valid in this space",
                setting
            )));
        }
        Ok(setting
            .indices
            .iter()
            .zip(&self.dimensions)
            .map(|(&idx, dim)| dim.values[idx])
            .collect())
    }

    pub fn dimension_index(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    /// All settings in lexicographic index order (first dimension most
    /// significant). This is also the rank order used by tabulated surfaces.
    pub fn iter_settings(&self) -> SettingIter<'_> {
        SettingIter {
            space: self,
            next: Some(KnobSetting::new(vec![0; self.dimensions.len()])),
        }
    }

    /// Lexicographic rank of a setting, the inverse of `iter_settings` order.
    pub fn rank(&self, setting: &KnobSetting) -> Result<u64> {
        if !self.contains(setting) {
            return Err(Error::Contract(format!(
                "setting {setting} is not valid in this space"
            )));
        }
        let mut rank = 0u64;
        for (idx, dim) in setting.indices.iter().zip(&self.dimensions) {
            rank = rank * dim.values.len() as u64 + *idx as u64;
        }
        Ok(rank)
    }

    /// Maps a setting onto the unit cube: index/(count-1) per dimension,
    /// 0.0 for single-value dimensions.
    pub fn normalize(&self, setting: &KnobSetting) -> Result<Vec<f64>> {
        if !self.contains(setting) {
            return Err(Error::Contract(format!(
                "setting {setting} is not valid in this space"
            )));
        }
        Ok(setting
            .indices
            .iter()
            .zip(&self.dimensions)
            .map(|(&idx, dim)| {
                let n = dim.values.len();
                if n == 1 {
                    0.0
                } else {
                    idx as f64 / (n - 1) as f64
                }
            })
            .collect())
    }

    /// Maps a unit-cube point back onto the grid by per-dimension rounding.
    /// Coordinates are clamped to [0, 1]; ties round half up.
    pub fn nearest_setting(&self, point: &[f64]) -> Result<KnobSetting> {
        if point.len() != self.dimensions.len() {
            return Err(Error::Contract(format!(
                "point has {} coordinates, space has {} dimensions",
                point.len(),
                self.dimensions.len()
            )));
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("point has non-finite coordinates".into()));
        }
        let indices = point
            .iter()
            .zip(&self.dimensions)
            .map(|(&c, dim)| {
                let scaled = c.clamp(0.0, 1.0) * (dim.values.len() - 1) as f64;
                // f64::round ties away from zero; coordinates are non-negative
                // here, so this is round-half-up.
                (scaled.round() as usize).min(dim.values.len() - 1)
            })
            .collect();
        Ok(KnobSetting::new(indices))
    }
}

pub struct SettingIter<'a> {
    space: &'a KnobSpace,
    next: Option<KnobSetting>,
}

impl Iterator for SettingIter<'_> {
    type Item = KnobSetting;

    fn next(&mut self) -> Option<KnobSetting> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // Odometer increment, last dimension fastest.
        for d in (0..succ.indices.len()).rev() {
            succ.indices[d] += 1;
            if succ.indices[d] < self.space.dimensions[d].values.len() {
                self.next = Some(succ);
                return Some(current);
            }
            succ.indices[d] = 0;
        }
        // Wrapped around: `current` was the last setting.
        Some(current)
    }
}

/// Joins an application space and a device space into one combined space.
/// Application dimensions come first; the default is the concatenation of
/// both defaults.
pub fn cartesian_product(app_space: &KnobSpace, dev_space: &KnobSpace) -> Result<KnobSpace> {
    for dim in &dev_space.dimensions {
        if app_space.dimension_index(&dim.name).is_some() {
            return Err(Error::Config(format!(
                "duplicate dimension name `{}` across spaces",
                dim.name
            )));
        }
    }
    let mut dimensions = app_space.dimensions.clone();
    dimensions.extend(dev_space.dimensions.iter().cloned());
    let mut indices = app_space.default_setting.indices.clone();
    indices.extend(&dev_space.default_setting.indices);
    KnobSpace::new(dimensions, KnobSetting::new(indices))
}

/// Orders `settings` as a greedy nearest-neighbor tour under Manhattan
/// distance, beginning at `start`. Ties break toward the lexicographically
/// smallest index vector, so the order is deterministic.
///
/// Used for initialization samples: walking nearby settings first keeps
/// actuation steps (core on/off, frequency notches) between successive
/// samples small.
pub fn order_min_switch_distance(
    settings: &[KnobSetting],
    start: &KnobSetting,
) -> Result<Vec<KnobSetting>> {
    if settings.is_empty() {
        return Err(Error::Contract("cannot order an empty setting list".into()));
    }
    let start_pos = settings
        .iter()
        .position(|s| s == start)
        .ok_or_else(|| Error::Contract(format!("start {start} not in setting list")))?;

    let mut remaining: Vec<&KnobSetting> = settings.iter().collect();
    let mut ordered = Vec::with_capacity(settings.len());
    ordered.push(remaining.swap_remove(start_pos).clone());

    while !remaining.is_empty() {
        let current = ordered.last().expect("ordered is non-empty");
        let mut best = 0;
        for i in 1..remaining.len() {
            let d_i = current.manhattan_distance(remaining[i]);
            let d_best = current.manhattan_distance(remaining[best]);
            if d_i < d_best || (d_i == d_best && remaining[i] < remaining[best]) {
                best = i;
            }
        }
        ordered.push(remaining.swap_remove(best).clone());
    }
    Ok(ordered)
}

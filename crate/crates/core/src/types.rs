//! Domain types shared across the crate: feature vectors, schemas,
//! coalitions of players and additive attribution vectors.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of players a [`Coalition`] can hold.
pub const MAX_PLAYERS: usize = 64;

/// A point in the model's input space. Values are finite 64-bit reals;
/// categorical features are expected to be integer coded upstream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "feature {i} has non-finite value {v}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Bitwise key, suitable for grouping identical points.
    pub(crate) fn bit_key(&self) -> Vec<u64> {
        // +0.0 and -0.0 compare equal but differ in bits.
        self.0
            .iter()
            .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
            .collect()
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        FeatureVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        FeatureVector::new(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>, kinds: Vec<FeatureKind>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("schema needs at least one feature".into()));
        }
        if names.len() != kinds.len() {
            return Err(Error::Schema(format!(
                "{} feature names but {} feature kinds",
                names.len(),
                kinds.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Schema(format!("feature {i} has an empty name")));
            }
            if names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate feature name `{name}`")));
            }
        }
        Ok(FeatureSchema { names, kinds })
    }

    /// Schema with names `x0..x{m-1}`, all of the same kind.
    pub fn anonymous(m: usize, kind: FeatureKind) -> Result<Self> {
        FeatureSchema::new((0..m).map(|i| format!("x{i}")).collect(), vec![kind; m])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn all_discrete(&self) -> bool {
        self.kinds.iter().all(|k| *k == FeatureKind::Discrete)
    }

    pub fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Schema(format!(
                "vector has {} values, schema has {} features",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Copy of this schema with different feature kinds.
    pub fn with_kinds(&self, kinds: Vec<FeatureKind>) -> Result<Self> {
        FeatureSchema::new(self.names.clone(), kinds)
    }
}

/// A set of players (feature indices), stored as a 64-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn empty() -> Self {
        Coalition(0)
    }

    /// All players `0..m`.
    pub fn grand(m: usize) -> Self {
        assert!(m <= MAX_PLAYERS, "at most {MAX_PLAYERS} players");
        if m == MAX_PLAYERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << m) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(Coalition(0), |c, i| c.with(i))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_PLAYERS && self.0 & (1u64 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        assert!(i < MAX_PLAYERS, "player index {i} out of range");
        Coalition(self.0 | (1u64 << i))
    }

    pub fn without(self, i: usize) -> Self {
        assert!(i < MAX_PLAYERS, "player index {i} out of range");
        Coalition(self.0 & !(1u64 << i))
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    /// Players of `0..m` not in this coalition.
    pub fn complement(self, m: usize) -> Self {
        Coalition(!self.0 & Coalition::grand(m).0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.members().collect()
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

/// Additive attribution: `baseline + sum(per_feature)` reconstructs the
/// explained prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub baseline: f64,
    pub per_feature: Vec<f64>,
}

impl AttributionVector {
    pub fn new(baseline: f64, per_feature: Vec<f64>) -> Result<Self> {
        if !baseline.is_finite() || per_feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(
                "attribution contains a non-finite entry".into(),
            ));
        }
        Ok(AttributionVector {
            baseline,
            per_feature,
        })
    }

    pub fn len(&self) -> usize {
        self.per_feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_feature.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.baseline + self.per_feature.iter().sum::<f64>()
    }
}

/// The vector that agrees with `x` on `present` and with `r` elsewhere.
pub fn composite_input(
    x: &FeatureVector,
    r: &FeatureVector,
    present: Coalition,
) -> Result<FeatureVector> {
    if x.len() != r.len() {
        return Err(Error::Schema(format!(
            "input has {} values, reference has {}",
            x.len(),
            r.len()
        )));
    }
    Ok(composite_unchecked(x.values(), r.values(), present))
}

pub(crate) fn composite_unchecked(x: &[f64], r: &[f64], present: Coalition) -> FeatureVector {
    FeatureVector(
        x.iter()
            .zip(r)
            .enumerate()
            .map(|(i, (xi, ri))| if present.contains(i) { *xi } else { *ri })
            .collect(),
    )
}

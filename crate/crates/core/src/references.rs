//! Reference distributions: the inputs that absent features are drawn from.
//!
//! A [`ReferenceSource`] can always be sampled with a seed. Finite sources
//! can also be enumerated exactly as `(point, probability)` pairs, which is
//! what the exact toy reproductions and the decomposition checks rely on.

use std::collections::HashMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{FeatureKind, FeatureSchema, FeatureVector};

/// Upper bound on the support size an enumeration may produce.
pub const MAX_ENUMERATION: usize = 1 << 20;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Rows over a schema, with a probability per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<FeatureVector>,
    weights: Vec<f64>,
    explicit_weights: bool,
}

impl Dataset {
    /// Builds a dataset. Without explicit weights every row gets `1/N`.
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<FeatureVector>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            schema.check(row).map_err(|e| e.at_row(i))?;
        }
        let explicit_weights = weights.is_some();
        let weights = match weights {
            Some(w) => {
                if w.len() != rows.len() {
                    return Err(Error::Schema(format!(
                        "{} weights for {} rows",
                        w.len(),
                        rows.len()
                    )));
                }
                if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::InvalidValue(format!("row weight {bad} is negative or non-finite")));
                }
                let total: f64 = w.iter().sum();
                if !rows.is_empty() && (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                    return Err(Error::InvalidValue(format!("row weights sum to {total}, not 1")));
                }
                w
            }
            None => vec![1.0 / rows.len().max(1) as f64; rows.len()],
        };
        Ok(Dataset {
            schema,
            rows,
            weights,
            explicit_weights,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_explicit_weights(&self) -> bool {
        self.explicit_weights
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Same rows under a new schema (e.g. overridden feature kinds).
    pub fn with_schema(mut self, schema: FeatureSchema) -> Result<Self> {
        if schema.len() != self.schema.len() {
            return Err(Error::Schema("replacement schema changes the feature count".into()));
        }
        self.schema = schema;
        Ok(self)
    }

    /// Rows with positive weight, identical rows merged, in first-seen order.
    pub fn support(&self) -> Vec<(FeatureVector, f64)> {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut out: Vec<(FeatureVector, f64)> = Vec::new();
        for (row, &w) in self.rows.iter().zip(&self.weights) {
            if w <= 0.0 {
                continue;
            }
            match index.get(&row.bit_key()) {
                Some(&i) => out[i].1 += w,
                None => {
                    index.insert(row.bit_key(), out.len());
                    out.push((row.clone(), w));
                }
            }
        }
        out
    }

    /// Distinct observed values of feature `i`, ascending.
    pub fn distinct_values(&self, i: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r[i]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| a == b);
        v
    }
}

/// Per-feature support of a uniform reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformAxis {
    Range { min: f64, max: f64 },
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum SourceKind {
    Empirical(Dataset),
    JointMarginal {
        schema: FeatureSchema,
        /// Per feature: (value, probability) with positive probability.
        marginals: Vec<Vec<(f64, f64)>>,
    },
    Uniform(Vec<UniformAxis>),
    Filtered {
        dataset: Dataset,
        description: String,
    },
    SinglePoint(FeatureVector),
}

/// A seeded-sampleable distribution over feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSource {
    kind: SourceKind,
}

impl ReferenceSource {
    /// The (weighted) empirical distribution of a dataset.
    pub fn empirical(dataset: Dataset) -> Result<Self> {
        if !dataset.weights().iter().any(|w| *w > 0.0) {
            return Err(Error::EmptySource);
        }
        Ok(ReferenceSource {
            kind: SourceKind::Empirical(dataset),
        })
    }

    /// Product of the per-feature marginals of a dataset.
    pub fn joint_marginal(dataset: &Dataset) -> Result<Self> {
        let m = dataset.schema().len();
        let mut marginals = vec![Vec::<(f64, f64)>::new(); m];
        for (row, &w) in dataset.rows().iter().zip(dataset.weights()) {
            if w <= 0.0 {
                continue;
            }
            for (i, marginal) in marginals.iter_mut().enumerate() {
                let v = row[i];
                match marginal.iter_mut().find(|(u, _)| *u == v) {
                    Some(entry) => entry.1 += w,
                    None => marginal.push((v, w)),
                }
            }
        }
        if marginals.iter().any(|m| m.is_empty()) {
            return Err(Error::EmptySource);
        }
        Ok(ReferenceSource {
            kind: SourceKind::JointMarginal {
                schema: dataset.schema().clone(),
                marginals,
            },
        })
    }

    pub fn uniform(axes: Vec<UniformAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptySource);
        }
        for (i, axis) in axes.iter().enumerate() {
            match axis {
                UniformAxis::Range { min, max } => {
                    if !min.is_finite() || !max.is_finite() {
                        return Err(Error::InvalidValue(format!("feature {i} has an unbounded range")));
                    }
                    if min > max {
                        return Err(Error::InvalidRange {
                            feature: i,
                            min: *min,
                            max: *max,
                        });
                    }
                }
                UniformAxis::Values(values) => {
                    if values.is_empty() {
                        return Err(Error::EmptySource);
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidValue(format!("feature {i} has a non-finite value")));
                    }
                }
            }
        }
        Ok(ReferenceSource {
            kind: SourceKind::Uniform(axes),
        })
    }

    /// Uniform distribution over the space a dataset spans: observed
    /// `[min, max]` for continuous features, observed values for discrete ones.
    pub fn uniform_from_dataset(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptySource);
        }
        let axes = dataset
            .schema()
            .kinds()
            .iter()
            .enumerate()
            .map(|(i, kind)| {
                let values = dataset.distinct_values(i);
                match kind {
                    FeatureKind::Discrete => UniformAxis::Values(values),
                    FeatureKind::Continuous => UniformAxis::Range {
                        min: values[0],
                        max: values[values.len() - 1],
                    },
                }
            })
            .collect();
        ReferenceSource::uniform(axes)
    }

    pub fn single_point(point: FeatureVector) -> Self {
        ReferenceSource {
            kind: SourceKind::SinglePoint(point),
        }
    }

    pub fn arity(&self) -> usize {
        match &self.kind {
            SourceKind::Empirical(d) => d.schema().len(),
            SourceKind::JointMarginal { schema, .. } => schema.len(),
            SourceKind::Uniform(axes) => axes.len(),
            SourceKind::Filtered { dataset, .. } => dataset.schema().len(),
            SourceKind::SinglePoint(p) => p.len(),
        }
    }

    /// Whether [`enumerate_weighted`] can produce the exact support.
    pub fn is_finite(&self) -> bool {
        match &self.kind {
            SourceKind::Uniform(axes) => axes.iter().all(|a| matches!(a, UniformAxis::Values(_))),
            _ => true,
        }
    }

    /// Short machine-readable label of the source kind.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            SourceKind::Empirical(_) => "empirical",
            SourceKind::JointMarginal { .. } => "joint-marginal",
            SourceKind::Uniform(_) => "uniform",
            SourceKind::Filtered { .. } => "filtered",
            SourceKind::SinglePoint(_) => "point",
        }
    }

    /// The restricted dataset of a filtered source.
    pub fn filtered_dataset(&self) -> Option<&Dataset> {
        match &self.kind {
            SourceKind::Filtered { dataset, .. } => Some(dataset),
            _ => None,
        }
    }
}

impl fmt::Display for ReferenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SourceKind::Filtered { description, .. } => write!(f, "filtered:{description}"),
            SourceKind::SinglePoint(p) => write!(f, "point:{:?}", p.values()),
            _ => f.write_str(self.kind_name()),
        }
    }
}

/// Draws `n` i.i.d. references. Identical `(src, n, seed)` give identical output.
pub fn sample_references(src: &ReferenceSource, n: usize, seed: u64) -> Result<Vec<FeatureVector>> {
    if n == 0 {
        return Err(Error::InvalidArgument("reference sample size must be at least 1".into()));
    }
    let mut rng = stats::rng(seed);
    match &src.kind {
        SourceKind::Empirical(dataset) | SourceKind::Filtered { dataset, .. } => {
            let index = WeightedIndex::new(dataset.weights()).map_err(|_| Error::EmptySource)?;
            Ok((0..n)
                .map(|_| dataset.rows()[index.sample(&mut rng)].clone())
                .collect())
        }
        SourceKind::JointMarginal { marginals, .. } => {
            let samplers = marginals
                .iter()
                .map(|m| WeightedIndex::new(m.iter().map(|p| p.1)).map_err(|_| Error::EmptySource))
                .collect::<Result<Vec<_>>>()?;
            Ok((0..n)
                .map(|_| {
                    let values = marginals
                        .iter()
                        .zip(&samplers)
                        .map(|(m, s)| m[s.sample(&mut rng)].0)
                        .collect();
                    FeatureVector::new(values).expect("marginal values are finite")
                })
                .collect())
        }
        SourceKind::Uniform(axes) => Ok((0..n)
            .map(|_| {
                let values = axes
                    .iter()
                    .map(|axis| match axis {
                        UniformAxis::Range { min, max } => {
                            if min == max {
                                *min
                            } else {
                                min + (max - min) * rng.random::<f64>()
                            }
                        }
                        UniformAxis::Values(vals) => vals[rng.random_range(0..vals.len())],
                    })
                    .collect();
                FeatureVector::new(values).expect("uniform values are finite")
            })
            .collect()),
        SourceKind::SinglePoint(p) => Ok(vec![p.clone(); n]),
    }
}

/// Complete support of a finite source with probabilities summing to 1.
pub fn enumerate_weighted(src: &ReferenceSource) -> Result<Vec<(FeatureVector, f64)>> {
    match &src.kind {
        SourceKind::Empirical(dataset) | SourceKind::Filtered { dataset, .. } => Ok(dataset.support()),
        SourceKind::SinglePoint(p) => Ok(vec![(p.clone(), 1.0)]),
        SourceKind::JointMarginal { marginals, .. } => cartesian(marginals),
        SourceKind::Uniform(axes) => {
            let lists = axes
                .iter()
                .enumerate()
                .map(|(i, axis)| match axis {
                    UniformAxis::Values(values) => {
                        let p = 1.0 / values.len() as f64;
                        Ok(values.iter().map(|v| (*v, p)).collect())
                    }
                    UniformAxis::Range { .. } => Err(Error::NotEnumerable(format!(
                        "uniform source has a continuous range on feature {i}"
                    ))),
                })
                .collect::<Result<Vec<Vec<(f64, f64)>>>>()?;
            let mut support = cartesian(&lists)?;
            // Equal weighting: one division instead of a product of factors.
            let p = 1.0 / support.len() as f64;
            support.iter_mut().for_each(|e| e.1 = p);
            Ok(support)
        }
    }
}

fn cartesian(axes: &[Vec<(f64, f64)>]) -> Result<Vec<(FeatureVector, f64)>> {
    let size = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|s| *s <= MAX_ENUMERATION)
        .ok_or_else(|| {
            Error::NotEnumerable(format!("support exceeds {MAX_ENUMERATION} points"))
        })?;
    let mut out = Vec::with_capacity(size);
    let mut counter = vec![0usize; axes.len()];
    for _ in 0..size {
        let values: Vec<f64> = counter.iter().zip(axes).map(|(&c, a)| a[c].0).collect();
        let p: f64 = counter.iter().zip(axes).map(|(&c, a)| a[c].1).product();
        out.push((FeatureVector::new(values).expect("finite support"), p));
        for k in (0..axes.len()).rev() {
            counter[k] += 1;
            if counter[k] < axes[k].len() {
                break;
            }
            counter[k] = 0;
        }
    }
    Ok(out)
}

/// Restricts a dataset to the rows accepted by `predicate(row, score)`,
/// renormalizing their weights. `scores[j]` is the model score of row `j`.
pub fn filter_references<P>(
    dataset: &Dataset,
    scores: &[f64],
    description: &str,
    predicate: P,
) -> Result<ReferenceSource>
where
    P: Fn(&FeatureVector, f64) -> bool,
{
    if scores.len() != dataset.len() {
        return Err(Error::Schema(format!(
            "{} scores for {} rows",
            scores.len(),
            dataset.len()
        )));
    }
    let positive = dataset.weights().iter().filter(|w| **w > 0.0).count();
    let kept: Vec<usize> = (0..dataset.len())
        .filter(|&j| dataset.weights()[j] > 0.0 && predicate(&dataset.rows()[j], scores[j]))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyContrastClass(description.to_string()));
    }
    let rows = kept.iter().map(|&j| dataset.rows()[j].clone()).collect();
    let raw: Vec<f64> = kept.iter().map(|&j| dataset.weights()[j]).collect();
    let weights = if kept.len() == positive {
        raw
    } else {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let filtered = Dataset {
        schema: dataset.schema().clone(),
        rows,
        weights,
        explicit_weights: true,
    };
    Ok(ReferenceSource {
        kind: SourceKind::Filtered {
            dataset: filtered,
            description: description.to_string(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompareOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl CompareOp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
            CompareOp::Eq => a == b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterSubject {
    Feature(String),
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterValue {
    Constant(f64),
    /// Quantile of the dataset's model scores (linear interpolation).
    Quantile(f64),
}

/// One threshold clause: `<feature|score> <op> <const|quantile(q)>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterExpr {
    pub subject: FilterSubject,
    pub op: CompareOp,
    pub value: FilterValue,
}

impl FilterExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("bad filter `{text}`: {why}"));
        let (pos, op, len) = ["<=", ">=", "==", "<", ">"]
            .iter()
            .find_map(|sym| text.find(sym).map(|p| (p, *sym, sym.len())))
            .ok_or_else(|| bad("expected one of <, <=, >, >=, =="))?;
        let op = match op {
            "<=" => CompareOp::Le,
            ">=" => CompareOp::Ge,
            "==" => CompareOp::Eq,
            "<" => CompareOp::Lt,
            _ => CompareOp::Gt,
        };
        let lhs = text[..pos].trim();
        let rhs = text[pos + len..].trim();
        if lhs.is_empty() {
            return Err(bad("missing left-hand side"));
        }
        let subject = if lhs == "score" {
            FilterSubject::Score
        } else {
            FilterSubject::Feature(lhs.to_string())
        };
        let value = if let Some(inner) = rhs.strip_prefix("quantile(").and_then(|r| r.strip_suffix(')')) {
            if subject != FilterSubject::Score {
                return Err(bad("quantile thresholds apply to `score` only"));
            }
            let q: f64 = inner.trim().parse().map_err(|_| bad("quantile level is not a number"))?;
            if !(0.0..=1.0).contains(&q) {
                return Err(bad("quantile level must lie in [0, 1]"));
            }
            FilterValue::Quantile(q)
        } else {
            let c: f64 = rhs.parse().map_err(|_| bad("threshold is not a number"))?;
            if !c.is_finite() {
                return Err(bad("threshold must be finite"));
            }
            FilterValue::Constant(c)
        };
        Ok(FilterExpr { subject, op, value })
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            FilterSubject::Feature(name) => f.write_str(name)?,
            FilterSubject::Score => f.write_str("score")?,
        }
        write!(f, " {} ", self.op.symbol())?;
        match self.value {
            FilterValue::Constant(c) => write!(f, "{c}"),
            FilterValue::Quantile(q) => write!(f, "quantile({q})"),
        }
    }
}

/// Applies a conjunction of filter clauses to a dataset with row scores.
pub fn filter_by_exprs(dataset: &Dataset, scores: &[f64], exprs: &[FilterExpr]) -> Result<ReferenceSource> {
    let mut resolved = Vec::with_capacity(exprs.len());
    for expr in exprs {
        let index = match &expr.subject {
            FilterSubject::Feature(name) => Some(dataset.schema().index_of(name).ok_or_else(|| {
                Error::InvalidArgument(format!("filter names unknown feature `{name}`"))
            })?),
            FilterSubject::Score => None,
        };
        let threshold = match expr.value {
            FilterValue::Constant(c) => c,
            FilterValue::Quantile(q) => {
                if scores.is_empty() {
                    return Err(Error::EmptySource);
                }
                stats::quantile(scores, q)
            }
        };
        resolved.push((index, expr.op, threshold));
    }
    let description = exprs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" && ");
    filter_references(dataset, scores, &description, |row, score| {
        resolved.iter().all(|(index, op, threshold)| {
            let lhs = match index {
                Some(i) => row[*i],
                None => score,
            };
            op.apply(lhs, *threshold)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn toy_dataset() -> Dataset {
        Dataset::new(
            crate::models::toy_schema(),
            vec![fv(&[0., 0.]), fv(&[0., 1.]), fv(&[1., 0.]), fv(&[1., 1.])],
            Some(vec![0.1, 0.0, 0.4, 0.5]),
        )
        .unwrap()
    }

    fn as_map(support: &[(FeatureVector, f64)]) -> Vec<(Vec<f64>, f64)> {
        let mut v: Vec<(Vec<f64>, f64)> = support.iter().map(|(p, w)| (p.values().to_vec(), *w)).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }

    fn frequency(samples: &[FeatureVector], target: &[f64]) -> f64 {
        samples.iter().filter(|s| s.values() == target).count() as f64 / samples.len() as f64
    }

    #[test]
    fn single_point_samples_and_enumerates() {
        let src = ReferenceSource::single_point(fv(&[0., 0.]));
        assert_eq!(sample_references(&src, 3, 99).unwrap(), vec![fv(&[0., 0.]); 3]);
        let src = ReferenceSource::single_point(fv(&[1., 1.]));
        assert_eq!(enumerate_weighted(&src).unwrap(), vec![(fv(&[1., 1.]), 1.0)]);
    }

    #[test]
    fn empirical_sampling_frequency() {
        let src = ReferenceSource::empirical(toy_dataset()).unwrap();
        let s = sample_references(&src, 100_000, 7).unwrap();
        assert!((frequency(&s, &[1., 1.]) - 0.5).abs() <= 0.01);
        assert_eq!(frequency(&s, &[0., 1.]), 0.0);
    }

    #[test]
    fn joint_marginal_sampling_frequency() {
        let src = ReferenceSource::joint_marginal(&toy_dataset()).unwrap();
        let s = sample_references(&src, 100_000, 7).unwrap();
        assert!((frequency(&s, &[0., 1.]) - 0.05).abs() <= 0.01);
    }

    #[test]
    fn joint_marginal_enumeration() {
        let src = ReferenceSource::joint_marginal(&toy_dataset()).unwrap();
        let support = as_map(&enumerate_weighted(&src).unwrap());
        let expected = [([0., 0.], 0.05), ([0., 1.], 0.05), ([1., 0.], 0.45), ([1., 1.], 0.45)];
        assert_eq!(support.len(), 4);
        for ((p, w), (ep, ew)) in support.iter().zip(expected) {
            assert_eq!(p.as_slice(), &ep);
            assert!((w - ew).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_enumeration() {
        let axes = vec![UniformAxis::Values(vec![0., 1.]); 2];
        let src = ReferenceSource::uniform(axes).unwrap();
        let support = enumerate_weighted(&src).unwrap();
        assert_eq!(support.len(), 4);
        assert!(support.iter().all(|(_, w)| *w == 0.25));
    }

    #[test]
    fn uniform_range_is_not_enumerable_but_samples_inside() {
        let src = ReferenceSource::uniform(vec![UniformAxis::Range { min: -1.0, max: 2.0 }]).unwrap();
        assert!(!src.is_finite());
        assert!(matches!(enumerate_weighted(&src), Err(Error::NotEnumerable(_))));
        let s = sample_references(&src, 1000, 1).unwrap();
        assert!(s.iter().all(|v| (-1.0..=2.0).contains(&v[0])));
    }

    #[test]
    fn invalid_bounds_and_empty_sources() {
        let err = ReferenceSource::uniform(vec![UniformAxis::Range { min: 1.0, max: 0.0 }]).unwrap_err();
        assert!(matches!(err, Error::InvalidRange { feature: 0, .. }));
        let empty = Dataset::new(crate::models::toy_schema(), vec![], None).unwrap();
        assert!(matches!(ReferenceSource::empirical(empty.clone()), Err(Error::EmptySource)));
        assert!(matches!(ReferenceSource::joint_marginal(&empty), Err(Error::EmptySource)));
        let src = ReferenceSource::single_point(fv(&[0., 0.]));
        assert!(sample_references(&src, 0, 1).is_err());
    }

    #[test]
    fn uniform_from_dataset_uses_observed_space() {
        let schema = FeatureSchema::new(
            vec!["a".into(), "b".into()],
            vec![FeatureKind::Discrete, FeatureKind::Continuous],
        )
        .unwrap();
        let d = Dataset::new(schema, vec![fv(&[2., 0.5]), fv(&[0., -1.5]), fv(&[2., 3.0])], None).unwrap();
        let src = ReferenceSource::uniform_from_dataset(&d).unwrap();
        assert_eq!(
            src.kind,
            SourceKind::Uniform(vec![
                UniformAxis::Values(vec![0., 2.]),
                UniformAxis::Range { min: -1.5, max: 3.0 }
            ])
        );
    }

    #[test]
    fn filter_on_male_zero() {
        let d = toy_dataset();
        let src = filter_references(&d, &[0.0; 4], "male == 0", |r, _| r[0] == 0.0).unwrap();
        assert_eq!(enumerate_weighted(&src).unwrap(), vec![(fv(&[0., 0.]), 1.0)]);
    }

    #[test]
    fn filter_true_is_identity() {
        let d = toy_dataset();
        let src = filter_references(&d, &[0.0; 4], "true", |_, _| true).unwrap();
        let empirical = ReferenceSource::empirical(d).unwrap();
        assert_eq!(enumerate_weighted(&src).unwrap(), enumerate_weighted(&empirical).unwrap());

        let again = filter_references(src.filtered_dataset().unwrap(), &[0.0; 3], "true", |_, _| true).unwrap();
        assert_eq!(
            again.filtered_dataset().unwrap().weights(),
            src.filtered_dataset().unwrap().weights()
        );
        assert_eq!(enumerate_weighted(&again).unwrap(), enumerate_weighted(&src).unwrap());
    }

    #[test]
    fn filter_without_match_is_named_error() {
        let d = toy_dataset();
        let err = filter_references(&d, &[0.0; 4], "male > 5", |r, _| r[0] > 5.0).unwrap_err();
        assert_eq!(err.class(), "empty-contrast-class");
    }

    #[test]
    fn score_quantile_filter_keeps_top_fifteen() {
        let schema = FeatureSchema::anonymous(1, FeatureKind::Continuous).unwrap();
        // Scores are a shuffled 0..100 so ordering does not line up with rows.
        let scores: Vec<f64> = (0..100).map(|j| ((j * 37) % 100) as f64).collect();
        let rows = (0..100).map(|j| fv(&[j as f64])).collect();
        let d = Dataset::new(schema, rows, None).unwrap();

        // Oracle: sort and count rows at or above the interpolated 85th percentile.
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let pos = 0.85 * 99.0;
        let threshold = sorted[84] + (sorted[85] - sorted[84]) * (pos - 84.0);
        let expected = scores.iter().filter(|s| **s >= threshold).count();
        assert_eq!(expected, 15);

        let exprs = vec![FilterExpr::parse("score >= quantile(0.85)").unwrap()];
        let src = filter_by_exprs(&d, &scores, &exprs).unwrap();
        assert_eq!(enumerate_weighted(&src).unwrap().len(), 15);
    }

    #[test]
    fn quantile_ties_are_all_kept() {
        let schema = FeatureSchema::anonymous(1, FeatureKind::Continuous).unwrap();
        let rows = (0..10).map(|j| fv(&[j as f64])).collect();
        let d = Dataset::new(schema, rows, None).unwrap();
        let scores = [0., 0., 0., 0., 0., 0., 0., 1., 1., 1.];
        let exprs = vec![FilterExpr::parse("score >= quantile(0.9)").unwrap()];
        let src = filter_by_exprs(&d, &scores, &exprs).unwrap();
        assert_eq!(enumerate_weighted(&src).unwrap().len(), 3);
    }

    #[test]
    fn filter_expression_parsing() {
        let e = FilterExpr::parse("male == 1").unwrap();
        assert_eq!(e.subject, FilterSubject::Feature("male".into()));
        assert_eq!(e.op, CompareOp::Eq);
        assert_eq!(e.value, FilterValue::Constant(1.0));
        assert_eq!(FilterExpr::parse("score<=0.3").unwrap().op, CompareOp::Le);
        assert!(FilterExpr::parse("male ~ 1").is_err());
        assert!(FilterExpr::parse("male >= quantile(0.5)").is_err());
        assert!(FilterExpr::parse("score >= quantile(1.5)").is_err());
        assert_eq!(e.to_string(), "male == 1");
    }

    #[test]
    fn conjunction_of_filters() {
        let d = toy_dataset();
        let scores = [0.0, 0.0, 1.0, 1.0];
        let exprs = vec![
            FilterExpr::parse("male >= 1").unwrap(),
            FilterExpr::parse("lift < 1").unwrap(),
        ];
        let src = filter_by_exprs(&d, &scores, &exprs).unwrap();
        assert_eq!(enumerate_weighted(&src).unwrap(), vec![(fv(&[1., 0.]), 1.0)]);
        assert_eq!(src.to_string(), "filtered:male >= 1 && lift < 1");
    }

    #[test]
    fn independent_dataset_joint_marginal_equals_empirical() {
        // Product-form weights: P(a) = (0.3, 0.7), P(b) = (0.6, 0.4).
        let pa = [0.3, 0.7];
        let pb = [0.6, 0.4];
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for (a, wa) in pa.iter().enumerate() {
            for (b, wb) in pb.iter().enumerate() {
                rows.push(fv(&[a as f64, b as f64]));
                weights.push(wa * wb);
            }
        }
        let d = Dataset::new(crate::models::toy_schema(), rows, Some(weights)).unwrap();
        let jm = as_map(&enumerate_weighted(&ReferenceSource::joint_marginal(&d).unwrap()).unwrap());
        let emp = as_map(&enumerate_weighted(&ReferenceSource::empirical(d).unwrap()).unwrap());
        assert_eq!(jm.len(), emp.len());
        for (a, b) in jm.iter().zip(&emp) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_converges_to_enumeration() {
        let d = toy_dataset();
        let sources = vec![
            ReferenceSource::empirical(d.clone()).unwrap(),
            ReferenceSource::joint_marginal(&d).unwrap(),
            ReferenceSource::uniform_from_dataset(&d).unwrap(),
        ];
        for src in sources {
            let support = enumerate_weighted(&src).unwrap();
            let total: f64 = support.iter().map(|s| s.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let samples = sample_references(&src, 100_000, 11).unwrap();
            let tv: f64 = support
                .iter()
                .map(|(p, w)| (frequency(&samples, p.values()) - w).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "{src}: tv {tv}");
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let src = ReferenceSource::joint_marginal(&toy_dataset()).unwrap();
        assert_eq!(sample_references(&src, 50, 3).unwrap(), sample_references(&src, 50, 3).unwrap());
        assert_ne!(sample_references(&src, 50, 3).unwrap(), sample_references(&src, 50, 4).unwrap());
    }

    #[test]
    fn dataset_weight_validation() {
        let rows = vec![fv(&[0., 0.]), fv(&[1., 1.])];
        assert!(Dataset::new(crate::models::toy_schema(), rows.clone(), Some(vec![0.5, 0.6])).is_err());
        assert!(Dataset::new(crate::models::toy_schema(), rows.clone(), Some(vec![1.5, -0.5])).is_err());
        assert!(Dataset::new(crate::models::toy_schema(), vec![fv(&[1.0])], None).is_err());
    }
}

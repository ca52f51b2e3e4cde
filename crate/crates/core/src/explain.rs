//! Per-reference attribution distributions and their summaries.
//!
//! An explanation against a reference distribution is the mean of the
//! Shapley vectors of single-reference games, one per reference. Keeping the
//! whole sample (rather than only the mean) gives confidence intervals,
//! quantiles and cluster summaries for free.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::games::single_reference_payoff;
use crate::models::{predict, predict_one, ModelHandle};
use crate::references::{enumerate_weighted, sample_references, ReferenceSource, MAX_ENUMERATION};
use crate::shapley::EstimatorSpec;
use crate::stats::{self, mix_seed};
use crate::types::{AttributionVector, FeatureSchema, FeatureVector};

/// Sub-seed stream used for drawing the references themselves.
const REFERENCE_STREAM: u64 = u64::MAX;

/// Quantile levels carried by every summary.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Attribution vectors of single-reference games, one row per reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionSample {
    /// `f(x)` of the explained input.
    pub prediction: f64,
    pub rows: Vec<AttributionVector>,
    /// Reference of each row; empty when rows do not come from single
    /// references (the conditional game).
    pub references: Vec<FeatureVector>,
    /// Row probabilities: `1/N` for sampled references, the exact support
    /// probabilities for enumerated ones.
    pub weights: Vec<f64>,
    pub enumerated: bool,
    pub estimator: EstimatorSpec,
    pub master_seed: u64,
}

impl AttributionSample {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Probability-weighted mean attribution, baseline included.
    pub fn mean(&self) -> AttributionVector {
        let m = self.arity();
        let mut per_feature = vec![0.0; m];
        let mut baseline = 0.0;
        for (row, w) in self.rows.iter().zip(&self.weights) {
            baseline += w * row.baseline;
            for (acc, v) in per_feature.iter_mut().zip(&row.per_feature) {
                *acc += w * v;
            }
        }
        AttributionVector { baseline, per_feature }
    }

    /// Rows at `indices`, with weights renormalized.
    pub fn subset(&self, indices: &[usize]) -> AttributionSample {
        let mass: f64 = indices.iter().map(|&j| self.weights[j]).sum();
        AttributionSample {
            prediction: self.prediction,
            rows: indices.iter().map(|&j| self.rows[j].clone()).collect(),
            references: indices.iter().filter_map(|&j| self.references.get(j).cloned()).collect(),
            weights: indices.iter().map(|&j| self.weights[j] / mass).collect(),
            enumerated: self.enumerated,
            estimator: self.estimator,
            master_seed: self.master_seed,
        }
    }
}

fn row_attribution(
    model: &ModelHandle,
    x: &FeatureVector,
    r: &FeatureVector,
    est: &EstimatorSpec,
    seed: u64,
) -> Result<AttributionVector> {
    let game = single_reference_payoff(model.clone(), x.clone(), r.clone())?;
    let baseline = game.baseline().expect("single-reference games carry f(r)");
    let estimate = est.with_seed(seed).estimate(&game)?;
    AttributionVector::new(baseline, estimate.values)
}

fn attribute_rows(
    model: &ModelHandle,
    x: &FeatureVector,
    refs: &[FeatureVector],
    est: &EstimatorSpec,
    master_seed: u64,
) -> Result<Vec<AttributionVector>> {
    est.validate(x.len())?;
    // Each row owns a sub-seed derived from its index, so the result does
    // not depend on how rows are scheduled across threads.
    refs.par_iter()
        .enumerate()
        .map(|(j, r)| row_attribution(model, x, r, est, mix_seed(master_seed, j as u64)).map_err(|e| e.at_row(j)))
        .collect()
}

/// Samples `n` references and attributes `x` against each of them.
pub fn attribute_distribution(
    model: &ModelHandle,
    x: &FeatureVector,
    src: &ReferenceSource,
    est: &EstimatorSpec,
    n: usize,
    master_seed: u64,
) -> Result<AttributionSample> {
    model.schema().check(x)?;
    let refs = sample_references(src, n, mix_seed(master_seed, REFERENCE_STREAM))?;
    let rows = attribute_rows(model, x, &refs, est, master_seed)?;
    let prediction = predict_one(model.as_ref(), x)?;
    Ok(AttributionSample {
        prediction,
        rows,
        weights: vec![1.0 / n as f64; n],
        references: refs,
        enumerated: false,
        estimator: *est,
        master_seed,
    })
}

/// Attributes `x` against every support point of a finite source, with the
/// exact support probabilities as row weights.
pub fn attribute_enumerated(
    model: &ModelHandle,
    x: &FeatureVector,
    src: &ReferenceSource,
    est: &EstimatorSpec,
    master_seed: u64,
) -> Result<AttributionSample> {
    model.schema().check(x)?;
    let (refs, weights): (Vec<FeatureVector>, Vec<f64>) = enumerate_weighted(src)?.into_iter().unzip();
    let rows = attribute_rows(model, x, &refs, est, master_seed)?;
    let prediction = predict_one(model.as_ref(), x)?;
    Ok(AttributionSample {
        prediction,
        rows,
        references: refs,
        weights,
        enumerated: true,
        estimator: *est,
        master_seed,
    })
}

/// Critical value for a two-sided normal interval. 95% uses the
/// conventional 1.96.
pub fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {confidence} must lie strictly between 0 and 1"
        )));
    }
    if (confidence - 0.95).abs() < 1e-12 {
        return Ok(1.96);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation; absent for enumerated samples, zero for N = 1.
    pub ssd: Option<f64>,
    pub sem: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub quantiles: Quantiles,
}

/// How the confidence interval of a summary was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// Mean ± z·SSD/√N over sampled references, exact rows.
    Sem,
    /// Same formula over jointly sampled references and row estimates.
    UnifiedSem,
    /// Exact expectation over an enumerated source: zero width.
    Exact,
    /// Fewer than two sampled rows, or an enumerated source with noisy rows.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub n: usize,
    pub confidence: f64,
    pub z: f64,
    pub interval: IntervalKind,
    pub baseline: f64,
    pub features: Vec<FeatureSummary>,
}

impl SummaryReport {
    pub fn means(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.mean).collect()
    }
}

/// Mean attribution with per-feature SEM confidence intervals and quantiles.
pub fn mean_with_ci(
    sample: &AttributionSample,
    names: &[String],
    confidence: f64,
    assume_unbiased: bool,
) -> Result<SummaryReport> {
    if sample.is_empty() {
        return Err(Error::EmptySource);
    }
    let m = sample.arity();
    if names.len() != m {
        return Err(Error::Schema(format!("{} names for {m} features", names.len())));
    }
    let z = z_value(confidence)?;
    if !sample.estimator.is_known_unbiased() && !assume_unbiased {
        return Err(Error::UnbiasedAssumptionRequired);
    }
    let n = sample.len();
    let interval = if sample.enumerated && !sample.estimator.is_sampled() {
        IntervalKind::Exact
    } else if n < 2 || sample.enumerated {
        IntervalKind::Undefined
    } else if sample.estimator.is_sampled() {
        IntervalKind::UnifiedSem
    } else {
        IntervalKind::Sem
    };
    let mean = sample.mean();
    let features = (0..m)
        .map(|i| {
            let column: Vec<f64> = sample.rows.iter().map(|r| r.per_feature[i]).collect();
            let mu = mean.per_feature[i];
            let quantiles = if sample.enumerated {
                let q = |p| stats::weighted_quantile(&column, &sample.weights, p);
                Quantiles { p05: q(0.05), p25: q(0.25), p50: q(0.5), p75: q(0.75), p95: q(0.95) }
            } else {
                let mut sorted = column.clone();
                sorted.sort_by(f64::total_cmp);
                let q = |p| stats::quantile_sorted(&sorted, p);
                Quantiles { p05: q(0.05), p25: q(0.25), p50: q(0.5), p75: q(0.75), p95: q(0.95) }
            };
            let (ssd, sem, lo, hi) = match interval {
                IntervalKind::Exact => (None, None, Some(mu), Some(mu)),
                // A single row has no spread to estimate; report zero dispersion
                // but leave the interval undefined.
                IntervalKind::Undefined => (if n == 1 { Some(0.0) } else { None }, None, None, None),
                IntervalKind::Sem | IntervalKind::UnifiedSem => {
                    let ssd = stats::sample_sd(&column).expect("n >= 2");
                    let sem = ssd / (n as f64).sqrt();
                    let half = z * sem;
                    (Some(ssd), Some(sem), Some(mu - half), Some(mu + half))
                }
            };
            FeatureSummary {
                name: names[i].clone(),
                mean: mu,
                ssd,
                sem,
                ci_lo: lo,
                ci_hi: hi,
                quantiles,
            }
        })
        .collect();
    Ok(SummaryReport {
        n,
        confidence,
        z,
        interval,
        baseline: mean.baseline,
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub size_fraction: f64,
    /// Mean reference prediction `φ₀` within the cluster.
    pub mean_baseline: f64,
    pub summary: SummaryReport,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub k: usize,
    pub seed: u64,
    pub iterations: usize,
    pub clusters: Vec<ClusterSummary>,
}

/// Result of weighted k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITERATIONS: usize = 300;
pub const KMEANS_TOLERANCE: f64 = 1e-8;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn draw_weighted(rng: &mut stats::SeededRng, weights: &[f64]) -> Option<usize> {
    use rand::Rng;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return Some(i);
            }
            u -= w;
        }
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// Weighted k-means with k-means++ seeding and Lloyd iterations. Empty
/// clusters are re-seeded with the point farthest from its centroid.
pub fn kmeans(points: &[Vec<f64>], weights: &[f64], k: usize, seed: u64) -> Result<KMeansFit> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} rows"
        )));
    }
    let mut rng = stats::rng(seed);
    let mut chosen = vec![false; n];
    let first = draw_weighted(&mut rng, weights).unwrap_or(0);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .zip(weights)
            .map(|(p, w)| w * nearest(p, &centroids).1)
            .collect();
        let next = draw_weighted(&mut rng, &d2)
            .or_else(|| chosen.iter().position(|c| !c))
            .expect("k <= n leaves an unchosen point");
        chosen[next] = true;
        centroids.push(points[next].clone());
    }

    let dim = points[0].len();
    let mut assignment = vec![0usize; n];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let mut dists = vec![0.0; n];
        for (j, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignment[j] = c;
            dists[j] = d;
        }
        // Re-seed empty clusters from the farthest points.
        for c in 0..k {
            if assignment.iter().any(|&a| a == c) {
                continue;
            }
            let far = (0..n)
                .filter(|&j| assignment.iter().filter(|&&a| a == assignment[j]).count() > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(j) = far {
                assignment[j] = c;
                dists[j] = 0.0;
            }
        }
        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut acc = vec![0.0; dim];
            let mut mass = 0.0;
            for j in (0..n).filter(|&j| assignment[j] == c) {
                mass += weights[j];
                for (a, v) in acc.iter_mut().zip(&points[j]) {
                    *a += weights[j] * v;
                }
            }
            if mass > 0.0 {
                acc.iter_mut().for_each(|a| *a /= mass);
                shift = shift.max(sq_dist(&acc, centroid).sqrt());
                *centroid = acc;
            }
        }
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    for (j, p) in points.iter().enumerate() {
        assignment[j] = nearest(p, &centroids).0;
    }
    Ok(KMeansFit {
        centroids,
        assignment,
        iterations,
    })
}

/// Clusters the per-feature attribution rows (baseline excluded) and
/// summarizes each cluster.
pub fn cluster_summary(
    sample: &AttributionSample,
    names: &[String],
    k: usize,
    seed: u64,
    confidence: f64,
    assume_unbiased: bool,
) -> Result<ClusterReport> {
    let points: Vec<Vec<f64>> = sample.rows.iter().map(|r| r.per_feature.clone()).collect();
    let fit = kmeans(&points, &sample.weights, k, seed)?;
    let total: f64 = sample.weights.iter().sum();
    let mut groups: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..sample.len()).filter(|&j| fit.assignment[j] == c).collect())
        .filter(|g: &Vec<usize>| !g.is_empty())
        .collect();
    let mass = |g: &Vec<usize>| g.iter().map(|&j| sample.weights[j]).sum::<f64>();
    groups.sort_by(|a, b| mass(b).total_cmp(&mass(a)).then(a[0].cmp(&b[0])));
    let clusters = groups
        .into_iter()
        .map(|members| {
            let sub = sample.subset(&members);
            let summary = mean_with_ci(&sub, names, confidence, assume_unbiased)?;
            Ok(ClusterSummary {
                size_fraction: mass(&members) / total,
                mean_baseline: summary.baseline,
                summary,
                members,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterReport {
        k,
        seed,
        iterations: fit.iterations,
        clusters,
    })
}

/// A finite input domain: the cartesian product of per-feature value sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDomain {
    pub values: Vec<Vec<f64>>,
}

impl FiniteDomain {
    /// Product of each feature's observed values; every feature must be
    /// discrete.
    pub fn from_dataset(dataset: &crate::references::Dataset) -> Result<Self> {
        let schema: &FeatureSchema = dataset.schema();
        if !schema.all_discrete() {
            return Err(Error::NotEnumerable(
                "domain has continuous features".into(),
            ));
        }
        Ok(FiniteDomain {
            values: (0..schema.len()).map(|i| dataset.distinct_values(i)).collect(),
        })
    }

    fn size(&self) -> Result<usize> {
        self.values
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
            .filter(|s| *s <= MAX_ENUMERATION && *s > 0)
            .ok_or_else(|| Error::NotEnumerable("domain is empty or too large to enumerate".into()))
    }
}

/// Features whose value never changes the model output anywhere on the
/// domain (the model is constant along every line parallel to that axis).
pub fn insensitivity_audit(model: &ModelHandle, domain: &FiniteDomain) -> Result<Vec<usize>> {
    let m = model.schema().len();
    if domain.values.len() != m {
        return Err(Error::Schema(format!(
            "domain has {} features, model has {m}",
            domain.values.len()
        )));
    }
    let size = domain.size()?;
    let radix: Vec<usize> = domain.values.iter().map(|v| v.len()).collect();
    let digits_of = |mut idx: usize| {
        let mut d = vec![0usize; m];
        for i in (0..m).rev() {
            d[i] = idx % radix[i];
            idx /= radix[i];
        }
        d
    };
    let points: Vec<FeatureVector> = (0..size)
        .map(|idx| {
            let d = digits_of(idx);
            FeatureVector::new((0..m).map(|i| domain.values[i][d[i]]).collect())
        })
        .collect::<Result<_>>()?;
    let out = predict(model.as_ref(), &points)?;
    // stride[i]: index distance between neighbours along feature i.
    let mut stride = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * radix[i + 1];
    }
    Ok((0..m)
        .filter(|&i| {
            (0..size).all(|idx| {
                let d = digits_of(idx)[i];
                let base = idx - d * stride[i];
                out[idx] == out[base]
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{toy_schema, ToyKind, ToyModel};
    use crate::references::{Dataset, UniformAxis};
    use crate::shapley::EstimatorKind;
    use std::sync::Arc;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn toy(kind: ToyKind) -> ModelHandle {
        Arc::new(ToyModel::new(kind))
    }

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("x{i}")).collect()
    }

    fn sample_from_rows(rows: &[Vec<f64>]) -> AttributionSample {
        let n = rows.len();
        AttributionSample {
            prediction: 0.0,
            rows: rows.iter().map(|r| AttributionVector::new(0.0, r.clone()).unwrap()).collect(),
            references: vec![fv(&[0.0]); n],
            weights: vec![1.0 / n as f64; n],
            enumerated: false,
            estimator: EstimatorSpec::exact(),
            master_seed: 0,
        }
    }

    fn table1() -> Dataset {
        Dataset::new(
            toy_schema(),
            vec![fv(&[0., 0.]), fv(&[0., 1.]), fv(&[1., 0.]), fv(&[1., 1.])],
            Some(vec![0.1, 0.0, 0.4, 0.5]),
        )
        .unwrap()
    }

    #[test]
    fn ci_for_one_two_three() {
        let s = sample_from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]);
        let r = mean_with_ci(&s, &names(2), 0.95, false).unwrap();
        assert_eq!(r.means(), vec![2.0, 0.0]);
        let f0 = &r.features[0];
        // Independent route: SSD of {1,2,3} is 1, so half-width = 1.96/sqrt(3).
        let half = f0.ci_hi.unwrap() - f0.mean;
        assert!((half - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((half - 1.132).abs() < 5e-4);
        assert_eq!(r.interval, IntervalKind::Sem);
    }

    #[test]
    fn identical_rows_collapse_ci() {
        let s = sample_from_rows(&vec![vec![0.4, -1.0]; 5]);
        let r = mean_with_ci(&s, &names(2), 0.95, false).unwrap();
        for f in &r.features {
            assert_eq!(f.ssd, Some(0.0));
            assert_eq!(f.ci_lo, Some(f.mean));
            assert_eq!(f.ci_hi, Some(f.mean));
        }
    }

    #[test]
    fn single_row_has_undefined_ci() {
        let s = sample_from_rows(&[vec![0.4]]);
        let r = mean_with_ci(&s, &names(1), 0.95, false).unwrap();
        assert_eq!(r.interval, IntervalKind::Undefined);
        assert!(r.features[0].ci_lo.is_none());
        assert_eq!(r.features[0].mean, 0.4);
    }

    #[test]
    fn z_values() {
        assert_eq!(z_value(0.95).unwrap(), 1.96);
        assert!((z_value(0.99).unwrap() - 2.5758293035489).abs() < 1e-9);
        assert!(z_value(1.0).is_err());
    }

    #[test]
    fn sampled_wls_rows_need_assumption() {
        let mut s = sample_from_rows(&[vec![1.0], vec![2.0]]);
        s.estimator = EstimatorSpec::new(
            EstimatorKind::WeightedLeastSquares {
                mode: crate::shapley::WlsMode::Sampled { k: 4, kernel_weighted: true },
            },
            0,
        );
        assert!(matches!(
            mean_with_ci(&s, &names(1), 0.95, false),
            Err(Error::UnbiasedAssumptionRequired)
        ));
        assert!(mean_with_ci(&s, &names(1), 0.95, true).is_ok());
    }

    #[test]
    fn uniform_distribution_mean_near_exact() {
        let src = ReferenceSource::uniform(vec![UniformAxis::Values(vec![0., 1.]); 2]).unwrap();
        let s = attribute_distribution(&toy(ToyKind::Both), &fv(&[1., 1.]), &src, &EstimatorSpec::exact(), 400, 5)
            .unwrap();
        let r = mean_with_ci(&s, &names(2), 0.95, false).unwrap();
        for f in &r.features {
            assert!((f.mean - 0.375).abs() <= 3.0 * f.sem.unwrap(), "{f:?}");
        }
    }

    #[test]
    fn single_point_rows_are_identical() {
        let r = fv(&[0., 1.]);
        let src = ReferenceSource::single_point(r.clone());
        let model = toy(ToyKind::Both);
        let x = fv(&[1., 1.]);
        let s = attribute_distribution(&model, &x, &src, &EstimatorSpec::exact(), 7, 3).unwrap();
        let game = single_reference_payoff(model.clone(), x, r).unwrap();
        let exact = crate::shapley::exact_shapley(&game).unwrap();
        assert!(s.rows.iter().all(|row| row.per_feature == exact));
    }

    #[test]
    fn empirical_f_male_rows() {
        let src = ReferenceSource::empirical(table1()).unwrap();
        let s = attribute_distribution(&toy(ToyKind::Male), &fv(&[1., 1.]), &src, &EstimatorSpec::exact(), 1000, 2)
            .unwrap();
        for (row, r) in s.rows.iter().zip(&s.references) {
            assert_eq!(row.per_feature[1], 0.0);
            let expected = if r[0] == 0.0 { 1.0 } else { 0.0 };
            assert_eq!(row.per_feature[0], expected);
            assert_eq!(row.total(), 1.0);
        }
        let mean = s.mean().per_feature[0];
        assert!((mean - 0.1).abs() < 0.03, "{mean}");
    }

    #[test]
    fn enumerated_sample_has_exact_interval() {
        let src = ReferenceSource::empirical(table1()).unwrap();
        let s = attribute_enumerated(&toy(ToyKind::Male), &fv(&[1., 1.]), &src, &EstimatorSpec::exact(), 0).unwrap();
        let r = mean_with_ci(&s, &names(2), 0.95, false).unwrap();
        assert_eq!(r.interval, IntervalKind::Exact);
        assert!((r.features[0].mean - 0.1).abs() < 1e-12);
        assert!((r.baseline - 0.9).abs() < 1e-12);
        assert_eq!(r.features[0].quantiles.p05, 0.0);
        assert_eq!(r.features[0].quantiles.p95, 1.0);
    }

    #[test]
    fn row_seeds_make_results_thread_independent() {
        let src = ReferenceSource::uniform(vec![UniformAxis::Range { min: 0., max: 1. }; 2]).unwrap();
        let est = EstimatorSpec::new(EstimatorKind::Permutation { k: 3 }, 0);
        let model = toy(ToyKind::Both);
        let x = fv(&[1., 1.]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| attribute_distribution(&model, &x, &src, &est, 64, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn kmeans_k_one_and_k_n() {
        let rows: Vec<Vec<f64>> = (0..6).map(|j| vec![j as f64, (j * j) as f64]).collect();
        let s = sample_from_rows(&rows);
        let global = mean_with_ci(&s, &names(2), 0.95, false).unwrap();
        let one = cluster_summary(&s, &names(2), 1, 3, 0.95, false).unwrap();
        assert_eq!(one.clusters.len(), 1);
        for (a, b) in one.clusters[0].summary.means().iter().zip(global.means()) {
            assert!((a - b).abs() < 1e-12);
        }

        let all = cluster_summary(&s, &names(2), 6, 3, 0.95, false).unwrap();
        assert_eq!(all.clusters.len(), 6);
        for c in &all.clusters {
            assert_eq!(c.members.len(), 1);
            assert!(c.summary.features.iter().all(|f| f.ssd == Some(0.0) && f.ci_lo.is_none()));
        }
        assert!(cluster_summary(&s, &names(2), 7, 3, 0.95, false).is_err());
    }

    #[test]
    fn cluster_means_reconstruct_global_mean() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|j| vec![((j * 7) % 11) as f64 - 5.0, ((j * 3) % 5) as f64])
            .collect();
        let s = sample_from_rows(&rows);
        let global = s.mean();
        let report = cluster_summary(&s, &names(2), 4, 1, 0.95, false).unwrap();
        let fractions: f64 = report.clusters.iter().map(|c| c.size_fraction).sum();
        assert!((fractions - 1.0).abs() < 1e-12);
        for i in 0..2 {
            let recon: f64 = report
                .clusters
                .iter()
                .map(|c| c.size_fraction * c.summary.features[i].mean)
                .sum();
            assert!((recon - global.per_feature[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn insensitivity_audit_examples() {
        let domain = FiniteDomain { values: vec![vec![0., 1.]; 2] };
        assert_eq!(insensitivity_audit(&toy(ToyKind::Male), &domain).unwrap(), vec![1]);
        assert!(insensitivity_audit(&toy(ToyKind::Both), &domain).unwrap().is_empty());
        let constant: ModelHandle = Arc::new(
            crate::models::LinearModel::new(toy_schema(), vec![0.0, 0.0], 0.3, false).unwrap(),
        );
        assert_eq!(insensitivity_audit(&constant, &domain).unwrap(), vec![0, 1]);
    }

    #[test]
    fn audit_rejects_continuous_domain() {
        let schema = toy_schema().with_kinds(vec![crate::types::FeatureKind::Continuous; 2]).unwrap();
        let d = table1().with_schema(schema).unwrap();
        assert!(matches!(FiniteDomain::from_dataset(&d), Err(Error::NotEnumerable(_))));
    }
}

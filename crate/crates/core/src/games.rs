//! Explanation games: set functions over feature coalitions.
//!
//! All constructed games are deterministic set functions with `v(∅) = 0`.
//! Sampled games draw their references once, at construction, and reuse
//! them for every coalition.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{predict, ModelHandle};
use crate::references::{enumerate_weighted, sample_references, Dataset, ReferenceSource};
use crate::types::{composite_unchecked, Coalition, FeatureVector, MAX_PLAYERS};

/// Maximum number of model inputs sent in one batch.
const BATCH_LIMIT: usize = 1 << 16;

/// Raw payoff evaluation, batched over coalitions.
pub trait Payoff: Send + Sync {
    fn arity(&self) -> usize;

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>>;
}

/// A memoized game `v: 2^M -> R` with `v(∅) = 0`.
pub struct GamePayoff {
    arity: usize,
    baseline: Option<f64>,
    payoff: Box<dyn Payoff>,
    memo: Mutex<HashMap<Coalition, f64>>,
    table: OnceLock<Vec<f64>>,
}

impl std::fmt::Debug for GamePayoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GamePayoff")
            .field("arity", &self.arity)
            .field("baseline", &self.baseline)
            .finish_non_exhaustive()
    }
}

impl GamePayoff {
    pub fn new<P: Payoff + 'static>(payoff: P) -> Self {
        let arity = payoff.arity();
        assert!(arity <= MAX_PLAYERS, "games support at most {MAX_PLAYERS} players");
        GamePayoff {
            arity,
            baseline: None,
            payoff: Box::new(payoff),
            memo: Mutex::new(HashMap::new()),
            table: OnceLock::new(),
        }
    }

    fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline = Some(baseline);
        self
    }

    /// Game given by a full payoff table indexed by coalition bitmask.
    /// Entry 0 is ignored; `v(∅)` is always 0.
    pub fn from_table(arity: usize, values: Vec<f64>) -> Result<Self> {
        if arity > 30 || values.len() != 1usize << arity {
            return Err(Error::InvalidArgument(format!(
                "payoff table for {arity} players needs 2^{arity} entries, got {}",
                values.len()
            )));
        }
        Ok(GamePayoff::new(TablePayoff { arity, values }))
    }

    /// The game `alpha * u + beta * w`.
    pub fn linear_combination(alpha: f64, u: Arc<GamePayoff>, beta: f64, w: Arc<GamePayoff>) -> Result<Self> {
        if u.arity() != w.arity() {
            return Err(Error::InvalidArgument("combined games must share their players".into()));
        }
        Ok(GamePayoff::new(LinearPayoff { alpha, u, beta, w }))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Reference-side prediction `φ₀` for explanation games.
    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    fn check(&self, s: Coalition) -> Result<()> {
        if !s.is_subset_of(Coalition::grand(self.arity)) {
            return Err(Error::InvalidArgument(format!(
                "coalition {s:?} names players outside 0..{}",
                self.arity
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, s: Coalition) -> Result<f64> {
        Ok(self.evaluate_many(&[s])?[0])
    }

    pub fn grand_payoff(&self) -> Result<f64> {
        self.evaluate(Coalition::grand(self.arity))
    }

    /// Payoffs of many coalitions, evaluating each distinct uncached
    /// coalition once in a single batch.
    pub fn evaluate_many(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        for &s in coalitions {
            self.check(s)?;
        }
        if let Some(table) = self.table.get() {
            return Ok(coalitions.iter().map(|s| table[s.bits() as usize]).collect());
        }
        let mut missing: Vec<Coalition> = {
            let memo = self.memo.lock().expect("memo lock");
            coalitions
                .iter()
                .copied()
                .filter(|s| !s.is_empty() && !memo.contains_key(s))
                .collect()
        };
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let values = self.payoff.payoffs(&missing)?;
            let mut memo = self.memo.lock().expect("memo lock");
            for (s, v) in missing.into_iter().zip(values) {
                memo.insert(s, v);
            }
        }
        let memo = self.memo.lock().expect("memo lock");
        Ok(coalitions
            .iter()
            .map(|s| if s.is_empty() { 0.0 } else { memo[s] })
            .collect())
    }

    /// Payoffs of all `2^M` coalitions, indexed by bitmask. Cached.
    pub fn table(&self, cap: usize) -> Result<&[f64]> {
        if self.arity > cap {
            return Err(Error::ArityOverCap {
                arity: self.arity,
                cap,
            });
        }
        if let Some(t) = self.table.get() {
            return Ok(t);
        }
        let n = 1usize << self.arity;
        let mut values = vec![0.0; n];
        let chunk = (BATCH_LIMIT / 4).max(1);
        let mut start = 1usize;
        while start < n {
            let end = (start + chunk).min(n);
            let coalitions: Vec<Coalition> = (start..end).map(|b| Coalition::from_bits(b as u64)).collect();
            let chunk_values = self.evaluate_many(&coalitions)?;
            values[start..end].copy_from_slice(&chunk_values);
            start = end;
        }
        // Drop per-coalition memo entries now that the table holds them.
        self.memo.lock().expect("memo lock").clear();
        Ok(self.table.get_or_init(|| values))
    }
}

struct TablePayoff {
    arity: usize,
    values: Vec<f64>,
}

impl Payoff for TablePayoff {
    fn arity(&self) -> usize {
        self.arity
    }

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        Ok(coalitions.iter().map(|s| self.values[s.bits() as usize]).collect())
    }
}

struct LinearPayoff {
    alpha: f64,
    u: Arc<GamePayoff>,
    beta: f64,
    w: Arc<GamePayoff>,
}

impl Payoff for LinearPayoff {
    fn arity(&self) -> usize {
        self.u.arity()
    }

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let a = self.u.evaluate_many(coalitions)?;
        let b = self.w.evaluate_many(coalitions)?;
        Ok(a.iter().zip(&b).map(|(a, b)| self.alpha * a + self.beta * b).collect())
    }
}

/// `v(S) = f(z(x, r, S)) - f(r)`.
struct SingleReferencePayoff {
    model: ModelHandle,
    x: FeatureVector,
    r: FeatureVector,
    fr: f64,
}

impl Payoff for SingleReferencePayoff {
    fn arity(&self) -> usize {
        self.x.len()
    }

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(coalitions.len());
        for chunk in coalitions.chunks(BATCH_LIMIT) {
            let inputs: Vec<FeatureVector> = chunk
                .iter()
                .map(|&s| composite_unchecked(self.x.values(), self.r.values(), s))
                .collect();
            out.extend(predict(self.model.as_ref(), &inputs)?.into_iter().map(|f| f - self.fr));
        }
        Ok(out)
    }
}

/// `v(S) = Σ_j w_j [f(z(x, r_j, S)) - f(r_j)]` over a frozen weighted sample.
struct UnifiedPayoff {
    model: ModelHandle,
    x: FeatureVector,
    refs: Vec<FeatureVector>,
    weights: Vec<f64>,
    ref_preds: Vec<f64>,
}

impl Payoff for UnifiedPayoff {
    fn arity(&self) -> usize {
        self.x.len()
    }

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let per_chunk = (BATCH_LIMIT / self.refs.len()).max(1);
        let mut out = Vec::with_capacity(coalitions.len());
        for chunk in coalitions.chunks(per_chunk) {
            let mut inputs = Vec::with_capacity(chunk.len() * self.refs.len());
            for &s in chunk {
                inputs.extend(
                    self.refs
                        .iter()
                        .map(|r| composite_unchecked(self.x.values(), r.values(), s)),
                );
            }
            let preds = predict(self.model.as_ref(), &inputs)?;
            for block in preds.chunks(self.refs.len()) {
                let v: f64 = block
                    .iter()
                    .zip(&self.ref_preds)
                    .zip(&self.weights)
                    .map(|((fz, fr), w)| w * (fz - fr))
                    .sum();
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// `v(S) = E[f(z(x, R, S)) | R_S = x_S] - E[f(R)]` over exact-match rows.
struct ConditionalPayoff {
    model: ModelHandle,
    x: FeatureVector,
    rows: Vec<FeatureVector>,
    weights: Vec<f64>,
    mean_pred: f64,
}

impl Payoff for ConditionalPayoff {
    fn arity(&self) -> usize {
        self.x.len()
    }

    fn payoffs(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(coalitions.len());
        for &s in coalitions {
            let matching: Vec<usize> = (0..self.rows.len())
                .filter(|&j| s.members().all(|i| self.rows[j][i] == self.x[i]))
                .collect();
            if matching.is_empty() {
                return Err(Error::ConditioningSupport { coalition: s.to_vec() });
            }
            let inputs: Vec<FeatureVector> = matching
                .iter()
                .map(|&j| composite_unchecked(self.x.values(), self.rows[j].values(), s))
                .collect();
            let preds = predict(self.model.as_ref(), &inputs)?;
            let mass: f64 = matching.iter().map(|&j| self.weights[j]).sum();
            let expected: f64 = matching
                .iter()
                .zip(&preds)
                .map(|(&j, f)| self.weights[j] * f)
                .sum::<f64>()
                / mass;
            out.push(expected - self.mean_pred);
        }
        Ok(out)
    }
}

fn check_input(model: &ModelHandle, x: &FeatureVector) -> Result<()> {
    model.schema().check(x)
}

/// The game whose absent features take their values from the single
/// reference `r`. Baseline is `f(r)`.
pub fn single_reference_payoff(model: ModelHandle, x: FeatureVector, r: FeatureVector) -> Result<GamePayoff> {
    check_input(&model, &x)?;
    check_input(&model, &r)?;
    let fr = predict(model.as_ref(), std::slice::from_ref(&r))?[0];
    Ok(GamePayoff::new(SingleReferencePayoff { model, x, r, fr }).with_baseline(fr))
}

/// How a unified game obtains its reference expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Exact expectation over the enumerated support.
    Exact,
    /// `n` references drawn once with `seed`, each weighted `1/n`.
    Sampled { n: usize, seed: u64 },
}

/// The game averaging absent features over a reference distribution.
/// Baseline is `E[f(R)]` under the same (enumerated or sampled) weights.
pub fn unified_payoff(
    model: ModelHandle,
    x: FeatureVector,
    src: &ReferenceSource,
    mode: ReferenceMode,
) -> Result<GamePayoff> {
    check_input(&model, &x)?;
    let (refs, weights): (Vec<FeatureVector>, Vec<f64>) = match mode {
        ReferenceMode::Exact => enumerate_weighted(src)?.into_iter().unzip(),
        ReferenceMode::Sampled { n, seed } => {
            let refs = sample_references(src, n, seed)?;
            let w = 1.0 / n as f64;
            let weights = vec![w; refs.len()];
            (refs, weights)
        }
    };
    if refs.is_empty() {
        return Err(Error::EmptySource);
    }
    for r in &refs {
        check_input(&model, r)?;
    }
    let ref_preds = predict(model.as_ref(), &refs)?;
    let baseline = ref_preds.iter().zip(&weights).map(|(f, w)| w * f).sum();
    Ok(GamePayoff::new(UnifiedPayoff {
        model,
        x,
        refs,
        weights,
        ref_preds,
    })
    .with_baseline(baseline))
}

/// The conditional-expectation game over a discrete dataset, conditioning
/// by exact match on the present features.
pub fn conditional_payoff(model: ModelHandle, x: FeatureVector, dataset: &Dataset) -> Result<GamePayoff> {
    check_input(&model, &x)?;
    if !dataset.schema().all_discrete() {
        return Err(Error::InvalidArgument(
            "the conditional game requires every feature to be discrete".into(),
        ));
    }
    let (rows, weights): (Vec<FeatureVector>, Vec<f64>) = dataset.support().into_iter().unzip();
    if rows.is_empty() {
        return Err(Error::EmptySource);
    }
    let preds = predict(model.as_ref(), &rows)?;
    let mass: f64 = weights.iter().sum();
    let mean_pred = preds.iter().zip(&weights).map(|(f, w)| w * f).sum::<f64>() / mass;
    Ok(GamePayoff::new(ConditionalPayoff {
        model,
        x,
        rows,
        weights,
        mean_pred,
    })
    .with_baseline(mean_pred))
}

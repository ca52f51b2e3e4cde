//! Shapley value computation for [`GamePayoff`] games.
//!
//! [`exact_shapley`] enumerates every coalition. The three estimators trade
//! exactness for cost:
//!
//! * [`permutation_shapley`] averages marginal contributions along random
//!   player orderings. Every single ordering is efficient (it telescopes to
//!   `v(M)`), so the estimate is too.
//! * [`coalition_shapley`] averages importance-weighted marginal
//!   contributions to uniformly drawn coalitions, independently per player.
//! * [`wls_shapley`] solves the Shapley-kernel weighted least-squares problem
//!   with `Σφ = v(M)` as a hard constraint, over all coalitions or a sample.
//!
//! Axiom checks used as test oracles live in [`check_axioms`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::GamePayoff;
use crate::stats::{self, SeededRng};
use crate::types::Coalition;

pub const DEFAULT_EXACT_CAP: usize = 25;

const RANK_TOLERANCE: f64 = 1e-10;

/// Point estimate with the per-feature sample standard deviation of the
/// averaged terms (`None` when fewer than two terms were averaged).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub ssd: Option<Vec<f64>>,
    pub samples: usize,
}

/// `C(n, k)` as a float, exact for the sizes used here.
fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc as f64
}

/// Exact Shapley values with the default arity cap.
pub fn exact_shapley(v: &GamePayoff) -> Result<Vec<f64>> {
    exact_shapley_capped(v, DEFAULT_EXACT_CAP)
}

/// Exact Shapley values by enumeration of all `2^M` coalitions.
pub fn exact_shapley_capped(v: &GamePayoff, cap: usize) -> Result<Vec<f64>> {
    let m = v.arity();
    let table = v.table(cap)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    // weight[s] = 1 / (M * C(M-1, s))
    let weight: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phi = vec![0.0; m];
    for (mask, &vs) in table.iter().enumerate() {
        let w = weight.get(mask.count_ones() as usize).copied().unwrap_or(0.0);
        for (i, p) in phi.iter_mut().enumerate() {
            let bit = 1usize << i;
            if mask & bit == 0 {
                *p += w * (table[mask | bit] - vs);
            }
        }
    }
    Ok(phi)
}

fn mean_and_ssd(terms: &[Vec<f64>], m: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    let k = terms.len();
    let mut mean = vec![0.0; m];
    for t in terms {
        for (acc, v) in mean.iter_mut().zip(t) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= k as f64);
    if k < 2 {
        return (mean, None);
    }
    let mut ss = vec![0.0; m];
    for t in terms {
        for i in 0..m {
            let d = t[i] - mean[i];
            ss[i] += d * d;
        }
    }
    let ssd = ss.iter().map(|s| (s / (k - 1) as f64).sqrt()).collect();
    (mean, Some(ssd))
}

fn fisher_yates(rng: &mut SeededRng, items: &mut [usize]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Monte Carlo estimate from `k` uniformly drawn player orderings.
pub fn permutation_shapley(v: &GamePayoff, k: usize, seed: u64) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::InvalidArgument("permutation estimator needs k >= 1".into()));
    }
    let m = v.arity();
    let mut rng = stats::rng(seed);
    let orderings: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let mut order: Vec<usize> = (0..m).collect();
            fisher_yates(&mut rng, &mut order);
            order
        })
        .collect();
    permutation_shapley_with_orderings(v, &orderings)
}

/// Permutation estimate over the given orderings. With every ordering of
/// the players supplied once this reproduces the exact Shapley values.
pub fn permutation_shapley_with_orderings(v: &GamePayoff, orderings: &[Vec<usize>]) -> Result<Estimate> {
    let m = v.arity();
    if orderings.is_empty() {
        return Err(Error::InvalidArgument("at least one ordering is required".into()));
    }
    for order in orderings {
        let mut seen = vec![false; m];
        if order.len() != m || !order.iter().all(|&i| i < m && !std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument(format!("{order:?} is not an ordering of {m} players")));
        }
    }
    let mut coalitions = Vec::with_capacity(orderings.len() * (m + 1));
    for order in orderings {
        let mut s = Coalition::empty();
        coalitions.push(s);
        for &i in order {
            s = s.with(i);
            coalitions.push(s);
        }
    }
    let values = v.evaluate_many(&coalitions)?;
    let terms: Vec<Vec<f64>> = orderings
        .iter()
        .zip(values.chunks(m + 1))
        .map(|(order, chain)| {
            let mut t = vec![0.0; m];
            for (step, &i) in order.iter().enumerate() {
                t[i] = chain[step + 1] - chain[step];
            }
            t
        })
        .collect();
    let (values, ssd) = mean_and_ssd(&terms, m);
    Ok(Estimate {
        values,
        ssd,
        samples: orderings.len(),
    })
}

/// Importance weight `2^(M-1) / M / C(M-1, |S|)` of a coalition of size
/// `size` not containing the player.
pub fn coalition_weight(m: usize, size: usize) -> f64 {
    2f64.powi(m as i32 - 1) / m as f64 / binomial(m - 1, size)
}

/// Monte Carlo estimate from `k` uniform coalitions per player.
pub fn coalition_shapley(v: &GamePayoff, k: usize, seed: u64) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::InvalidArgument("coalition estimator needs k >= 1".into()));
    }
    let m = v.arity();
    let mut rng = stats::rng(seed);
    let mut draws: Vec<(usize, Coalition)> = Vec::with_capacity(m * k);
    for i in 0..m {
        for _ in 0..k {
            let mut s = Coalition::empty();
            for j in (0..m).filter(|&j| j != i) {
                if rng.random::<bool>() {
                    s = s.with(j);
                }
            }
            draws.push((i, s));
        }
    }
    let coalitions: Vec<Coalition> = draws.iter().flat_map(|&(i, s)| [s, s.with(i)]).collect();
    let values = v.evaluate_many(&coalitions)?;
    let mut terms = vec![vec![0.0; m]; k];
    for (n, (&(i, s), pair)) in draws.iter().zip(values.chunks(2)).enumerate() {
        terms[n % k][i] = coalition_weight(m, s.len()) * (pair[1] - pair[0]);
    }
    let (values, ssd) = mean_and_ssd(&terms, m);
    Ok(Estimate {
        values,
        ssd,
        samples: k,
    })
}

/// Coalition set for the least-squares estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WlsMode {
    /// Every proper coalition with its Shapley-kernel weight.
    Full,
    /// `k` sampled proper coalitions. With `kernel_weighted`, coalitions are
    /// drawn proportionally to the kernel and fitted with unit weights;
    /// otherwise they are drawn uniformly and fitted with kernel weights.
    Sampled { k: usize, kernel_weighted: bool },
}

/// Shapley kernel `(M-1) / (C(M,|S|) |S| (M-|S|))` for a proper coalition.
pub fn shapley_kernel(m: usize, size: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, size) * size as f64 * (m - size) as f64)
}

/// Constrained weighted least squares: minimizes
/// `Σ_S w_S (v(S) - Σ_{i∈S} φ_i)^2` over proper coalitions subject to
/// `Σ_i φ_i = v(M)` (and `v(∅) = 0` implicitly).
pub fn wls_shapley(v: &GamePayoff, mode: WlsMode, seed: u64, cap: usize) -> Result<Vec<f64>> {
    let m = v.arity();
    let grand = v.grand_payoff()?;
    if m <= 1 {
        return Ok(vec![grand; m]);
    }
    let proper = if m < 63 { Some((1u64 << m) - 2) } else { None };
    let (coalitions, weights): (Vec<Coalition>, Vec<f64>) = match mode {
        WlsMode::Sampled { k, .. } if k < m => {
            return Err(Error::InvalidArgument(format!(
                "sampled least squares needs at least {m} coalitions, got {k}"
            )))
        }
        WlsMode::Sampled { k, kernel_weighted } if proper.is_none_or(|p| (k as u64) < p) => {
            sample_wls_coalitions(m, k, kernel_weighted, seed)
        }
        // A sample at least as large as the proper set is replaced by the
        // full system.
        _ => {
            if m > cap {
                return Err(Error::ArityOverCap { arity: m, cap });
            }
            (1..(1u64 << m) - 1)
                .map(|b| {
                    let s = Coalition::from_bits(b);
                    (s, shapley_kernel(m, s.len()))
                })
                .unzip()
        }
    };
    let values = v.evaluate_many(&coalitions)?;

    // Eliminate the last player with the efficiency constraint:
    // Σ_{i∈S} φ_i = Σ_{i<M-1} (z_i - z_last) φ_i + z_last v(M).
    let last = m - 1;
    let mut normal = DMatrix::<f64>::zeros(last, last);
    let mut rhs = DVector::<f64>::zeros(last);
    let mut row = vec![0.0; last];
    for ((s, w), vs) in coalitions.iter().zip(&weights).zip(&values) {
        let z_last = if s.contains(last) { 1.0 } else { 0.0 };
        for (i, x) in row.iter_mut().enumerate() {
            *x = (if s.contains(i) { 1.0 } else { 0.0 }) - z_last;
        }
        let y = vs - z_last * grand;
        for i in 0..last {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += w * row[i] * y;
            for j in 0..last {
                normal[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    let eig = SymmetricEigen::new(normal.clone());
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if !(max_eig > 0.0) || min_eig <= RANK_TOLERANCE * max_eig {
        return Err(Error::UnderDetermined {
            samples: coalitions.len(),
            players: m,
        });
    }
    let solution = normal
        .cholesky()
        .ok_or(Error::UnderDetermined {
            samples: coalitions.len(),
            players: m,
        })?
        .solve(&rhs);
    let mut phi: Vec<f64> = solution.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(grand - rest);
    Ok(phi)
}

fn sample_wls_coalitions(m: usize, k: usize, kernel_weighted: bool, seed: u64) -> (Vec<Coalition>, Vec<f64>) {
    let mut rng = stats::rng(seed);
    let mut coalitions = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    if kernel_weighted {
        // Total kernel mass of size s is C(M,s) * kernel = (M-1) / (s (M-s)).
        let size_mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
        let total: f64 = size_mass.iter().sum();
        let mut players: Vec<usize> = (0..m).collect();
        for _ in 0..k {
            let mut u = rng.random::<f64>() * total;
            let mut size = m - 1;
            for (idx, mass) in size_mass.iter().enumerate() {
                if u < *mass {
                    size = idx + 1;
                    break;
                }
                u -= mass;
            }
            // Partial Fisher-Yates: the first `size` slots form the subset.
            for i in 0..size {
                let j = rng.random_range(i..m);
                players.swap(i, j);
            }
            coalitions.push(Coalition::from_indices(players[..size].iter().copied()));
            weights.push(1.0);
        }
    } else {
        while coalitions.len() < k {
            let s = Coalition::from_indices((0..m).filter(|_| rng.random::<bool>()));
            if s.is_empty() || s.len() == m {
                continue;
            }
            coalitions.push(s);
            weights.push(shapley_kernel(m, s.len()));
        }
    }
    (coalitions, weights)
}

/// Which Shapley estimator to run on each game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Permutation { k: usize },
    CoalitionSampling { k: usize },
    WeightedLeastSquares { mode: WlsMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub seed: u64,
    pub exact_cap: usize,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, seed: u64) -> Self {
        EstimatorSpec {
            kind,
            seed,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }

    pub fn exact() -> Self {
        EstimatorSpec::new(EstimatorKind::Exact, 0)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EstimatorSpec { seed, ..self }
    }

    /// Whether the estimator draws random samples.
    pub fn is_sampled(&self) -> bool {
        !matches!(
            self.kind,
            EstimatorKind::Exact | EstimatorKind::WeightedLeastSquares { mode: WlsMode::Full }
        )
    }

    /// Whether the estimator is known to be unbiased for the Shapley value.
    pub fn is_known_unbiased(&self) -> bool {
        !matches!(
            self.kind,
            EstimatorKind::WeightedLeastSquares { mode: WlsMode::Sampled { .. } }
        )
    }

    /// Whether outputs satisfy `Σφ = v(M)` up to rounding.
    pub fn is_efficient(&self) -> bool {
        !matches!(self.kind, EstimatorKind::CoalitionSampling { .. })
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        match self.kind {
            EstimatorKind::Exact | EstimatorKind::WeightedLeastSquares { mode: WlsMode::Full } => {
                if arity > self.exact_cap {
                    return Err(Error::ArityOverCap {
                        arity,
                        cap: self.exact_cap,
                    });
                }
            }
            EstimatorKind::Permutation { k } | EstimatorKind::CoalitionSampling { k } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("sample count k must be at least 1".into()));
                }
            }
            EstimatorKind::WeightedLeastSquares {
                mode: WlsMode::Sampled { k, .. },
            } => {
                if k < arity {
                    return Err(Error::InvalidArgument(format!(
                        "sampled least squares needs k >= {arity}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn estimate(&self, v: &GamePayoff) -> Result<Estimate> {
        self.validate(v.arity())?;
        match self.kind {
            EstimatorKind::Exact => Ok(Estimate {
                values: exact_shapley_capped(v, self.exact_cap)?,
                ssd: None,
                samples: 0,
            }),
            EstimatorKind::Permutation { k } => permutation_shapley(v, k, self.seed),
            EstimatorKind::CoalitionSampling { k } => coalition_shapley(v, k, self.seed),
            EstimatorKind::WeightedLeastSquares { mode } => Ok(Estimate {
                values: wls_shapley(v, mode, self.seed, self.exact_cap)?,
                ssd: None,
                samples: match mode {
                    WlsMode::Full => 0,
                    WlsMode::Sampled { k, .. } => k,
                },
            }),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Exact => f.write_str("exact"),
            EstimatorKind::Permutation { k } => write!(f, "permutation:{k}"),
            EstimatorKind::CoalitionSampling { k } => write!(f, "coalition:{k}"),
            EstimatorKind::WeightedLeastSquares { mode: WlsMode::Full } => f.write_str("wls"),
            EstimatorKind::WeightedLeastSquares {
                mode: WlsMode::Sampled { k, kernel_weighted },
            } => {
                if *kernel_weighted {
                    write!(f, "wls-kernel:{k}")
                } else {
                    write!(f, "wls:{k}")
                }
            }
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    /// Accepts `exact`, `permutation:<k>`, `coalition:<k>`, `wls`,
    /// `wls:<k>` and `wls-kernel:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let count = || -> Result<usize> {
            let a = arg.ok_or_else(|| Error::InvalidArgument(format!("estimator `{name}` needs `:<k>`")))?;
            let k: usize = a
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad sample count `{a}`")))?;
            if k == 0 {
                return Err(Error::InvalidArgument("sample count must be at least 1".into()));
            }
            Ok(k)
        };
        match name {
            "exact" if arg.is_none() => Ok(EstimatorKind::Exact),
            "permutation" => Ok(EstimatorKind::Permutation { k: count()? }),
            "coalition" => Ok(EstimatorKind::CoalitionSampling { k: count()? }),
            "wls" if arg.is_none() => Ok(EstimatorKind::WeightedLeastSquares { mode: WlsMode::Full }),
            "wls" => Ok(EstimatorKind::WeightedLeastSquares {
                mode: WlsMode::Sampled {
                    k: count()?,
                    kernel_weighted: false,
                },
            }),
            "wls-kernel" => Ok(EstimatorKind::WeightedLeastSquares {
                mode: WlsMode::Sampled {
                    k: count()?,
                    kernel_weighted: true,
                },
            }),
            _ => Err(Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyCheck {
    pub pass: bool,
    pub grand_payoff: f64,
    pub attribution_sum: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerValue {
    pub player: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DummyCheck {
    pub pass: bool,
    pub dummy_players: Vec<usize>,
    pub violations: Vec<PlayerValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryViolation {
    pub players: (usize, usize),
    pub values: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub pass: bool,
    pub interchangeable: Vec<(usize, usize)>,
    pub violations: Vec<SymmetryViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityCheck {
    pub pass: bool,
    pub alpha: f64,
    pub beta: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub tolerance: f64,
    pub efficiency: EfficiencyCheck,
    pub dummy: DummyCheck,
    pub symmetry: SymmetryCheck,
    pub linearity: Option<LinearityCheck>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.efficiency.pass
            && self.dummy.pass
            && self.symmetry.pass
            && self.linearity.as_ref().is_none_or(|l| l.pass)
    }
}

/// Second game and scalars for the linearity check `φ(αu + βw) = αφ(u) + βφ(w)`.
pub struct LinearityProbe<'a> {
    pub other: &'a GamePayoff,
    pub alpha: f64,
    pub beta: f64,
}

pub const AXIOM_TOLERANCE: f64 = 1e-9;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Checks the Shapley axioms for attribution `phi` of game `v`. Dummy and
/// symmetry are decided from the payoff table, so `v` must be within `cap`.
pub fn check_axioms(
    v: &GamePayoff,
    phi: &[f64],
    linearity: Option<LinearityProbe<'_>>,
    cap: usize,
) -> Result<AxiomReport> {
    let m = v.arity();
    if phi.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} attributions for {m} players",
            phi.len()
        )));
    }
    let table = v.table(cap)?;
    let tol = AXIOM_TOLERANCE;

    let grand = table[table.len() - 1];
    let sum: f64 = phi.iter().sum();
    let residual = sum - grand;
    let efficiency = EfficiencyCheck {
        pass: residual.abs() <= tol * (1.0 + grand.abs()),
        grand_payoff: grand,
        attribution_sum: sum,
        residual,
    };

    let dummy_players: Vec<usize> = (0..m)
        .filter(|&i| {
            let bit = 1usize << i;
            (0..table.len())
                .filter(|mask| mask & bit == 0)
                .all(|mask| same(table[mask | bit], table[mask]))
        })
        .collect();
    let dummy_violations: Vec<PlayerValue> = dummy_players
        .iter()
        .filter(|&&i| phi[i].abs() > tol)
        .map(|&i| PlayerValue { player: i, value: phi[i] })
        .collect();
    let dummy = DummyCheck {
        pass: dummy_violations.is_empty(),
        dummy_players,
        violations: dummy_violations,
    };

    let mut interchangeable = Vec::new();
    let mut sym_violations = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let (bi, bj) = (1usize << i, 1usize << j);
            let swap_ok = (0..table.len())
                .filter(|mask| mask & (bi | bj) == 0)
                .all(|mask| same(table[mask | bi], table[mask | bj]));
            if swap_ok {
                interchangeable.push((i, j));
                if (phi[i] - phi[j]).abs() > tol {
                    sym_violations.push(SymmetryViolation {
                        players: (i, j),
                        values: (phi[i], phi[j]),
                    });
                }
            }
        }
    }
    let symmetry = SymmetryCheck {
        pass: sym_violations.is_empty(),
        interchangeable,
        violations: sym_violations,
    };

    let linearity = match linearity {
        None => None,
        Some(probe) => {
            if probe.other.arity() != m {
                return Err(Error::InvalidArgument("linearity probe game has a different arity".into()));
            }
            let other_table = probe.other.table(cap)?;
            let combined: Vec<f64> = table
                .iter()
                .zip(other_table)
                .map(|(a, b)| probe.alpha * a + probe.beta * b)
                .collect();
            let combined = GamePayoff::from_table(m, combined)?;
            let lhs = exact_shapley_capped(&combined, cap)?;
            let phi_other = exact_shapley_capped(probe.other, cap)?;
            let max_deviation = (0..m)
                .map(|i| (lhs[i] - (probe.alpha * phi[i] + probe.beta * phi_other[i])).abs())
                .fold(0.0, f64::max);
            Some(LinearityCheck {
                pass: max_deviation <= tol,
                alpha: probe.alpha,
                beta: probe.beta,
                max_deviation,
            })
        }
    };

    Ok(AxiomReport {
        tolerance: tol,
        efficiency,
        dummy,
        symmetry,
        linearity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Independent oracle: Shapley values as the average marginal
    /// contribution over all M! orderings, by explicit enumeration.
    fn all_orderings_oracle(table: &[f64], m: usize) -> Vec<f64> {
        fn permute(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for idx in 0..rest.len() {
                let p = rest.remove(idx);
                prefix.push(p);
                permute(prefix, rest, out);
                prefix.pop();
                rest.insert(idx, p);
            }
        }
        let mut orders = Vec::new();
        permute(&mut Vec::new(), &mut (0..m).collect(), &mut orders);
        let mut phi = vec![0.0; m];
        for order in &orders {
            let mut mask = 0usize;
            for &i in order {
                phi[i] += table[mask | (1 << i)] - table[mask];
                mask |= 1 << i;
            }
        }
        phi.iter().map(|v| v / orders.len() as f64).collect()
    }

    fn random_game(m: usize, seed: u64) -> GamePayoff {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..1usize << m).map(|_| StandardNormal.sample(&mut rng)).collect();
        values[0] = 0.0;
        GamePayoff::from_table(m, values).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn exact_matches_ordering_enumeration() {
        for (m, seed) in [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)] {
            let g = random_game(m, seed);
            let oracle = all_orderings_oracle(g.table(25).unwrap(), m);
            assert!(max_diff(&exact_shapley(&g).unwrap(), &oracle) < 1e-12);
        }
    }

    #[test]
    fn exact_is_efficient() {
        let g = random_game(8, 10);
        let phi = exact_shapley(&g).unwrap();
        assert!((phi.iter().sum::<f64>() - g.grand_payoff().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn exact_refuses_over_cap() {
        let g = random_game(5, 1);
        let err = exact_shapley_capped(&g, 4).unwrap_err();
        assert!(matches!(err, Error::ArityOverCap { arity: 5, cap: 4 }));
    }

    #[test]
    fn both_orderings_reproduce_exact_for_two_players() {
        let g = random_game(2, 9);
        let est = permutation_shapley_with_orderings(&g, &[vec![0, 1], vec![1, 0]]).unwrap();
        assert!(max_diff(&est.values, &exact_shapley(&g).unwrap()) < 1e-15);
        assert!(permutation_shapley_with_orderings(&g, &[vec![0, 0]]).is_err());
    }

    #[test]
    fn single_ordering_is_efficient() {
        let g = random_game(6, 12);
        for seed in 0..20 {
            let est = permutation_shapley(&g, 1, seed).unwrap();
            assert!(est.ssd.is_none());
            assert!((est.values.iter().sum::<f64>() - g.grand_payoff().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let g = random_game(5, 3);
        assert_eq!(permutation_shapley(&g, 30, 8).unwrap(), permutation_shapley(&g, 30, 8).unwrap());
    }

    #[test]
    fn coalition_estimator_single_player() {
        let g = GamePayoff::from_table(1, vec![0.0, 0.625]).unwrap();
        for k in [1, 7] {
            let est = coalition_shapley(&g, k, 1).unwrap();
            assert_eq!(est.values, vec![0.625]);
        }
    }

    #[test]
    fn coalition_weights_recover_exact_by_enumeration() {
        for seed in 0..10 {
            let m = 4;
            let g = random_game(m, 100 + seed);
            let t = g.table(25).unwrap();
            let exact = exact_shapley(&g).unwrap();
            for i in 0..m {
                let bit = 1usize << i;
                let others: Vec<usize> = (0..1usize << m).filter(|s| s & bit == 0).collect();
                let mean: f64 = others
                    .iter()
                    .map(|&s| coalition_weight(m, s.count_ones() as usize) * (t[s | bit] - t[s]))
                    .sum::<f64>()
                    / others.len() as f64;
                assert!((mean - exact[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimators_are_unbiased_on_random_game() {
        let g = random_game(6, 77);
        let exact = exact_shapley(&g).unwrap();
        type Runner = fn(&GamePayoff, usize, u64) -> Result<Estimate>;
        let runners: [(&str, Runner); 2] = [("permutation", permutation_shapley), ("coalition", coalition_shapley)];
        for (name, run) in runners {
            let runs: Vec<Vec<f64>> = (0..200).map(|s| run(&g, 50, 1000 + s).unwrap().values).collect();
            for i in 0..6 {
                let col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
                let grand = stats::mean(&col);
                let sem = stats::sample_sd(&col).unwrap() / (col.len() as f64).sqrt();
                assert!(
                    (grand - exact[i]).abs() <= 4.0 * sem,
                    "{name} player {i}: {grand} vs {} (sem {sem})",
                    exact[i]
                );
            }
        }
    }

    #[test]
    fn full_wls_matches_exact_on_random_games() {
        for seed in 0..50 {
            let g = random_game(8, 500 + seed);
            let wls = wls_shapley(&g, WlsMode::Full, 0, 25).unwrap();
            let exact = exact_shapley(&g).unwrap();
            assert!(max_diff(&wls, &exact) < 1e-6, "seed {seed}");
            assert!((wls.iter().sum::<f64>() - g.grand_payoff().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_sample_equals_full_wls() {
        let g = random_game(5, 21);
        let full = wls_shapley(&g, WlsMode::Full, 0, 25).unwrap();
        for kernel_weighted in [false, true] {
            let dense = wls_shapley(&g, WlsMode::Sampled { k: 30, kernel_weighted }, 3, 25).unwrap();
            assert!(max_diff(&dense, &full) < 1e-6);
        }
    }

    #[test]
    fn sampled_wls_is_efficient_and_close() {
        let g = random_game(6, 31);
        let exact = exact_shapley(&g).unwrap();
        for kernel_weighted in [false, true] {
            let est = wls_shapley(&g, WlsMode::Sampled { k: 2000, kernel_weighted }, 5, 25).unwrap();
            assert!((est.iter().sum::<f64>() - g.grand_payoff().unwrap()).abs() < 1e-9);
            assert!(max_diff(&est, &exact) < 0.25, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn sampled_wls_rank_deficiency_is_reported() {
        // Fewer draws than players are rejected up front; a small kernel
        // sample can still repeat coalitions and leave the system singular.
        let g = random_game(6, 1);
        let err = wls_shapley(&g, WlsMode::Sampled { k: 3, kernel_weighted: false }, 1, 25).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        let mut found = false;
        for seed in 0..200 {
            if let Err(e) = wls_shapley(&g, WlsMode::Sampled { k: 6, kernel_weighted: true }, seed, 25) {
                assert!(matches!(e, Error::UnderDetermined { .. }));
                found = true;
                break;
            }
        }
        assert!(found, "expected some 6-coalition sample to be rank deficient");
    }

    #[test]
    fn axioms_hold_for_exact_values() {
        for seed in 0..10 {
            let g = random_game(4, seed);
            let w = random_game(4, seed + 1000);
            let phi = exact_shapley(&g).unwrap();
            let report = check_axioms(
                &g,
                &phi,
                Some(LinearityProbe { other: &w, alpha: 2.5, beta: -0.75 }),
                25,
            )
            .unwrap();
            assert!(report.all_pass(), "{report:?}");
        }
    }

    #[test]
    fn perturbed_attribution_fails_efficiency() {
        let g = random_game(3, 2);
        let mut phi = exact_shapley(&g).unwrap();
        phi[1] += 0.01;
        let report = check_axioms(&g, &phi, None, 25).unwrap();
        assert!(!report.efficiency.pass);
        assert!((report.efficiency.residual - 0.01).abs() < 1e-12);
    }

    #[test]
    fn dummy_and_symmetry_detection() {
        // v(S) = |S ∩ {0,1}|: players 0 and 1 are interchangeable, 2 is a dummy.
        let values = (0..8u32).map(|b| (b & 0b011).count_ones() as f64).collect();
        let g = GamePayoff::from_table(3, values).unwrap();
        let phi = exact_shapley(&g).unwrap();
        let report = check_axioms(&g, &phi, None, 25).unwrap();
        assert_eq!(report.dummy.dummy_players, vec![2]);
        assert_eq!(report.symmetry.interchangeable, vec![(0, 1)]);
        assert!(report.all_pass());

        let bad = vec![0.5, 1.5, 0.0];
        let report = check_axioms(&g, &bad, None, 25).unwrap();
        assert!(report.efficiency.pass);
        assert!(!report.symmetry.pass);
        let bad = vec![1.0, 0.9, 0.1];
        assert!(!check_axioms(&g, &bad, None, 25).unwrap().dummy.pass);
    }

    #[test]
    fn scaling_scales_attributions() {
        let g = random_game(5, 40);
        let scaled = GamePayoff::from_table(5, g.table(25).unwrap().iter().map(|v| 3.5 * v).collect()).unwrap();
        let a = exact_shapley(&g).unwrap();
        let b = exact_shapley(&scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((3.5 * x - y).abs() < 1e-12);
        }
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
        assert_eq!(argmax(&a), argmax(&b));
    }

    #[test]
    fn estimator_parsing_round_trips() {
        for s in ["exact", "permutation:20", "coalition:5", "wls", "wls:64", "wls-kernel:64"] {
            let kind: EstimatorKind = s.parse().unwrap();
            assert_eq!(kind.to_string(), s);
        }
        assert!("permutation".parse::<EstimatorKind>().is_err());
        assert!("permutation:0".parse::<EstimatorKind>().is_err());
        assert!("bogus:3".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(24, 12), 2_704_156.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}

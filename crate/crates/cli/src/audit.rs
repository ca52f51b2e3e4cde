//! The `axiom-audit` command.

use std::path::PathBuf;

use serde::Serialize;

use fae_core::explain::{insensitivity_audit, FiniteDomain};
use fae_core::games::{conditional_payoff, single_reference_payoff, unified_payoff, GamePayoff, ReferenceMode};
use fae_core::models::predict_one;
use fae_core::shapley::{check_axioms, exact_shapley_capped, AxiomReport, LinearityProbe};
use fae_core::{Error, FeatureVector, Result};

use crate::config::{AuditArgs, GameKind, InputSpec, ReferenceSpec};
use crate::setup::{prepare, require_seed, Setup};

/// Attributions below this magnitude count as zero for insensitivity.
pub const INSENSITIVITY_TOLERANCE: f64 = 1e-12;

const LINEARITY_ALPHA: f64 = 0.7;
const LINEARITY_BETA: f64 = -1.3;

#[derive(Debug, Clone, Serialize)]
pub struct AuditEcho {
    pub model: Option<String>,
    pub external_model: Option<String>,
    pub data: Option<PathBuf>,
    pub input: InputSpec,
    pub game: GameKind,
    pub reference: ReferenceSpec,
    pub n_references: Option<usize>,
    pub seed: Option<u64>,
    pub exact_cap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureValue {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InsensitivityReport {
    /// Whether the model could be checked over a finite domain.
    pub checked: bool,
    pub skipped_reason: Option<String>,
    pub tolerance: f64,
    /// Features the model output never depends on.
    pub irrelevant: Vec<String>,
    /// Irrelevant features that still received attribution.
    pub violations: Vec<FeatureValue>,
    pub pass: Option<bool>,
    /// The conditional game is known to credit irrelevant features.
    pub known_conditional_violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub report: &'static str,
    pub format_version: u32,
    pub config: AuditEcho,
    pub model: String,
    pub features: Vec<String>,
    pub input: Vec<f64>,
    pub prediction: f64,
    pub baseline: Option<f64>,
    pub game: String,
    pub attributions: Vec<FeatureValue>,
    pub axioms: AxiomReport,
    pub insensitivity: InsensitivityReport,
    pub all_pass: bool,
}

fn build_game(setup: &Setup, args: &AuditArgs, seed: u64) -> Result<(GamePayoff, String)> {
    let g = &args.game;
    match (g.game, &setup.source) {
        (GameKind::Conditional, _) => {
            let data = setup.data.as_ref().expect("conditional game has data");
            Ok((
                conditional_payoff(setup.model.clone(), setup.x.clone(), data)?,
                "conditional:empirical".into(),
            ))
        }
        (GameKind::SingleRef, Some(src)) => {
            let (r, _) = fae_core::references::enumerate_weighted(src)?
                .into_iter()
                .next()
                .ok_or(Error::EmptySource)?;
            Ok((
                single_reference_payoff(setup.model.clone(), setup.x.clone(), r)?,
                format!("single-ref:{src}"),
            ))
        }
        (GameKind::Unified, Some(src)) => {
            let mode = match g.n_references {
                Some(n) => ReferenceMode::Sampled { n, seed },
                None => ReferenceMode::Exact,
            };
            Ok((
                unified_payoff(setup.model.clone(), setup.x.clone(), src, mode)?,
                format!("unified:{src}"),
            ))
        }
        (_, None) => unreachable!("reference games always have a source"),
    }
}

/// Second game for the linearity probe: the single-reference game against
/// the first dataset row, or the origin without data.
fn probe_game(setup: &Setup) -> Result<GamePayoff> {
    let r = match &setup.data {
        Some(d) => d.rows()[0].clone(),
        None => FeatureVector::new(vec![0.0; setup.x.len()])?,
    };
    single_reference_payoff(setup.model.clone(), setup.x.clone(), r)
}

pub fn run_audit(args: &AuditArgs) -> Result<AuditReport> {
    let setup = prepare(&args.game)?;
    let sampled: &[&str] = if args.game.n_references.is_some() {
        &["sampled references"]
    } else {
        &[]
    };
    let seed = require_seed(args.game.seed, sampled)?;
    let m = setup.x.len();
    if m > args.exact_cap {
        return Err(Error::ArityOverCap {
            arity: m,
            cap: args.exact_cap,
        });
    }

    let (game, game_label) = build_game(&setup, args, seed)?;
    let phi = exact_shapley_capped(&game, args.exact_cap)?;
    let probe = probe_game(&setup)?;
    let axioms = check_axioms(
        &game,
        &phi,
        Some(LinearityProbe {
            other: &probe,
            alpha: LINEARITY_ALPHA,
            beta: LINEARITY_BETA,
        }),
        args.exact_cap,
    )?;

    let conditional = args.game.game == GameKind::Conditional;
    let insensitivity = match setup.data.as_ref().map(FiniteDomain::from_dataset) {
        None => skipped("no dataset to enumerate the input domain".into()),
        Some(Err(Error::NotEnumerable(reason))) => skipped(reason),
        Some(Err(e)) => return Err(e),
        Some(Ok(domain)) => match insensitivity_audit(&setup.model, &domain) {
            Err(Error::NotEnumerable(reason)) => skipped(reason),
            Err(e) => return Err(e),
            Ok(irrelevant) => {
                let violations: Vec<FeatureValue> = irrelevant
                    .iter()
                    .filter(|&&i| phi[i].abs() > INSENSITIVITY_TOLERANCE)
                    .map(|&i| FeatureValue {
                        feature: setup.names[i].clone(),
                        value: phi[i],
                    })
                    .collect();
                InsensitivityReport {
                    checked: true,
                    skipped_reason: None,
                    tolerance: INSENSITIVITY_TOLERANCE,
                    irrelevant: irrelevant.iter().map(|&i| setup.names[i].clone()).collect(),
                    pass: Some(violations.is_empty()),
                    known_conditional_violation: conditional && !violations.is_empty(),
                    violations,
                }
            }
        },
    };

    let all_pass = axioms.all_pass() && insensitivity.pass != Some(false);
    Ok(AuditReport {
        report: "axiom-audit",
        format_version: crate::explain::FORMAT_VERSION,
        config: AuditEcho {
            model: args.game.model.clone(),
            external_model: args.game.external_model.clone(),
            data: args.game.data.clone(),
            input: setup.input.clone(),
            game: args.game.game,
            reference: setup.reference.clone(),
            n_references: args.game.n_references,
            seed: args.game.seed,
            exact_cap: args.exact_cap,
        },
        model: setup.model.descriptor(),
        features: setup.names.clone(),
        input: setup.x.values().to_vec(),
        prediction: predict_one(setup.model.as_ref(), &setup.x)?,
        baseline: game.baseline(),
        game: game_label,
        attributions: phi
            .iter()
            .zip(&setup.names)
            .map(|(v, n)| FeatureValue {
                feature: n.clone(),
                value: *v,
            })
            .collect(),
        axioms,
        insensitivity,
        all_pass,
    })
}

fn skipped(reason: String) -> InsensitivityReport {
    InsensitivityReport {
        checked: false,
        skipped_reason: Some(reason),
        tolerance: INSENSITIVITY_TOLERANCE,
        irrelevant: Vec::new(),
        violations: Vec::new(),
        pass: None,
        known_conditional_violation: false,
    }
}

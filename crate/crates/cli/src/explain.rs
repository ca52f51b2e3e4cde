//! The `explain` command.

use std::path::PathBuf;

use serde::Serialize;

use fae_core::explain::{
    attribute_distribution, attribute_enumerated, cluster_summary, mean_with_ci, ClusterReport, Quantiles,
    SummaryReport,
};
use fae_core::games::conditional_payoff;
use fae_core::models::predict_one;
use fae_core::report::format_f64;
use fae_core::stats::mix_seed;
use fae_core::{AttributionSample, AttributionVector, EstimatorSpec, Error, Result};

use crate::config::{parse_estimator, parse_summaries, ExplainArgs, GameKind, InputSpec, ReferenceSpec, SummaryKind};
use crate::setup::{prepare, require_seed, Setup};

/// The analysis settings, echoed into the report. Delivery settings
/// (output paths, thread count) are left out so they cannot change it.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainEcho {
    pub model: Option<String>,
    pub external_model: Option<String>,
    pub data: Option<PathBuf>,
    pub input: InputSpec,
    pub game: GameKind,
    pub reference: ReferenceSpec,
    pub estimator: String,
    pub n_references: Option<usize>,
    pub confidence: f64,
    pub summary: Vec<SummaryKind>,
    pub seed: Option<u64>,
    pub emit_rows: bool,
    pub assume_unbiased: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub description: String,
    pub rows: usize,
    pub enumerated: bool,
}

/// `φ₀ + Σφ̄ᵢ` against `f(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct Additivity {
    pub residual: f64,
    /// Absent when the estimator does not guarantee efficiency.
    pub tolerance: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureQuantiles {
    pub name: String,
    pub quantiles: Quantiles,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowOut {
    pub index: usize,
    pub reference: Option<Vec<f64>>,
    pub weight: f64,
    pub baseline: f64,
    pub attributions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainReport {
    pub report: &'static str,
    pub format_version: u32,
    pub config: ExplainEcho,
    pub model: String,
    pub features: Vec<String>,
    pub input: Vec<f64>,
    pub prediction: f64,
    pub baseline: f64,
    pub reference: ReferenceInfo,
    pub additivity: Additivity,
    pub mean: Option<SummaryReport>,
    pub quantiles: Option<Vec<FeatureQuantiles>>,
    pub clusters: Option<ClusterReport>,
    pub rows: Option<Vec<RowOut>>,
}

pub const FORMAT_VERSION: u32 = 1;
const ADDITIVITY_TOLERANCE: f64 = 1e-9;

/// Result of an explain run: the report and the sample it summarizes.
pub struct ExplainOutput {
    pub report: ExplainReport,
    pub sample: AttributionSample,
}

pub fn run_explain(args: &ExplainArgs) -> Result<ExplainOutput> {
    let kind = parse_estimator(&args.estimator)?;
    let summaries = parse_summaries(&args.summary)?;
    let setup = prepare(&args.game)?;

    let mut sampled = Vec::new();
    if args.game.n_references.is_some() {
        sampled.push("sampled references");
    }
    let estimator = EstimatorSpec::new(kind, 0);
    if estimator.is_sampled() {
        sampled.push("sampled estimator");
    }
    if summaries.iter().any(|s| matches!(s, SummaryKind::Clusters { .. })) {
        sampled.push("k-means seeding");
    }
    let seed = require_seed(args.game.seed, &sampled)?;
    if args.game.game == GameKind::Conditional && args.game.n_references.is_some() {
        return Err(Error::InvalidArgument(
            "the conditional game uses the dataset directly; drop --n-references".into(),
        ));
    }
    fae_core::explain::z_value(args.confidence)?;

    let sample = build_sample(&setup, args, estimator, seed)?;
    let report = summarize(&setup, args, &summaries, &sample, seed)?;
    Ok(ExplainOutput { report, sample })
}

fn build_sample(setup: &Setup, args: &ExplainArgs, est: EstimatorSpec, seed: u64) -> Result<AttributionSample> {
    match &setup.source {
        Some(src) => match args.game.n_references {
            Some(n) => attribute_distribution(&setup.model, &setup.x, src, &est, n, seed),
            None => {
                if !src.is_finite() {
                    return Err(Error::NotEnumerable(format!(
                        "{src} has infinite support; pass --n-references to sample it"
                    )));
                }
                attribute_enumerated(&setup.model, &setup.x, src, &est, seed)
            }
        },
        None => {
            let data = setup.data.as_ref().expect("conditional game has data");
            let game = conditional_payoff(setup.model.clone(), setup.x.clone(), data)?;
            let estimate = est.with_seed(mix_seed(seed, 0)).estimate(&game)?;
            let baseline = game.baseline().expect("conditional game carries E f");
            Ok(AttributionSample {
                prediction: predict_one(setup.model.as_ref(), &setup.x)?,
                rows: vec![AttributionVector::new(baseline, estimate.values)?],
                references: Vec::new(),
                weights: vec![1.0],
                enumerated: true,
                estimator: est,
                master_seed: seed,
            })
        }
    }
}

fn summarize(
    setup: &Setup,
    args: &ExplainArgs,
    summaries: &[SummaryKind],
    sample: &AttributionSample,
    seed: u64,
) -> Result<ExplainReport> {
    let names = &setup.names;
    let overall = mean_with_ci(sample, names, args.confidence, args.assume_unbiased)?;
    let residual = overall.baseline + overall.means().iter().sum::<f64>() - sample.prediction;
    let tolerance = sample
        .estimator
        .is_efficient()
        .then(|| ADDITIVITY_TOLERANCE * sample.prediction.abs().max(1.0));
    let additivity = Additivity {
        residual,
        tolerance,
        holds: tolerance.map(|t| residual.abs() <= t),
    };

    let mut mean = None;
    let mut quantiles = None;
    let mut clusters = None;
    for s in summaries {
        match *s {
            SummaryKind::Mean => mean = Some(overall.clone()),
            SummaryKind::Quantiles => {
                quantiles = Some(
                    overall
                        .features
                        .iter()
                        .map(|f| FeatureQuantiles {
                            name: f.name.clone(),
                            quantiles: f.quantiles.clone(),
                        })
                        .collect(),
                )
            }
            SummaryKind::Clusters { k } => {
                clusters = Some(cluster_summary(
                    sample,
                    names,
                    k,
                    mix_seed(seed, u64::MAX - 1),
                    args.confidence,
                    args.assume_unbiased,
                )?)
            }
        }
    }

    let rows = args.emit_rows.then(|| {
        sample
            .rows
            .iter()
            .enumerate()
            .map(|(j, row)| RowOut {
                index: j,
                reference: sample.references.get(j).map(|r| r.values().to_vec()),
                weight: sample.weights[j],
                baseline: row.baseline,
                attributions: row.per_feature.clone(),
            })
            .collect()
    });

    let description = match &setup.source {
        Some(src) => src.to_string(),
        None => "conditional:empirical".to_string(),
    };
    Ok(ExplainReport {
        report: "explain",
        format_version: FORMAT_VERSION,
        config: ExplainEcho {
            model: args.game.model.clone(),
            external_model: args.game.external_model.clone(),
            data: args.game.data.clone(),
            input: setup.input.clone(),
            game: args.game.game,
            reference: setup.reference.clone(),
            estimator: sample.estimator.kind.to_string(),
            n_references: args.game.n_references,
            confidence: args.confidence,
            summary: summaries.to_vec(),
            seed: args.game.seed,
            emit_rows: args.emit_rows,
            assume_unbiased: args.assume_unbiased,
        },
        model: setup.model.descriptor(),
        features: names.clone(),
        input: setup.x.values().to_vec(),
        prediction: sample.prediction,
        baseline: overall.baseline,
        reference: ReferenceInfo {
            description,
            rows: sample.len(),
            enumerated: sample.enumerated,
        },
        additivity,
        mean,
        quantiles,
        clusters,
        rows,
    })
}

/// Per-reference attributions as CSV, one row per reference, for boxplots.
pub fn write_plot_data<W: std::io::Write>(sample: &AttributionSample, names: &[String], writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["row".to_string(), "weight".to_string(), "baseline".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (j, row) in sample.rows.iter().enumerate() {
        let mut cells = vec![j.to_string(), format_f64(sample.weights[j]), format_f64(row.baseline)];
        cells.extend(row.per_feature.iter().map(|v| format_f64(*v)));
        w.write_record(&cells).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

//! Command-line arguments and their validated form.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fae_core::references::FilterExpr;
use fae_core::shapley::EstimatorKind;
use fae_core::{Error, FeatureVector, Result};

#[derive(Debug, Parser)]
#[command(name = "fae", version, about = "Shapley-value explanations against reference distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain one prediction and write a JSON report.
    Explain(ExplainArgs),
    /// Recompute the two-feature toy attribution table and check it.
    ToyTable(ToyTableArgs),
    /// Check the Shapley axioms and feature insensitivity on one game.
    AxiomAudit(AuditArgs),
    /// Serve a model over the newline-delimited JSON stdio protocol.
    ServeModel(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    SingleRef,
    Unified,
    Conditional,
}

/// Where the model, data, input and references come from.
#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// Model spec file, or a builtin name (`f_male`, `builtin:f_both`).
    #[arg(long, conflicts_with = "external_model")]
    pub model: Option<String>,

    /// Command line of a child process speaking the stdio model protocol.
    #[arg(long)]
    pub external_model: Option<String>,

    /// Per-batch timeout for the external model.
    #[arg(long, default_value_t = 30_000)]
    pub external_timeout_ms: u64,

    /// CSV dataset (header row, optional `__weight__` column).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Explain this row of the dataset (0-based).
    #[arg(long, conflicts_with = "input")]
    pub input_row: Option<usize>,

    /// Explain this comma-separated input vector.
    #[arg(long, allow_hyphen_values = true)]
    pub input: Option<String>,

    #[arg(long, value_enum, default_value = "unified")]
    pub game: GameKind,

    /// empirical | joint-marginal | uniform | filtered:<expr> | point:<v1,v2,..>
    #[arg(long, default_value = "empirical", allow_hyphen_values = true)]
    pub reference: String,

    /// Extra contrast filter clause; repeat for a conjunction.
    #[arg(long = "filter", allow_hyphen_values = true)]
    pub filters: Vec<String>,

    /// Number of sampled references; omit to enumerate a finite source.
    #[arg(long)]
    pub n_references: Option<usize>,

    /// Master seed; required whenever anything is sampled.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// exact | permutation:<k> | coalition:<k> | wls | wls:<k> | wls-kernel:<k>
    #[arg(long, default_value = "exact")]
    pub estimator: String,

    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,

    /// Comma-separated subset of mean, quantiles, clusters:<k>.
    #[arg(long, default_value = "mean,quantiles")]
    pub summary: String,

    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Include every per-reference attribution row in the report.
    #[arg(long)]
    pub emit_rows: bool,

    /// Also write per-reference attributions as CSV.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Accept confidence intervals over rows from estimators that are not
    /// known to be unbiased.
    #[arg(long)]
    pub assume_unbiased: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ToyTableArgs {
    /// Also write the computed table as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Largest game arity solved exactly.
    #[arg(long, default_value_t = fae_core::shapley::DEFAULT_EXACT_CAP)]
    pub exact_cap: usize,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Model spec file or builtin name.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceSpec {
    Empirical,
    JointMarginal,
    Uniform,
    Filtered { clauses: Vec<String> },
    Point { values: Vec<f64> },
}

impl ReferenceSpec {
    pub fn parse(text: &str, extra_filters: &[String]) -> Result<Self> {
        let text = text.trim();
        let spec = if let Some(expr) = text.strip_prefix("filtered:") {
            ReferenceSpec::Filtered {
                clauses: vec![expr.trim().to_string()],
            }
        } else if text == "filtered" {
            ReferenceSpec::Filtered { clauses: Vec::new() }
        } else if let Some(values) = text.strip_prefix("point:") {
            ReferenceSpec::Point {
                values: parse_vector(values)?,
            }
        } else {
            match text {
                "empirical" => ReferenceSpec::Empirical,
                "joint-marginal" => ReferenceSpec::JointMarginal,
                "uniform" => ReferenceSpec::Uniform,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown reference source `{other}`")));
                }
            }
        };
        match spec {
            ReferenceSpec::Filtered { mut clauses } => {
                clauses.extend(extra_filters.iter().map(|f| f.trim().to_string()));
                if clauses.is_empty() {
                    return Err(Error::InvalidArgument("filtered source needs at least one clause".into()));
                }
                for c in &clauses {
                    FilterExpr::parse(c)?;
                }
                Ok(ReferenceSpec::Filtered { clauses })
            }
            // A bare filter list narrows the empirical source.
            ReferenceSpec::Empirical if !extra_filters.is_empty() => {
                ReferenceSpec::parse("filtered", extra_filters)
            }
            other if !extra_filters.is_empty() => Err(Error::InvalidArgument(format!(
                "--filter only applies to empirical or filtered sources, not {}",
                other.name()
            ))),
            other => Ok(other),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceSpec::Empirical => "empirical",
            ReferenceSpec::JointMarginal => "joint-marginal",
            ReferenceSpec::Uniform => "uniform",
            ReferenceSpec::Filtered { .. } => "filtered",
            ReferenceSpec::Point { .. } => "point",
        }
    }
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|cell| {
            f64::from_str(cell.trim())
                .map_err(|_| Error::InvalidArgument(format!("`{}` is not a number", cell.trim())))
        })
        .collect::<Result<Vec<f64>>>()?;
    FeatureVector::new(values.clone())?;
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SummaryKind {
    Mean,
    Quantiles,
    Clusters { k: usize },
}

pub fn parse_summaries(text: &str) -> Result<Vec<SummaryKind>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let kind = match part {
            "mean" => SummaryKind::Mean,
            "quantiles" => SummaryKind::Quantiles,
            other => match other.strip_prefix("clusters:") {
                Some(k) => {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad cluster count in `{other}`")))?;
                    if k == 0 {
                        return Err(Error::InvalidArgument("cluster count must be at least 1".into()));
                    }
                    SummaryKind::Clusters { k }
                }
                None if other == "clusters" => SummaryKind::Clusters { k: 5 },
                None => return Err(Error::InvalidArgument(format!("unknown summary `{other}`"))),
            },
        };
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no summary requested".into()));
    }
    Ok(out)
}

pub fn parse_estimator(text: &str) -> Result<EstimatorKind> {
    text.parse::<EstimatorKind>()
}

/// Exactly one of a row index or an inline vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSpec {
    Row(usize),
    Vector(Vec<f64>),
}

impl InputSpec {
    pub fn from_args(row: Option<usize>, vector: Option<&str>) -> Result<Self> {
        match (row, vector) {
            (Some(r), None) => Ok(InputSpec::Row(r)),
            (None, Some(v)) => Ok(InputSpec::Vector(parse_vector(v)?)),
            _ => Err(Error::InvalidArgument(
                "give exactly one of --input-row or --input".into(),
            )),
        }
    }
}

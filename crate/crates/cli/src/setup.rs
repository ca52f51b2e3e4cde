//! Resolves model, data, input and reference source from the arguments.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use fae_core::data::{load_dataset, CsvSource};
use fae_core::models::{predict, ExternalModel, ModelSpec};
use fae_core::references::{filter_by_exprs, FilterExpr};
use fae_core::{Dataset, Error, FeatureKind, FeatureSchema, FeatureVector, ModelHandle, ReferenceSource, Result};

use crate::config::{GameArgs, GameKind, InputSpec, ReferenceSpec};

pub struct Setup {
    pub model: ModelHandle,
    pub data: Option<Dataset>,
    pub names: Vec<String>,
    pub input: InputSpec,
    pub x: FeatureVector,
    pub reference: ReferenceSpec,
    /// Reference distribution; `None` for the conditional game.
    pub source: Option<ReferenceSource>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A spec file if one exists at `spec`, otherwise a builtin name.
pub fn resolve_model(spec: &str) -> Result<ModelHandle> {
    if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| Error::Model(format!("cannot read model spec `{spec}`: {e}")))?;
        return ModelSpec::parse(&text)?.build();
    }
    let name = spec.strip_prefix("builtin:").unwrap_or(spec);
    if is_identifier(name) {
        return ModelSpec::Builtin { name: name.to_string() }.build();
    }
    Err(Error::Model(format!("model spec `{spec}` not found")))
}

fn anonymous_names(schema: &FeatureSchema) -> bool {
    schema.names().iter().enumerate().all(|(i, n)| *n == format!("x{i}"))
}

pub fn prepare(args: &GameArgs) -> Result<Setup> {
    let data = args
        .data
        .as_ref()
        .map(|p| load_dataset(&CsvSource::new(p)))
        .transpose()?;
    let input = InputSpec::from_args(args.input_row, args.input.as_deref())?;

    let model: ModelHandle = match (&args.model, &args.external_model) {
        (Some(spec), None) => resolve_model(spec)?,
        (None, Some(command)) => {
            let schema = match (&data, &input) {
                (Some(d), _) => d.schema().clone(),
                (None, InputSpec::Vector(v)) => FeatureSchema::anonymous(v.len(), FeatureKind::Continuous)?,
                (None, InputSpec::Row(_)) => {
                    return Err(Error::InvalidArgument("--input-row needs --data".into()));
                }
            };
            if command.trim().is_empty() {
                return Err(Error::InvalidArgument("empty --external-model command".into()));
            }
            let command: Vec<String> = command.split_whitespace().map(String::from).collect();
            let timeout = Duration::from_millis(args.external_timeout_ms);
            Arc::new(ExternalModel::spawn(&command, schema, timeout)?)
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give exactly one of --model or --external-model".into(),
            ))
        }
    };

    let names = match &data {
        Some(d) => {
            let m = model.schema().len();
            if d.schema().len() != m {
                return Err(Error::Schema(format!(
                    "dataset has {} features, model expects {m}",
                    d.schema().len()
                )));
            }
            if !anonymous_names(model.schema()) && model.schema().names() != d.schema().names() {
                return Err(Error::Schema(format!(
                    "dataset columns {:?} do not match model features {:?}",
                    d.schema().names(),
                    model.schema().names()
                )));
            }
            d.schema().names().to_vec()
        }
        None => model.schema().names().to_vec(),
    };

    let x = match &input {
        InputSpec::Row(i) => {
            let d = data
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--input-row needs --data".into()))?;
            d.rows()
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("row {i} is out of range for {} rows", d.len())))?
        }
        InputSpec::Vector(v) => FeatureVector::new(v.clone())?,
    };
    model.schema().check(&x)?;

    let reference = ReferenceSpec::parse(&args.reference, &args.filters)?;
    let need_data = || {
        data.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("the {} reference source needs --data", reference.name()))
        })
    };
    let source = match args.game {
        GameKind::Conditional => {
            if reference != ReferenceSpec::Empirical {
                return Err(Error::InvalidArgument(
                    "the conditional game conditions on the empirical data; drop --reference".into(),
                ));
            }
            need_data()?;
            None
        }
        GameKind::SingleRef => match &reference {
            ReferenceSpec::Point { values } => Some(ReferenceSource::single_point(FeatureVector::new(values.clone())?)),
            _ => {
                return Err(Error::InvalidArgument(
                    "the single-reference game needs --reference point:<values>".into(),
                ))
            }
        },
        GameKind::Unified => Some(match &reference {
            ReferenceSpec::Empirical => ReferenceSource::empirical(need_data()?.clone())?,
            ReferenceSpec::JointMarginal => ReferenceSource::joint_marginal(need_data()?)?,
            ReferenceSpec::Uniform => ReferenceSource::uniform_from_dataset(need_data()?)?,
            ReferenceSpec::Point { values } => ReferenceSource::single_point(FeatureVector::new(values.clone())?),
            ReferenceSpec::Filtered { clauses } => {
                let d = need_data()?;
                let exprs = clauses.iter().map(|c| FilterExpr::parse(c)).collect::<Result<Vec<_>>>()?;
                let scores = predict(model.as_ref(), d.rows())?;
                filter_by_exprs(d, &scores, &exprs)?
            }
        }),
    };
    if let Some(src) = &source {
        if src.arity() != x.len() {
            return Err(Error::Schema(format!(
                "reference has {} features, input has {}",
                src.arity(),
                x.len()
            )));
        }
    }

    Ok(Setup {
        model,
        data,
        names,
        input,
        x,
        reference,
        source,
    })
}

/// Rejects sampled work without an explicit seed.
pub fn require_seed(seed: Option<u64>, what: &[&str]) -> Result<u64> {
    match (seed, what.is_empty()) {
        (Some(s), _) => Ok(s),
        (None, true) => Ok(0),
        (None, false) => Err(Error::InvalidArgument(format!(
            "--seed is required when sampling ({})",
            what.join(", ")
        ))),
    }
}

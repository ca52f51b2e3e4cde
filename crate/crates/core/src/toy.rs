//! The two-feature toy setting: a weighted distribution over
//! `(male, lift) ∈ {0,1}²`, the models `f_male` and `f_both`, and the four
//! classic game formulations applied to the input `(1, 1)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::games::{conditional_payoff, unified_payoff, GamePayoff, ReferenceMode};
use crate::models::{toy_schema, ModelHandle, ToyKind, ToyModel};
use crate::references::{Dataset, ReferenceSource};
use crate::shapley::exact_shapley;
use crate::types::FeatureVector;

/// `(male, lift, probability)` of the toy distribution.
pub const TOY_DISTRIBUTION: [(f64, f64, f64); 4] = [
    (0.0, 0.0, 0.1),
    (0.0, 1.0, 0.0),
    (1.0, 0.0, 0.4),
    (1.0, 1.0, 0.5),
];

pub fn toy_dataset() -> Dataset {
    let rows = TOY_DISTRIBUTION
        .iter()
        .map(|&(m, l, _)| FeatureVector::new(vec![m, l]).expect("finite"))
        .collect();
    let weights = TOY_DISTRIBUTION.iter().map(|t| t.2).collect();
    Dataset::new(toy_schema(), rows, Some(weights)).expect("valid toy distribution")
}

pub fn toy_input() -> FeatureVector {
    FeatureVector::new(vec![1.0, 1.0]).expect("finite")
}

pub fn toy_model(kind: ToyKind) -> ModelHandle {
    Arc::new(ToyModel::new(kind))
}

/// Game formulation, labelled by the method that popularized it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ToyGame {
    /// Conditional expectation over the input distribution.
    #[serde(rename = "SHAP")]
    Conditional,
    /// Unified game over the empirical input distribution.
    #[serde(rename = "KernelSHAP")]
    Empirical,
    /// Unified game over the product of marginals.
    #[serde(rename = "QII")]
    JointMarginal,
    /// Unified game over the uniform distribution on the observed values.
    #[serde(rename = "IME")]
    Uniform,
}

impl ToyGame {
    pub const ALL: [ToyGame; 4] = [
        ToyGame::Conditional,
        ToyGame::Empirical,
        ToyGame::JointMarginal,
        ToyGame::Uniform,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ToyGame::Conditional => "SHAP",
            ToyGame::Empirical => "KernelSHAP",
            ToyGame::JointMarginal => "QII",
            ToyGame::Uniform => "IME",
        }
    }

    /// Reference source of the unified formulations; `None` for the
    /// conditional game.
    pub fn source(self, dataset: &Dataset) -> Result<Option<ReferenceSource>> {
        Ok(match self {
            ToyGame::Conditional => None,
            ToyGame::Empirical => Some(ReferenceSource::empirical(dataset.clone())?),
            ToyGame::JointMarginal => Some(ReferenceSource::joint_marginal(dataset)?),
            ToyGame::Uniform => Some(ReferenceSource::uniform_from_dataset(dataset)?),
        })
    }

    pub fn payoff(self, model: ModelHandle, x: FeatureVector, dataset: &Dataset) -> Result<GamePayoff> {
        match self.source(dataset)? {
            None => conditional_payoff(model, x, dataset),
            Some(src) => unified_payoff(model, x, &src, ReferenceMode::Exact),
        }
    }
}

impl fmt::Display for ToyGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Exact attributions of `(1, 1)` for one game and model.
pub fn toy_attribution(game: ToyGame, model: ToyKind) -> Result<Vec<f64>> {
    let v = game.payoff(toy_model(model), toy_input(), &toy_dataset())?;
    exact_shapley(&v)
}

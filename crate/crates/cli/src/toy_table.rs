//! The `toy-table` command: all sixteen toy attributions, checked against
//! their published rounded values.

use serde::Serialize;

use fae_core::models::ToyKind;
use fae_core::toy::{toy_attribution, ToyGame};
use fae_core::Result;

/// Published values, two features per row, in `ToyGame::ALL` order.
pub const PUBLISHED: [(ToyKind, [[&str; 2]; 4]); 2] = [
    (ToyKind::Male, [["0.05", "0.05"], ["0.10", "0.00"], ["0.10", "0.00"], ["0.50", "0.00"]]),
    (ToyKind::Both, [["0.028", "0.472"], ["0.050", "0.450"], ["0.075", "0.475"], ["0.375", "0.375"]]),
];

const FEATURES: [&str; 2] = ["male", "lift"];

#[derive(Debug, Clone, Serialize)]
pub struct ToyCell {
    pub game: ToyGame,
    pub model: &'static str,
    pub feature: &'static str,
    pub value: f64,
    pub published: &'static str,
    pub rounded: String,
    pub matches: bool,
}

/// `value` rounded to as many decimals as `published` shows.
pub fn round_like(value: f64, published: &str) -> String {
    let decimals = published.split('.').nth(1).map_or(0, str::len);
    let s = format!("{value:.decimals$}");
    // "-0.00" and "0.00" denote the same printed cell.
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn compute_toy_table() -> Result<Vec<ToyCell>> {
    let mut cells = Vec::with_capacity(16);
    for (kind, rows) in PUBLISHED {
        for (game, printed) in ToyGame::ALL.into_iter().zip(rows) {
            let phi = toy_attribution(game, kind)?;
            for (i, published) in printed.into_iter().enumerate() {
                let rounded = round_like(phi[i], published);
                cells.push(ToyCell {
                    game,
                    model: kind.name(),
                    feature: FEATURES[i],
                    value: phi[i],
                    published,
                    matches: rounded == published,
                    rounded,
                });
            }
        }
    }
    Ok(cells)
}

pub fn render(cells: &[ToyCell]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12}{:>10}{:>10}{:>10}{:>10}\n",
        "", "f_male", "", "f_both", ""
    ));
    out.push_str(&format!(
        "{:<12}{:>10}{:>10}{:>10}{:>10}\n",
        "game", "male", "lift", "male", "lift"
    ));
    for game in ToyGame::ALL {
        out.push_str(&format!("{:<12}", game.label()));
        for model in ["f_male", "f_both"] {
            for feature in FEATURES {
                let cell = cells
                    .iter()
                    .find(|c| c.game == game && c.model == model && c.feature == feature)
                    .expect("complete table");
                let mark = if cell.matches { "" } else { "*" };
                out.push_str(&format!("{:>10}", format!("{}{mark}", cell.rounded)));
            }
        }
        out.push('\n');
    }
    out
}

pub fn mismatches(cells: &[ToyCell]) -> Vec<String> {
    cells
        .iter()
        .filter(|c| !c.matches)
        .map(|c| {
            format!(
                "{} {} {} = {} (published {})",
                c.game.label(),
                c.model,
                c.feature,
                c.value,
                c.published
            )
        })
        .collect()
}

#![allow(dead_code)]

use std::sync::Arc;

use fae_core::{FeatureKind, FeatureSchema, FeatureVector, Model, ModelHandle, Result};

/// A model defined by an arbitrary closure.
pub struct FnModel<F> {
    schema: FeatureSchema,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Model for FnModel<F> {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn descriptor(&self) -> String {
        "test-closure".into()
    }

    fn predict_rows(&self, rows: &[FeatureVector]) -> Result<Vec<f64>> {
        Ok(rows.iter().map(|r| (self.f)(r.values())).collect())
    }
}

pub fn fn_model<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(m: usize, kind: FeatureKind, f: F) -> ModelHandle {
    Arc::new(FnModel {
        schema: FeatureSchema::anonymous(m, kind).unwrap(),
        f,
    })
}

pub fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::new(v.to_vec()).unwrap()
}

/// Shapley values by averaging marginal contributions over every ordering
/// of the players (Heap's algorithm), directly from a set function on
/// bitmasks.
pub fn shapley_by_orderings(m: usize, v: impl Fn(u64) -> f64) -> Vec<f64> {
    let mut perm: Vec<usize> = (0..m).collect();
    let mut phi = vec![0.0; m];
    let mut count = 0usize;
    let mut visit = |p: &[usize]| {
        let mut mask = 0u64;
        let mut prev = v(0);
        for &i in p {
            mask |= 1 << i;
            let cur = v(mask);
            phi[i] += cur - prev;
            prev = cur;
        }
        count += 1;
    };
    let mut c = vec![0usize; m];
    visit(&perm);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count as f64).collect()
}

/// Input taking `x` on the players in `mask` and `r` elsewhere.
pub fn splice(x: &[f64], r: &[f64], mask: u64) -> Vec<f64> {
    (0..x.len()).map(|i| if mask >> i & 1 == 1 { x[i] } else { r[i] }).collect()
}

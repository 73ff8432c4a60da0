//! Causal effect bounds over an equivalence class and ROC evaluation of
//! estimated bounds against reference bounds.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::EquivalenceClass;
use crate::error::{Error, Result};
use crate::model::{causal_effects, matrix_rows};
use crate::score::Scorer;

/// Entrywise minimum of `|(I - B)^-1|` over the members of a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectBounds {
    #[serde(with = "matrix_rows")]
    pub matrix: DMatrix<f64>,
    pub members_used: usize,
    pub members_failed: usize,
}

impl EffectBounds {
    /// Bounds of a single effect matrix.
    pub fn from_effects(e: &DMatrix<f64>) -> Self {
        EffectBounds {
            matrix: e.abs(),
            members_used: 1,
            members_failed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Refits every member of `class` by RICF and takes the entrywise minimum of
/// the absolute total effects. Members that fail to fit are skipped and
/// counted.
pub fn min_abs_effects(class: &EquivalenceClass, scorer: &Scorer) -> Result<EffectBounds> {
    let graphs: Vec<_> = class.graphs().cloned().collect();
    let effects: Vec<Option<DMatrix<f64>>> = graphs
        .par_iter()
        .map(|g| {
            let fitted = scorer.fit(g).and_then(|f| causal_effects(g, &f.theta_hat));
            match fitted {
                Ok(e) => Some(e.abs()),
                Err(err) => {
                    warn!("class member {g} could not be fitted: {err}");
                    None
                }
            }
        })
        .collect();
    let failed = effects.iter().filter(|e| e.is_none()).count();
    let mut used = 0;
    let mut out: Option<DMatrix<f64>> = None;
    for e in effects.into_iter().flatten() {
        used += 1;
        out = Some(match out {
            None => e,
            Some(m) => m.zip_map(&e, f64::min),
        });
    }
    let matrix = out.ok_or_else(|| Error::InvalidQuery("no class member could be fitted".into()))?;
    Ok(EffectBounds {
        matrix,
        members_used: used,
        members_failed: failed,
    })
}

/// One point of an ROC curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From `(0, 0)` to `(1, 1)`, one point per block of tied scores.
    pub points: Vec<RocPoint>,
    /// Undefined when there are no positives or no negatives.
    pub auc: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC of `estimate` as a score for the target pairs `reference > 0`.
///
/// Candidates are the ordered off-diagonal pairs `(i, j)`. When `(i, j)` is
/// a target the reverse pair `(j, i)` cannot be one (effects in both
/// directions exclude each other), so it is dropped rather than counted as
/// a negative. Equal scores form a block that advances both rates at once,
/// which averages over tie orderings.
pub fn roc_auc(reference: &EffectBounds, estimate: &EffectBounds) -> Result<RocCurve> {
    let d = reference.dim();
    if estimate.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: estimate.dim(),
        });
    }
    let truth = &reference.matrix;
    let mut items: Vec<(f64, bool)> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let positive = truth[(i, j)] > 0.0;
            if !positive && truth[(j, i)] > 0.0 {
                continue;
            }
            items.push((estimate.matrix[(i, j)], positive));
        }
    }
    let positives = items.iter().filter(|x| x.1).count();
    let negatives = items.len() - positives;
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < items.len() {
        let mut end = k;
        while end < items.len() && items[end].0 == items[k].0 {
            if items[end].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        points.push(RocPoint {
            fpr: if negatives > 0 { fp as f64 / negatives as f64 } else { 0.0 },
            tpr: if positives > 0 { tp as f64 / positives as f64 } else { 0.0 },
        });
        k = end;
    }
    let auc = (positives > 0 && negatives > 0).then(|| {
        points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    });
    Ok(RocCurve {
        points,
        auc,
        positives,
        negatives,
    })
}

/// Largest TPR of the piecewise linear curve at false-positive rate `f`.
fn tpr_at(points: &[RocPoint], f: f64) -> f64 {
    let mut best: f64 = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if f < a.fpr || f > b.fpr {
            continue;
        }
        let t = if b.fpr > a.fpr {
            a.tpr + (b.tpr - a.tpr) * (f - a.fpr) / (b.fpr - a.fpr)
        } else {
            b.tpr.max(a.tpr)
        };
        best = best.max(t);
    }
    best
}

/// Number of grid points used by [`average_roc`].
pub const ROC_GRID: usize = 101;

/// Pointwise mean of several curves on an even FPR grid.
pub fn average_roc(curves: &[&RocCurve]) -> Vec<RocPoint> {
    if curves.is_empty() {
        return Vec::new();
    }
    (0..ROC_GRID)
        .map(|k| {
            let f = k as f64 / (ROC_GRID - 1) as f64;
            let tpr = curves.iter().map(|c| tpr_at(&c.points, f)).sum::<f64>() / curves.len() as f64;
            RocPoint { fpr: f, tpr }
        })
        .collect()
}

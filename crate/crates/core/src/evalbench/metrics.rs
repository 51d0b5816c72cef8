use serde::{Deserialize, Serialize};

use crate::vocab::{AtomicAction, FACTOR_CLASSES};

/// Confusion-matrix side: the 15 factor classes plus an "absent" slot used
/// when one of the two sequences is shorter.
pub const CONFUSION_DIM: usize = FACTOR_CLASSES + 1;
pub const ABSENT: usize = FACTOR_CLASSES;

/// Rows are reference classes, columns predicted classes.
pub type Confusion = Vec<Vec<u64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEval {
    pub samples: usize,
    /// Compared positions: Σ max(|reference|, |prediction|).
    pub positions: u64,
    pub action_acc: f64,
    pub object_acc: f64,
    /// Per reference class; `None` for classes absent from the references.
    pub action_per_class: Vec<Option<f64>>,
    pub object_per_class: Vec<Option<f64>>,
    pub atomic_acc: f64,
    /// Mean over atomic actions occurring in the references.
    pub atomic_mean_per_class: f64,
    pub sequence_acc: f64,
    pub action_confusion: Confusion,
    pub object_confusion: Confusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{predictions} predictions for {references} references")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub references: usize,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn per_class(m: &Confusion) -> Vec<Option<f64>> {
    (0..FACTOR_CLASSES)
        .map(|c| {
            let row: u64 = m[c].iter().sum();
            (row > 0).then(|| m[c][c] as f64 / row as f64)
        })
        .collect()
}

/// Positional comparison. A position present in only one of the two sequences
/// is wrong for every factor; a sequence is correct iff it equals its
/// reference exactly.
pub fn score(predictions: &[Vec<AtomicAction>], references: &[Vec<AtomicAction>]) -> Result<SequenceEval, LengthMismatch> {
    if predictions.len() != references.len() {
        return Err(LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    let mut act = vec![vec![0u64; CONFUSION_DIM]; CONFUSION_DIM];
    let mut obj = vec![vec![0u64; CONFUSION_DIM]; CONFUSION_DIM];
    let (mut positions, mut atomic_ok, mut seq_ok) = (0u64, 0u64, 0u64);
    let mut atomic_classes: std::collections::BTreeMap<AtomicAction, (u64, u64)> = Default::default();
    for (pred, refr) in predictions.iter().zip(references) {
        let n = pred.len().max(refr.len());
        positions += n as u64;
        for j in 0..n {
            let (p, r) = (pred.get(j), refr.get(j));
            let cls = |a: Option<&AtomicAction>, f: fn(&AtomicAction) -> usize| a.map_or(ABSENT, f);
            act[cls(r, |a| a.action.0 as usize)][cls(p, |a| a.action.0 as usize)] += 1;
            obj[cls(r, |a| a.object.0 as usize)][cls(p, |a| a.object.0 as usize)] += 1;
            let hit = p.is_some() && p == r;
            atomic_ok += hit as u64;
            if let Some(&r) = r {
                let e = atomic_classes.entry(r).or_default();
                e.0 += hit as u64;
                e.1 += 1;
            }
        }
        seq_ok += (pred == refr) as u64;
    }
    let trace = |m: &Confusion| (0..FACTOR_CLASSES).map(|c| m[c][c]).sum::<u64>();
    let atomic_mean_per_class = if atomic_classes.is_empty() {
        0.0
    } else {
        atomic_classes.values().map(|&(a, b)| ratio(a, b)).sum::<f64>() / atomic_classes.len() as f64
    };
    Ok(SequenceEval {
        samples: references.len(),
        positions,
        action_acc: ratio(trace(&act), positions),
        object_acc: ratio(trace(&obj), positions),
        action_per_class: per_class(&act),
        object_per_class: per_class(&obj),
        atomic_acc: ratio(atomic_ok, positions),
        atomic_mean_per_class,
        sequence_acc: ratio(seq_ok, references.len() as u64),
        action_confusion: act,
        object_confusion: obj,
    })
}

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Params, Sgd, SgdConfig};

/// A differentiable loss over items of one kind.
pub trait Objective {
    type Item;

    /// Adds the gradient of this item's summed loss to `grads`.
    /// Returns (summed loss, number of prediction steps).
    fn accumulate(&self, params: &Params, item: &Self::Item, grads: &mut Params) -> (f64, usize);

    /// Summed loss and step count, forward only.
    fn loss(&self, params: &Params, item: &Self::Item) -> (f64, usize);

    /// Validation criterion used for checkpoint selection; defaults to the
    /// per-step loss.
    fn val_error(&self, params: &Params, items: &[Self::Item]) -> f64 {
        mean_step_loss(self, params, items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub sgd: SgdConfig,
    /// Minimum number of passes over the (included) training data.
    pub epochs: usize,
    /// Training continues past `epochs` until this many updates were made.
    pub min_updates: usize,
    /// Rescale each batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            sgd: SgdConfig::default(),
            epochs: 30,
            min_updates: 0,
            clip_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub tau: Option<f64>,
    pub included: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_error: Option<f64>,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,tau,included,train_loss,val_loss,val_error";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6},{},{}",
            self.epoch,
            opt(self.tau),
            self.included,
            self.train_loss,
            opt(self.val_loss),
            opt(self.val_error)
        )
    }
}

const MAX_EPOCHS: usize = 100_000;

/// Per-step mean loss over a set of items.
pub fn mean_step_loss<O: Objective + ?Sized>(obj: &O, params: &Params, items: &[O::Item]) -> f64 {
    let (mut l, mut n) = (0.0, 0usize);
    for it in items {
        let (li, ni) = obj.loss(params, it);
        l += li;
        n += ni;
    }
    if n == 0 {
        0.0
    } else {
        l / n as f64
    }
}

/// Mini-batch SGD. `select(epoch)` returns the optional curriculum threshold
/// and the indices of training items admitted in that epoch. Each batch
/// gradient is divided by the number of prediction steps in the batch.
/// When `val` is nonempty, the parameters with the lowest
/// [`Objective::val_error`] are restored at the end; ties go to the later
/// epoch.
pub fn fit<O, R, S>(
    obj: &O,
    params: &mut Params,
    train: &[O::Item],
    val: &[O::Item],
    cfg: &FitConfig,
    mut select: S,
    rng: &mut R,
) -> Vec<EpochLog>
where
    O: Objective,
    R: Rng + ?Sized,
    S: FnMut(usize) -> (Option<f64>, Vec<usize>),
{
    let mut sgd = Sgd::new(cfg.sgd, params);
    let mut grads = params.zeros_like();
    let mut best: Option<(f64, Params)> = None;
    let mut logs = Vec::new();
    let mut updates = 0usize;
    let mut epoch = 0usize;
    while (epoch < cfg.epochs || updates < cfg.min_updates) && epoch < MAX_EPOCHS {
        let (tau, mut order) = select(epoch);
        order.shuffle(rng);
        let (mut epoch_loss, mut epoch_steps) = (0.0, 0usize);
        for batch in order.chunks(cfg.sgd.batch_size) {
            grads.zero();
            let mut steps = 0usize;
            for &i in batch {
                let (l, n) = obj.accumulate(params, &train[i], &mut grads);
                epoch_loss += l;
                steps += n;
            }
            if steps == 0 {
                continue;
            }
            epoch_steps += steps;
            grads.scale(1.0 / steps as f64);
            if let Some(max) = cfg.clip_norm {
                let norm = grads
                    .tensors
                    .iter()
                    .flat_map(|t| &t.data)
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            sgd.step(params, &grads);
            updates += 1;
        }
        debug_assert!(params.all_finite(), "non-finite parameters after epoch {epoch}");
        let val_loss = (!val.is_empty()).then(|| mean_step_loss(obj, params, val));
        let val_error = (!val.is_empty()).then(|| obj.val_error(params, val));
        if let Some(v) = val_error {
            if best.as_ref().map_or(true, |(b, _)| v <= *b) {
                best = Some((v, params.clone()));
            }
        }
        logs.push(EpochLog {
            epoch,
            tau,
            included: order.len(),
            train_loss: if epoch_steps == 0 {
                0.0
            } else {
                epoch_loss / epoch_steps as f64
            },
            val_loss,
            val_error,
        });
        if order.is_empty() && epoch >= cfg.epochs {
            break;
        }
        epoch += 1;
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    logs
}

/// Largest relative error between analytic gradients and central finite
/// differences, `|a − n| / max(|a|, |n|, floor)` with `floor = 1e-6`.
pub fn gradcheck<O: Objective>(obj: &O, params: &Params, item: &O::Item, eps: f64) -> f64 {
    let mut analytic = params.zeros_like();
    obj.accumulate(params, item, &mut analytic);
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for flat in 0..params.num_values() {
        let (t, k) = params.locate(flat);
        let orig = params.tensors[t].data[k];
        probe.tensors[t].data[k] = orig + eps;
        let up = obj.loss(&probe, item).0;
        probe.tensors[t].data[k] = orig - eps;
        let down = obj.loss(&probe, item).0;
        probe.tensors[t].data[k] = orig;
        let num = (up - down) / (2.0 * eps);
        let a = analytic.tensors[t].data[k];
        let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, Linear};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Least squares y ≈ W x through one linear layer.
    struct Regression {
        fc: Linear,
    }

    impl Objective for Regression {
        type Item = (Vec<f64>, Vec<f64>);

        fn accumulate(&self, p: &Params, (x, y): &Self::Item, g: &mut Params) -> (f64, usize) {
            let out = self.fc.forward(p, x);
            let d: Vec<f64> = out.iter().zip(y).map(|(a, b)| a - b).collect();
            self.fc.backward(p, g, x, &d, None);
            (0.5 * d.iter().map(|v| v * v).sum::<f64>(), 1)
        }

        fn loss(&self, p: &Params, (x, y): &Self::Item) -> (f64, usize) {
            let out = self.fc.forward(p, x);
            (0.5 * out.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), 1)
        }
    }

    fn task() -> (Regression, Params, Vec<(Vec<f64>, Vec<f64>)>) {
        let mut p = Params::default();
        let fc = Linear::new(&mut p, "fc", 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        init_params(&mut p, &mut rng);
        let data = (0..20)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = vec![x[0] - 2.0 * x[1] + 0.5, 0.3 * x[2] - x[0]];
                (x, y)
            })
            .collect();
        (Regression { fc }, p, data)
    }

    #[test]
    fn loss_drops_on_tiny_regression() {
        let (obj, mut p, data) = task();
        let before = mean_step_loss(&obj, &p, &data);
        let cfg = FitConfig {
            sgd: SgdConfig {
                batch_size: 20,
                weight_decay: 0.0,
                ..SgdConfig::default()
            },
            epochs: 200,
            ..FitConfig::default()
        };
        let n = data.len();
        fit(&obj, &mut p, &data, &[], &cfg, |_| (None, (0..n).collect()), &mut ChaCha8Rng::seed_from_u64(1));
        let after = mean_step_loss(&obj, &p, &data);
        assert!(after <= 0.1 * before, "{before} -> {after}");
    }

    #[test]
    fn min_updates_extends_training() {
        let (obj, mut p, data) = task();
        let cfg = FitConfig {
            epochs: 2,
            min_updates: 10,
            ..FitConfig::default()
        };
        let logs = fit(&obj, &mut p, &data, &data[..2], &cfg, |_| (None, (0..20).collect()), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(logs.len(), 10);
        assert!(logs[0].val_loss.is_some());
        assert!(logs[0].csv_row().starts_with("0,,20,"));
    }

    #[test]
    fn linear_gradcheck() {
        let (obj, p, data) = task();
        assert!(gradcheck(&obj, &p, &data[0], 1e-5) < 1e-6);
    }
}

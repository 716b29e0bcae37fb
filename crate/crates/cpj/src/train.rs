use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CpjError, Result};
use crate::loss::PreparedTriplet;
use crate::network::CpjNetwork;

/// Iterations per history entry.
pub const HISTORY_STRIDE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss of each block of 100 iterations; a trailing partial block
    /// gets its own entry.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Iterations after which the learning rate was dropped.
    pub lr_drops: Vec<usize>,
    pub final_learning_rate: f64,
}

/// State handed to the progress callback after each history entry.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub iteration: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

/// Swap-augmented training order: every regular triplet also appears with
/// its sides exchanged; anchors keep their orientation.
pub fn augment(triplets: &[PreparedTriplet]) -> Vec<PreparedTriplet> {
    let mut out = Vec::with_capacity(2 * triplets.len());
    for t in triplets {
        out.push(t.clone());
        if !t.is_anchor {
            out.push(t.swapped());
        }
    }
    out
}

/// Endless reshuffled pass over a set of indices.
struct Stream {
    order: Vec<usize>,
    cursor: usize,
}

impl Stream {
    fn new(mut order: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        order.shuffle(rng);
        Stream { order, cursor: 0 }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}

pub fn train(net: &mut CpjNetwork, triplets: &[PreparedTriplet]) -> Result<TrainReport> {
    train_with(net, triplets, |_, _| true)
}

/// Mini-batch SGD with momentum and weight decay. `on_progress` runs after
/// every history entry; returning false stops training early.
pub fn train_with(
    net: &mut CpjNetwork,
    triplets: &[PreparedTriplet],
    mut on_progress: impl FnMut(&CpjNetwork, &Progress) -> bool,
) -> Result<TrainReport> {
    if triplets.is_empty() {
        return Err(CpjError::EmptyBatch);
    }
    let cfg = net.config().clone();
    let data = augment(triplets);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let (mut regular, mut anchors) = match cfg.anchors_per_batch {
        Some(k) if k > 0 && data.iter().any(|t| t.is_anchor) && data.iter().any(|t| !t.is_anchor) => {
            let (a, r): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data[i].is_anchor);
            (Stream::new(r, &mut rng), Some((Stream::new(a, &mut rng), k)))
        }
        _ => (Stream::new((0..data.len()).collect(), &mut rng), None),
    };

    let decay_mask: Vec<bool> = {
        let mut m = vec![false; net.num_params()];
        for b in net.blocks().iter().filter(|b| b.is_weight) {
            m[b.range()].fill(true);
        }
        m
    };
    let mut velocity = vec![0.0; net.num_params()];
    let mut lr = cfg.learning_rate;
    let mut report = TrainReport {
        history: Vec::new(),
        iterations: 0,
        lr_drops: Vec::new(),
        final_learning_rate: lr,
    };
    let (mut block_sum, mut block_len) = (0.0, 0);
    let mut window_sum = 0.0;
    let mut best_window: Option<f64> = None;
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for it in 0..cfg.max_iterations {
        batch.clear();
        if let Some((stream, k)) = anchors.as_mut() {
            for _ in 0..*k {
                batch.push(data[stream.next(&mut rng)].clone());
            }
        }
        while batch.len() < cfg.batch_size {
            batch.push(data[regular.next(&mut rng)].clone());
        }
        let (loss, grad) = net.loss_and_gradients(&batch)?;
        if !loss.is_finite() {
            return Err(CpjError::Diverged { iteration: it, loss });
        }
        let params = net.params_mut();
        for i in 0..params.len() {
            let g = if decay_mask[i] {
                grad[i] + cfg.weight_decay * params[i]
            } else {
                grad[i]
            };
            velocity[i] = cfg.momentum * velocity[i] - lr * g;
            params[i] += velocity[i];
        }
        net.quantize();
        report.iterations = it + 1;

        window_sum += loss;
        if (it + 1) % cfg.plateau_window == 0 {
            let mean = window_sum / cfg.plateau_window as f64;
            window_sum = 0.0;
            if let Some(best) = best_window {
                if mean > best * (1.0 - cfg.plateau_min_improvement) && report.lr_drops.len() < cfg.max_lr_drops {
                    lr *= cfg.lr_drop_factor;
                    report.lr_drops.push(it + 1);
                }
            }
            best_window = Some(best_window.map_or(mean, |b| b.min(mean)));
        }

        block_sum += loss;
        block_len += 1;
        if block_len == HISTORY_STRIDE || it + 1 == cfg.max_iterations {
            let mean = block_sum / block_len as f64;
            report.history.push(mean);
            (block_sum, block_len) = (0.0, 0);
            let progress = Progress {
                iteration: it + 1,
                loss: mean,
                learning_rate: lr,
            };
            if !on_progress(net, &progress) {
                break;
            }
        }
    }
    report.final_learning_rate = lr;
    Ok(report)
}

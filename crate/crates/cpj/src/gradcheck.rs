use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salbench_core::synth::random_map;
use salbench_core::SaliencyMap;

use crate::error::{CpjError, Result};
use crate::loss::{PreparedTriplet, TrainingTriplet};
use crate::network::CpjNetwork;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Parameters sampled from each block (all of them if the block is smaller).
    pub per_block: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-4,
            per_block: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose perturbation moved a rectifier or pooling choice
    /// across a kink, where central differences are not defined.
    pub skipped_kinks: usize,
    pub blocks: Vec<BlockCheck>,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares backprop gradients of the mean batch loss with central
/// differences on sampled parameters.
pub fn gradient_check(net: &CpjNetwork, batch: &[PreparedTriplet], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(CpjError::EmptyBatch);
    }
    let (_, grad) = net.loss_and_gradients(batch)?;
    let inputs: Vec<&[f64]> = batch.iter().flat_map(|t| [t.xa.data(), t.xb.data()]).collect();
    let signature = |n: &CpjNetwork| inputs.iter().map(|x| n.activation_signature(x)).collect::<Vec<_>>();
    let base = signature(net);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        blocks: Vec::new(),
    };
    for block in net.blocks() {
        let picks = rand::seq::index::sample(&mut rng, block.len, opts.per_block.min(block.len));
        let mut bc = BlockCheck {
            name: block.name.clone(),
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        for j in picks.into_iter() {
            let i = block.offset + j;
            let orig = net.params()[i];
            probe.params_mut()[i] = orig + opts.h;
            let plus = probe.batch_loss(batch)?;
            let smooth_plus = signature(&probe) == base;
            probe.params_mut()[i] = orig - opts.h;
            let minus = probe.batch_loss(batch)?;
            let smooth_minus = signature(&probe) == base;
            probe.params_mut()[i] = orig;
            if !(smooth_plus && smooth_minus) {
                bc.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.h);
            bc.max_rel_error = bc.max_rel_error.max(relative_error(grad[i], numeric));
            bc.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(bc.max_rel_error);
        report.checked += bc.checked;
        report.skipped_kinks += bc.skipped;
        report.blocks.push(bc);
    }
    Ok(report)
}

/// Sets every bias to a small seeded value. Zero biases put many
/// pre-activations exactly on a rectifier kink, where no probe is usable.
pub fn jitter_biases(net: &mut CpjNetwork, amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let biases: Vec<_> = net.blocks().iter().filter(|b| !b.is_weight).map(|b| b.range()).collect();
    for r in biases {
        for p in &mut net.params_mut()[r] {
            *p = rng.random_range(-amplitude..amplitude);
        }
    }
}

fn blob(rng: &mut ChaCha8Rng, side: usize) -> Result<SaliencyMap> {
    let cx = rng.random_range(0.2..0.8) * side as f64;
    let cy = rng.random_range(0.2..0.8) * side as f64;
    let s = rng.random_range(0.1..0.3) * side as f64;
    Ok(SaliencyMap::from_fn(side, side, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / (2.0 * s * s)).exp()
    })?)
}

/// A seeded batch of smooth blob triplets at the network resolution: one
/// anchor against a uniform-random map, the rest with spread targets.
pub fn probe_batch(net: &CpjNetwork, n: usize, seed: u64) -> Result<Vec<PreparedTriplet>> {
    let side = net.config().input_res;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let g = blob(&mut rng, side)?;
        let t = if i == 0 {
            TrainingTriplet::anchor(g, random_map(rng.random(), side, side))
        } else {
            let r = rng.random_range(-0.9..0.9);
            TrainingTriplet::new(blob(&mut rng, side)?, blob(&mut rng, side)?, g, r)?
        };
        out.push(net.prepare_triplet(&t)?);
    }
    Ok(out)
}

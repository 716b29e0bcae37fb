use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};

use super::{EvalContext, MetricId, NegCountPolicy};

/// Area under the ROC curve of `positives` against `negatives`.
///
/// Thresholds are the distinct positive values in descending order; at each
/// threshold the true/false positive rates count values `>=` the threshold.
/// The curve is closed with `(0, 0)` and `(1, 1)` and integrated with the
/// trapezoid rule.
pub fn roc_area(positives: &[f64], negatives: &[f64]) -> f64 {
    debug_assert!(!positives.is_empty() && !negatives.is_empty());
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let (np, nn) = (pos.len() as f64, neg.len() as f64);

    let mut area = 0.0;
    let (mut prev_tp, mut prev_fp) = (0.0, 0.0);
    let (mut i, mut j) = (0usize, 0usize);
    while i < pos.len() {
        let th = pos[i];
        while i < pos.len() && pos[i] >= th {
            i += 1;
        }
        while j < neg.len() && neg[j] >= th {
            j += 1;
        }
        let tp = i as f64 / np;
        let fp = j as f64 / nn;
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    area += (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0;
    area
}

fn positives(fix: &FixationSet, esm: &SaliencyMap) -> Result<Vec<usize>> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    fix.check_bounds(esm.width(), esm.height())?;
    Ok(fix.pixel_indices(esm.width()))
}

fn values_at(map: &SaliencyMap, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| map.values()[i]).collect()
}

/// Judd AUC: positives are the fixated pixels, negatives every other pixel.
pub fn auc_judd(esm: &SaliencyMap, fix: &FixationSet) -> Result<f64> {
    let pos = positives(fix, esm)?;
    let pos_set: BTreeSet<usize> = pos.iter().copied().collect();
    let neg: Vec<f64> = esm
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| !pos_set.contains(i))
        .map(|(_, &v)| v)
        .collect();
    if neg.is_empty() {
        return Err(Error::InsufficientNegatives {
            needed: 1,
            available: 0,
        });
    }
    Ok(roc_area(&values_at(esm, &pos), &neg))
}

/// Shuffled AUC: negatives are fixations of the other images in the
/// benchmark, excluding this image's own fixated pixels, subsampled to the
/// number of positives.
pub fn shuffled_auc(esm: &SaliencyMap, fix: &FixationSet, ctx: &EvalContext) -> Result<f64> {
    let pos = positives(fix, esm)?;
    let own: BTreeSet<usize> = pos.iter().copied().collect();
    let pool: Vec<usize> = ctx
        .other_fixations(&fix.image_id, esm.width(), esm.height())
        .into_iter()
        .map(|p| p.y as usize * esm.width() + p.x as usize)
        .filter(|i| !own.contains(i))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if pool.is_empty() {
        return Err(Error::InsufficientNegatives {
            needed: pos.len(),
            available: 0,
        });
    }
    let count = match ctx.neg_count_policy {
        NegCountPolicy::MatchPositives => pos.len().min(pool.len()),
    };
    let mut rng = ctx.rng_for(MetricId::SAuc, &fix.image_id);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    picked.sort_unstable();
    Ok(roc_area(&values_at(esm, &pos), &values_at(esm, &picked)))
}

/// Positives and sampled negatives shared by rAUC and PRE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl NegativeSample {
    /// Negatives are drawn without replacement from non-fixated pixels whose
    /// ground-truth response lies in the lowest `ctx.low_response_quantile`,
    /// with probability proportional to the dataset fixation density.
    pub fn draw(gsm: &SaliencyMap, fix: &FixationSet, ctx: &EvalContext) -> Result<Self> {
        let pos = positives(fix, gsm)?;
        let own: BTreeSet<usize> = pos.iter().copied().collect();

        let mut sorted = gsm.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = ctx.low_response_quantile.clamp(0.0, 1.0);
        let threshold = sorted[((sorted.len() - 1) as f64 * q).floor() as usize];
        let candidates: Vec<usize> = (0..gsm.len())
            .filter(|i| gsm.values()[*i] <= threshold && !own.contains(i))
            .collect();
        if candidates.len() < pos.len() {
            return Err(Error::InsufficientNegatives {
                needed: pos.len(),
                available: candidates.len(),
            });
        }

        let weights: Vec<f64> = match ctx.density() {
            Some(d) => {
                let d = crate::preprocess::resize_bilinear(d, gsm.width(), gsm.height())?;
                let floor = 1e-6 * d.max().max(f64::MIN_POSITIVE);
                candidates.iter().map(|&i| d.values()[i] + floor).collect()
            }
            None => vec![1.0; candidates.len()],
        };

        // Weighted sampling without replacement: keep the largest
        // ln(u) / w keys.
        let mut rng = ctx.rng_for(MetricId::RAuc, &fix.image_id);
        let mut keyed: Vec<(f64, usize)> = candidates
            .iter()
            .zip(&weights)
            .map(|(&i, &w)| {
                let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                (u.ln() / w, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut negatives: Vec<usize> = keyed.iter().take(pos.len()).map(|&(_, i)| i).collect();
        negatives.sort_unstable();
        Ok(Self {
            positives: pos,
            negatives,
        })
    }
}

/// Resampled AUC over the [`NegativeSample`] positives and negatives.
pub fn resampled_auc(esm: &SaliencyMap, gsm: &SaliencyMap, fix: &FixationSet, ctx: &EvalContext) -> Result<f64> {
    esm.check_same_dims(gsm)?;
    let s = NegativeSample::draw(gsm, fix, ctx)?;
    Ok(roc_area(&values_at(esm, &s.positives), &values_at(esm, &s.negatives)))
}

/// Share of the estimated energy that falls on positives, with positives
/// and negatives chosen as for rAUC. `0/0` scores 0.
pub fn precision_energy(esm: &SaliencyMap, gsm: &SaliencyMap, fix: &FixationSet, ctx: &EvalContext) -> Result<f64> {
    esm.check_same_dims(gsm)?;
    let s = NegativeSample::draw(gsm, fix, ctx)?;
    let on: f64 = values_at(esm, &s.positives).iter().sum();
    let off: f64 = values_at(esm, &s.negatives).iter().sum();
    let total = on + off;
    Ok(if total > 0.0 { on / total } else { 0.0 })
}

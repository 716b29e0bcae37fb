//! Slow, direct reference implementations. Nothing here shares code with
//! the production crates; inputs are plain slices.

pub mod lp;

/// ROC area by explicit curve construction: one point per distinct
/// positive value, counting `>=` over both populations, closed with the
/// corners and sorted before integration.
pub fn roc_auc(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = positives.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let mut points = vec![(0.0, 0.0), (1.0, 1.0)];
    for t in thresholds {
        let tp = positives.iter().filter(|&&v| v >= t).count() as f64 / positives.len() as f64;
        let fp = negatives.iter().filter(|&&v| v >= t).count() as f64 / negatives.len() as f64;
        points.push((fp, tp));
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Judd AUC over a row-major map: fixated pixels against all others.
pub fn judd_auc(map: &[f64], fixated: &[usize]) -> f64 {
    let mut fixated = fixated.to_vec();
    fixated.sort_unstable();
    fixated.dedup();
    let pos: Vec<f64> = fixated.iter().map(|&i| map[i]).collect();
    let neg: Vec<f64> = (0..map.len())
        .filter(|i| fixated.binary_search(i).is_err())
        .map(|i| map[i])
        .collect();
    roc_auc(&pos, &neg)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

pub fn sim(a: &[f64], b: &[f64]) -> f64 {
    let (p, q) = (normalized(a), normalized(b));
    p.iter().zip(&q).map(|(x, y)| if x < y { *x } else { *y }).sum()
}

/// Pearson correlation via the covariance matrix entries.
pub fn cc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
    cov / (va * vb).sqrt()
}

/// `KL(P||Q) + KL(Q||P)` in bits, with `eps` inside the logarithms.
pub fn kld_sym(a: &[f64], b: &[f64], eps: f64) -> f64 {
    let (p, q) = (normalized(a), normalized(b));
    let kl = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(u, v)| u * ((u + eps).ln() - (v + eps).ln()) / std::f64::consts::LN_2)
            .sum()
    };
    kl(&p, &q) + kl(&q, &p)
}

/// Earth mover's distance between two `side x side` grids with Euclidean
/// ground distance, solved as a generic linear program.
pub fn emd_grid(a: &[f64], b: &[f64], side: usize) -> f64 {
    let (p, q) = (normalized(a), normalized(b));
    lp::transport(&p, &q, |i, j| {
        let dx = (i % side) as f64 - (j % side) as f64;
        let dy = (i / side) as f64 - (j / side) as f64;
        (dx * dx + dy * dy).sqrt()
    })
}

/// Eq-2-style agreement by bitmask enumeration over every ordered pair of
/// disjoint subgroups of size `t`. `answers[k][s]` is `Some(chose_a)` when
/// subject `s` answered question `k`.
pub fn agreement(answers: &[Vec<Option<bool>>], n_subjects: usize, t: usize) -> f64 {
    assert!(n_subjects <= 20);
    let groups: Vec<u32> = (0u32..1 << n_subjects).filter(|m| m.count_ones() as usize == t).collect();
    let l = |k: usize, g: u32| -> Option<f64> {
        let mut yes = 0.0;
        let mut n = 0.0;
        for s in 0..n_subjects {
            if g & (1 << s) != 0 {
                if let Some(c) = answers[k][s] {
                    n += 1.0;
                    if c {
                        yes += 1.0;
                    }
                }
            }
        }
        (n > 0.0).then(|| yes / n)
    };
    let mut total = 0.0;
    let mut pairs = 0.0;
    for &g1 in &groups {
        for &g2 in &groups {
            if g1 & g2 != 0 {
                continue;
            }
            let gaps: Vec<f64> = (0..answers.len())
                .filter_map(|k| Some((l(k, g1)? - l(k, g2)?).abs()))
                .collect();
            if !gaps.is_empty() {
                total += gaps.iter().sum::<f64>() / gaps.len() as f64;
                pairs += 1.0;
            }
        }
    }
    1.0 - total / pairs
}

/// Confidence-weighted agreement between metric and human orderings.
/// Each question is `(score_a, score_b, chose_a_count, answers)`.
pub fn weighted_accuracy(questions: &[(f64, f64, usize, usize)], higher_better: bool) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(fa, fb, k, n) in questions {
        let l = k as f64 / n as f64;
        let c = 2.0 * (l - 0.5).abs();
        den += c;
        let metric_prefers_a = if higher_better { fa > fb } else { fa < fb };
        let metric_prefers_b = if higher_better { fa < fb } else { fa > fb };
        if (metric_prefers_a && l > 0.5) || (metric_prefers_b && l < 0.5) {
            num += c;
        }
    }
    num / den
}

/// Discordant pairs between two orderings of the same ids.
pub fn discordant_pairs(x: &[&str], y: &[&str]) -> usize {
    let pos = |v: &[&str], id: &str| v.iter().position(|m| *m == id).unwrap();
    let mut n = 0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i < j && pos(y, x[i]) > pos(y, x[j]) {
                n += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_reference_points() {
        assert_eq!(roc_auc(&[1.0], &[0.0]), 1.0);
        assert_eq!(roc_auc(&[0.5], &[0.5]), 0.5);
        assert_eq!(judd_auc(&[0.0, 1.0, 0.0, 0.0], &[1]), 1.0);
    }

    #[test]
    fn emd_unit_move() {
        let d = emd_grid(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0], 2);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn agreement_extremes() {
        let same = vec![vec![Some(true), Some(true)], vec![Some(false), Some(false)]];
        assert_eq!(agreement(&same, 2, 1), 1.0);
        let opposed = vec![vec![Some(true), Some(false)]];
        assert_eq!(agreement(&opposed, 2, 1), 0.0);
    }
}

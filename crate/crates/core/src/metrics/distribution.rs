use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};
use crate::preprocess::{resize_area, to_distribution};

use super::transport::solve_transport;

/// Offset added inside every logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Largest EMD grid the exact solver accepts.
pub const EMD_MAX_GRID: usize = 48;

/// Normalized scanpath saliency: mean z-score of the estimate at fixated
/// pixels (population standard deviation).
pub fn nss(esm: &SaliencyMap, fix: &FixationSet) -> Result<f64> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    fix.check_bounds(esm.width(), esm.height())?;
    let n = esm.len() as f64;
    let mean = esm.sum() / n;
    let var = esm.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) || std <= mean.abs() * 1e-14 {
        return Err(Error::ZeroVariance);
    }
    let idx = fix.pixel_indices(esm.width());
    let total: f64 = idx.iter().map(|&i| (esm.values()[i] - mean) / std).sum();
    Ok(total / idx.len() as f64)
}

/// Histogram intersection of the two maps as distributions.
pub fn sim(esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<f64> {
    esm.check_same_dims(gsm)?;
    let s = to_distribution(esm)?;
    let g = to_distribution(gsm)?;
    Ok(s.values().iter().zip(g.values()).map(|(a, b)| a.min(*b)).sum())
}

/// Pearson correlation over pixels.
pub fn cc(esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<f64> {
    esm.check_same_dims(gsm)?;
    let n = esm.len() as f64;
    let ms = esm.sum() / n;
    let mg = gsm.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in esm.values().iter().zip(gsm.values()) {
        let (da, db) = (a - ms, b - mg);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Information gain over `baseline`, in bits per fixation.
pub fn info_gain(esm: &SaliencyMap, fix: &FixationSet, baseline: &SaliencyMap) -> Result<f64> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    esm.check_same_dims(baseline)?;
    fix.check_bounds(esm.width(), esm.height())?;
    let s = to_distribution(esm)?;
    let b = to_distribution(baseline)?;
    let idx = fix.pixel_indices(esm.width());
    let gain: f64 = idx
        .iter()
        .map(|&i| (s.values()[i] + LOG_EPS).log2() - (b.values()[i] + LOG_EPS).log2())
        .sum();
    Ok(gain / idx.len() as f64)
}

/// Symmetric Kullback-Leibler divergence `KL(S||G) + KL(G||S)` in bits.
pub fn kld_sym(esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<f64> {
    esm.check_same_dims(gsm)?;
    let s = to_distribution(esm)?;
    let g = to_distribution(gsm)?;
    let mut forward = 0.0;
    let mut backward = 0.0;
    for (&a, &b) in s.values().iter().zip(g.values()) {
        let log_ratio = (a + LOG_EPS).log2() - (b + LOG_EPS).log2();
        forward += a * log_ratio;
        backward -= b * log_ratio;
    }
    Ok(forward + backward)
}

/// Earth mover's distance between the maps resampled to a
/// `grid x grid` lattice, with Euclidean ground distance in cell units.
pub fn emd(esm: &SaliencyMap, gsm: &SaliencyMap, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(Error::InvalidArgument("EMD grid must be positive".into()));
    }
    if grid > EMD_MAX_GRID {
        return Err(Error::ResolutionTooLarge {
            requested: grid,
            max: EMD_MAX_GRID,
        });
    }
    esm.check_same_dims(gsm)?;
    esm.check_non_negative()?;
    gsm.check_non_negative()?;
    let s = to_distribution(&resize_area(esm, grid, grid)?)?;
    let g = to_distribution(&resize_area(gsm, grid, grid)?)?;
    let cost = |i: usize, j: usize| {
        let dx = (i % grid) as f64 - (j % grid) as f64;
        let dy = (i / grid) as f64 - (j / grid) as f64;
        (dx * dx + dy * dy).sqrt()
    };
    Ok(solve_transport(s.values(), g.values(), cost)?.cost)
}

//! Fixation density maps and center priors.

use crate::error::{Error, Result};
use crate::map::{FixationSet, SaliencyMap};
use crate::preprocess::minmax_normalize;

/// Unnormalized sum of isotropic Gaussians (unit peak height scaled to unit
/// mass) centered on each fixation.
pub fn gaussian_sum(fix: &FixationSet, width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    if fix.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    fix.check_bounds(width, height)?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    // Separable: accumulate per-point row and column factors.
    let radius = (4.0 * sigma).ceil() as i64;
    let mut values = vec![0.0; width * height];
    for p in &fix.points {
        let (px, py) = (p.x as i64, p.y as i64);
        let x0 = (px - radius).max(0) as usize;
        let x1 = (px + radius).min(width as i64 - 1) as usize;
        let y0 = (py - radius).max(0) as usize;
        let y1 = (py + radius).min(height as i64 - 1) as usize;
        let gx: Vec<f64> = (x0..=x1)
            .map(|x| (-((x as i64 - px).pow(2) as f64) * inv).exp())
            .collect();
        for y in y0..=y1 {
            let gy = (-((y as i64 - py).pow(2) as f64) * inv).exp() * norm;
            let row = &mut values[y * width + x0..=y * width + x1];
            for (v, g) in row.iter_mut().zip(&gx) {
                *v += g * gy;
            }
        }
    }
    SaliencyMap::new(width, height, values)
}

/// Fixation density map: Gaussian sum, min-max normalized.
pub fn fixation_density(fix: &FixationSet, width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    Ok(minmax_normalize(&gaussian_sum(fix, width, height, sigma)?))
}

/// Isotropic Gaussian centered on the image, peak 1.
pub fn center_prior(width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let inv = 1.0 / (2.0 * sigma * sigma);
    SaliencyMap::from_fn(width, height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        (-(dx * dx + dy * dy) * inv).exp()
    })
}

/// Center prior with `sigma = 0.25 * min(width, height)`.
pub fn default_center_prior(width: usize, height: usize) -> SaliencyMap {
    center_prior(width, height, 0.25 * width.min(height) as f64).expect("positive dims give positive sigma")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Point;

    #[test]
    fn mass_matches_point_count() {
        let fix = FixationSet::new("a", vec![Point::new(20, 20), Point::new(40, 30), Point::new(30, 45)]);
        let m = gaussian_sum(&fix, 64, 64, 3.0).unwrap();
        assert!((m.sum() - 3.0).abs() / 3.0 < 0.01, "{}", m.sum());
    }

    #[test]
    fn empty_is_an_error() {
        let fix = FixationSet::new("a", vec![]);
        assert!(matches!(gaussian_sum(&fix, 8, 8, 1.0), Err(Error::EmptyFixations)));
    }

    #[test]
    fn center_prior_peaks_in_middle() {
        let c = default_center_prior(9, 9);
        assert_eq!(c.get(4, 4), 1.0);
        assert!(c.get(0, 0) < c.get(2, 2));
    }
}

//! Resampling, normalization and display transforms.

use crate::error::{Error, Result};
use crate::map::{MapPair, SaliencyMap};

/// Number of gray levels used by [`hist_equalize`].
pub const HIST_BINS: usize = 256;

/// Bilinear resampling with pixel-center alignment and clamped edges.
pub fn resize_bilinear(map: &SaliencyMap, width: usize, height: usize) -> Result<SaliencyMap> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "target size {width}x{height} must be positive"
        )));
    }
    if map.dims() == (width, height) {
        return Ok(map.clone());
    }
    let (sw, sh) = map.dims();
    let xs = bilinear_taps(sw, width);
    let ys = bilinear_taps(sh, height);
    let src = map.values();
    let mut out = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        let r0 = &src[y0 * sw..(y0 + 1) * sw];
        let r1 = &src[y1 * sw..(y1 + 1) * sw];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    SaliencyMap::new(width, height, out)
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Area-weighted (box filter) resampling. Every target pixel is the
/// overlap-weighted mean of the source pixels it covers, so total mass
/// scales by the area ratio.
pub fn resize_area(map: &SaliencyMap, width: usize, height: usize) -> Result<SaliencyMap> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "target size {width}x{height} must be positive"
        )));
    }
    if map.dims() == (width, height) {
        return Ok(map.clone());
    }
    let (sw, sh) = map.dims();
    let wx = area_weights(sw, width);
    let wy = area_weights(sh, height);
    let src = map.values();
    // Horizontal pass: sh x width.
    let mut tmp = vec![0.0; sh * width];
    for y in 0..sh {
        let row = &src[y * sw..(y + 1) * sw];
        for (x, taps) in wx.iter().enumerate() {
            tmp[y * width + x] = taps.iter().map(|&(i, w)| row[i] * w).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (y, taps) in wy.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = taps.iter().map(|&(i, w)| tmp[i * width + x] * w).sum();
        }
    }
    SaliencyMap::new(width, height, out)
}

fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|j| {
                    let overlap = (hi.min((j + 1) as f64) - lo.max(j as f64)).max(0.0);
                    (overlap > 0.0).then_some((j, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Rescales values to `[0, 1]`. A constant map becomes all zeros.
pub fn minmax_normalize(map: &SaliencyMap) -> SaliencyMap {
    let lo = map.min();
    let hi = map.max();
    let range = hi - lo;
    let values = if range > 0.0 {
        map.values().iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.0; map.len()]
    };
    SaliencyMap::new(map.width(), map.height(), values).expect("normalized map keeps its shape")
}

/// Divides by the total so the map sums to one.
pub fn to_distribution(map: &SaliencyMap) -> Result<SaliencyMap> {
    map.check_non_negative()?;
    let total = map.sum();
    if total <= 0.0 {
        return Err(Error::AllZeroMap);
    }
    map.map_values(|v| v / total)
}

/// 256-bin histogram equalization of a `[0, 1]` map; each pixel becomes the
/// cumulative fraction of pixels at or below its gray level.
pub fn hist_equalize(map: &SaliencyMap) -> SaliencyMap {
    let level = |v: f64| ((v.clamp(0.0, 1.0) * (HIST_BINS - 1) as f64).round()) as usize;
    let mut hist = [0usize; HIST_BINS];
    for &v in map.values() {
        hist[level(v)] += 1;
    }
    let n = map.len() as f64;
    let mut cdf = [0.0; HIST_BINS];
    let mut acc = 0usize;
    for (c, h) in cdf.iter_mut().zip(hist.iter()) {
        acc += h;
        *c = acc as f64 / n;
    }
    map.map_values(|v| cdf[level(v)])
        .expect("equalized map keeps its shape")
}

/// Resizes the estimated map onto the ground-truth grid, then min-max
/// normalizes both.
pub fn prepare_pair(esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<MapPair> {
    let resized = resize_bilinear(esm, gsm.width(), gsm.height())?;
    Ok(MapPair {
        esm: minmax_normalize(&resized),
        gsm: minmax_normalize(gsm),
    })
}

/// Separable Gaussian blur with clamped borders. `sigma <= 0` is a no-op.
pub fn gaussian_blur(map: &SaliencyMap, sigma: f64) -> SaliencyMap {
    if sigma <= 0.0 {
        return map.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let (w, h) = map.dims();
    let src = map.values();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sx = clamp(x as isize + k as isize - radius, w);
                acc += kv * src[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - radius, h);
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    SaliencyMap::new(w, h, out).expect("blurred map keeps its shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, v: &[f64]) -> SaliencyMap {
        SaliencyMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn resize_identity() {
        let m = map(3, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(resize_bilinear(&m, 3, 3).unwrap(), m);
    }

    #[test]
    fn resize_to_single_pixel_averages() {
        let m = map(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let r = resize_bilinear(&m, 1, 1).unwrap();
        assert_eq!(r.values(), &[0.5]);
    }

    #[test]
    fn upsampled_ramp_is_monotone() {
        let m = map(2, 1, &[0.0, 1.0]);
        let r = resize_bilinear(&m, 4, 1).unwrap();
        assert!(r.values().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.values(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn resize_rejects_zero_target() {
        let m = map(1, 1, &[1.0]);
        assert!(resize_bilinear(&m, 0, 1).is_err());
    }

    #[test]
    fn area_resize_preserves_mean() {
        let m = SaliencyMap::from_fn(7, 5, |x, y| (x * 3 + y) as f64).unwrap();
        for &(w, h) in &[(3, 2), (14, 10), (4, 4), (1, 1)] {
            let r = resize_area(&m, w, h).unwrap();
            assert!((r.mean() - m.mean()).abs() < 1e-12, "{w}x{h}");
        }
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&map(3, 1, &[2.0, 4.0, 6.0])).values(), &[0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&map(3, 1, &[5.0; 3])).values(), &[0.0; 3]);
        let unit = map(3, 1, &[0.0, 0.3, 1.0]);
        assert_eq!(minmax_normalize(&unit), unit);
    }

    #[test]
    fn distribution_examples() {
        let d = to_distribution(&map(3, 1, &[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(d.values(), &[0.25, 0.25, 0.5]);
        assert_eq!(to_distribution(&d).unwrap(), d);
        assert!(matches!(
            to_distribution(&map(3, 1, &[0.0; 3])),
            Err(Error::AllZeroMap)
        ));
        assert!(matches!(
            to_distribution(&map(2, 1, &[-1.0, 2.0])),
            Err(Error::NegativeValue(0))
        ));
    }

    #[test]
    fn equalize_constant_map() {
        let e = hist_equalize(&map(2, 2, &[0.3; 4]));
        assert!(e.values().iter().all(|&v| v == e.values()[0]));
    }

    #[test]
    fn equalize_two_levels() {
        let e = hist_equalize(&map(4, 1, &[0.1, 0.9, 0.1, 0.9]));
        assert_eq!(e.values(), &[0.5, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn equalize_flat_ramp_is_near_identity() {
        let m = SaliencyMap::from_fn(256, 1, |x, _| x as f64 / 255.0).unwrap();
        let e = hist_equalize(&m);
        for (a, b) in m.values().iter().zip(e.values()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn prepare_pair_contract() {
        let esm = SaliencyMap::from_fn(64, 64, |x, y| (x + y) as f64).unwrap();
        let gsm = SaliencyMap::from_fn(32, 32, |x, _| x as f64).unwrap();
        let pair = prepare_pair(&esm, &gsm).unwrap();
        assert_eq!(pair.dims(), (32, 32));
        assert_eq!(pair.esm().dims(), (32, 32));
        assert_eq!(pair.esm().min(), 0.0);
        assert_eq!(pair.esm().max(), 1.0);

        let same = prepare_pair(&gsm, &gsm).unwrap();
        assert_eq!(same.esm(), same.gsm());

        let flat = SaliencyMap::filled(8, 8, 3.0).unwrap();
        let p = prepare_pair(&flat, &gsm).unwrap();
        assert!(p.esm().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blur_preserves_mass_away_from_edges() {
        let mut v = vec![0.0; 31 * 31];
        v[15 * 31 + 15] = 1.0;
        let b = gaussian_blur(&map(31, 31, &v), 2.0);
        assert!((b.sum() - 1.0).abs() < 1e-9);
        assert_eq!(b.max(), b.get(15, 15));
    }

    fn arb_map() -> impl Strategy<Value = SaliencyMap> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..10.0, w * h)
                .prop_map(move |v| SaliencyMap::new(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bilinear_stays_in_range(m in arb_map(), w in 1usize..9, h in 1usize..9) {
            let r = resize_bilinear(&m, w, h).unwrap();
            let (lo, hi) = (m.min(), m.max());
            prop_assert!(r.values().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }

        #[test]
        fn minmax_idempotent_and_monotone(m in arb_map()) {
            let n = minmax_normalize(&m);
            let again = minmax_normalize(&n);
            prop_assert_eq!(again.values(), n.values());
            for i in 0..m.len() {
                for j in 0..m.len() {
                    if m.values()[i] <= m.values()[j] {
                        prop_assert!(n.values()[i] <= n.values()[j]);
                    }
                }
            }
        }

        #[test]
        fn equalize_preserves_weak_order(m in arb_map()) {
            let n = minmax_normalize(&m);
            let e = hist_equalize(&n);
            for i in 0..n.len() {
                for j in 0..n.len() {
                    if n.values()[i] <= n.values()[j] {
                        prop_assert!(e.values()[i] <= e.values()[j]);
                    }
                }
                prop_assert!((0.0..=1.0).contains(&e.values()[i]));
            }
        }

        #[test]
        fn prepared_pairs_are_valid(a in arb_map(), g in arb_map()) {
            let p = prepare_pair(&a, &g).unwrap();
            prop_assert_eq!(p.esm().dims(), p.gsm().dims());
            for m in [p.esm(), p.gsm()] {
                prop_assert!(m.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}

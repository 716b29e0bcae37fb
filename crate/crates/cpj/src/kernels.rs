//! Dense kernels on channel-major `(C, side, side)` buffers.

/// `c = a * b + beta * c` with `a` m x k and `b` k x n. A transposed flag
/// means the operand is stored as its transpose.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes the gradient wherever the rectified output is not positive.
pub fn relu_mask(g: &mut [f64], out: &[f64]) {
    for (gi, &o) in g.iter_mut().zip(out) {
        if o <= 0.0 {
            *gi = 0.0;
        }
    }
}

/// Unfolds 3x3 zero-padded neighbourhoods: row `c*9 + ky*3 + kx`, column
/// `y*side + x`.
pub fn im2col(x: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let hw = side * side;
    let mut cols = vec![0.0; channels * 9 * hw];
    for c in 0..channels {
        let src = &x[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= side as isize {
                        continue;
                    }
                    let s = &src[sy as usize * side..][..side];
                    let d = &mut row[y * side..][..side];
                    match kx {
                        0 => d[1..].copy_from_slice(&s[..side - 1]),
                        1 => d.copy_from_slice(s),
                        _ => d[..side - 1].copy_from_slice(&s[1..]),
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub fn col2im(cols: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let hw = side * side;
    let mut x = vec![0.0; channels * hw];
    for c in 0..channels {
        let dst = &mut x[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= side as isize {
                        continue;
                    }
                    let d = &mut dst[sy as usize * side..][..side];
                    let s = &row[y * side..][..side];
                    let (d, s) = match kx {
                        0 => (&mut d[..side - 1], &s[1..]),
                        1 => (&mut d[..], s),
                        _ => (&mut d[1..], &s[..side - 1]),
                    };
                    for (a, b) in d.iter_mut().zip(s) {
                        *a += b;
                    }
                }
            }
        }
    }
    x
}

/// 2x2 stride-2 max pooling. Returns the pooled map and, per output, the
/// flat input index of the first maximum.
pub fn maxpool2(x: &[f64], channels: usize, side: usize) -> (Vec<f64>, Vec<u32>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(channels * half * half);
    let mut idx = Vec::with_capacity(channels * half * half);
    for c in 0..channels {
        let base = c * side * side;
        for y in 0..half {
            for xo in 0..half {
                let mut best = base + 2 * y * side + 2 * xo;
                for i in [best + 1, best + side, best + side + 1] {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn col2im_is_the_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)> for arbitrary x and c.
        let (ch, side) = (2, 5);
        let x: Vec<f64> = (0..ch * side * side).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let c: Vec<f64> = (0..ch * 9 * side * side).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        assert_eq!(dot(&im2col(&x, ch, side), &c), dot(&x, &col2im(&c, ch, side)));
    }

    #[test]
    fn im2col_centre_row_is_identity_and_edges_pad() {
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let cols = im2col(&x, 1, 3);
        assert_eq!(&cols[4 * 9..5 * 9], &x[..]);
        // Top-left tap at (0,0) reads outside the image.
        assert_eq!(cols[0], 0.0);
        assert_eq!(cols[8], 5.0);
    }

    #[test]
    fn gemm_matches_naive_products() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i % 3) as f64 - 1.0).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, &a, false, &b, false, &mut c, 1.0);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = 1.0 + (0..k).map(|t| a[i * k + t] * b[t * n + j]).sum::<f64>();
                assert_eq!(c[i * n + j], want);
            }
        }
        // Transposed storage of both operands.
        let at: Vec<f64> = (0..k * m).map(|t| a[(t % m) * k + t / m]).collect();
        let bt: Vec<f64> = (0..n * k).map(|t| b[(t % k) * n + t / k]).collect();
        let mut c2 = vec![0.0; m * n];
        gemm(m, k, n, &at, true, &bt, true, &mut c2, 0.0);
        for (x, y) in c.iter().zip(&c2) {
            assert_eq!(x - 1.0, *y);
        }
    }

    #[test]
    fn maxpool_picks_first_maximum() {
        let x = [1.0, 3.0, 3.0, 0.0, 2.0, 2.0, 5.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (out, idx) = maxpool2(&x, 1, 4);
        assert_eq!(out, vec![3.0, 5.0, 0.0, 0.0]);
        assert_eq!(idx, vec![1, 6, 8, 10]);
    }
}

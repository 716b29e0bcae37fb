//! Dense two-phase tableau simplex with Bland's rule.

const TOL: f64 = 1e-12;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for j in 0..self.rows[i].len() {
                    self.rows[i][j] -= f * self.rows[r][j];
                }
                self.rhs[i] -= f * self.rhs[r];
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes `cost . x` over columns `allowed`, starting from the
    /// current basis.
    fn optimize(&mut self, cost: &[f64], allowed: usize) {
        loop {
            // Reduced cost of column j: c_j - c_B B^-1 A_j.
            let reduced = |j: usize, t: &Tableau| -> f64 {
                cost[j] - t.rows.iter().zip(&t.basis).map(|(row, &b)| cost[b] * row[j]).sum::<f64>()
            };
            let Some(enter) = (0..allowed).find(|&j| !self.basis.contains(&j) && reduced(j, self) < -TOL) else {
                return;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > TOL {
                    let ratio = self.rhs[i] / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - TOL || (ratio <= best + TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (r, _) = leave.expect("bounded program");
            self.pivot(r, enter);
        }
    }
}

/// Minimizes `c . x` subject to `a x = b`, `x >= 0`. Panics when infeasible
/// or unbounded.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> (f64, Vec<f64>) {
    let (m, n) = (a.len(), c.len());
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[i].iter().map(|v| sign * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        rows.push(row);
        rhs.push(sign * b[i]);
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
    };
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    t.optimize(&phase1, n + m);
    let infeasibility: f64 = t.basis.iter().zip(&t.rhs).filter(|(&b, _)| b >= n).map(|(_, v)| v).sum();
    assert!(infeasibility < 1e-9, "infeasible program");

    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            if let Some(col) = (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                t.pivot(i, col);
                i += 1;
            } else {
                t.rows.remove(i);
                t.rhs.remove(i);
                t.basis.remove(i);
            }
        } else {
            i += 1;
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    t.optimize(&cost, n);
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[r];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    (value, x)
}

/// Balanced transportation cost as a plain linear program over all
/// `supply.len() * demand.len()` flow variables.
pub fn transport(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (ns, nd) = (supply.len(), demand.len());
    let n = ns * nd;
    let c: Vec<f64> = (0..n).map(|e| cost(e / nd, e % nd)).collect();
    let mut a = Vec::with_capacity(ns + nd);
    let mut b = Vec::with_capacity(ns + nd);
    for i in 0..ns {
        a.push((0..n).map(|e| if e / nd == i { 1.0 } else { 0.0 }).collect());
        b.push(supply[i]);
    }
    for j in 0..nd {
        a.push((0..n).map(|e| if e % nd == j { 1.0 } else { 0.0 }).collect());
        b.push(demand[j]);
    }
    minimize(&c, &a, &b).0
}

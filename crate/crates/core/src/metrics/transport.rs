//! Exact balanced transportation by the primal network simplex method.
//!
//! The bipartite graph has one arc per (supply, demand) pair. The initial
//! basis hangs every node from an artificial root, and leaving arcs follow
//! the strongly-feasible-tree rule, which rules out cycling on degenerate
//! pivots. Entering arcs are chosen by block search.

use crate::error::{Error, Result};

/// Optimal plan of a transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Total cost `sum(flow * cost)` over the optimal plan.
    pub cost: f64,
    /// Non-zero flows as `(supply index, demand index, amount)`.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

const NONE: usize = usize::MAX;

struct Simplex {
    n_sup: usize,
    n_dem: usize,
    // Real arcs are indexed `i * n_dem + j`; artificial arc of node `u` is
    // `n_arcs + u`.
    n_arcs: usize,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    // true when the predecessor arc points from the node to its parent.
    up: Vec<bool>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    stamp: Vec<u32>,
    epoch: u32,
    art_source: Vec<usize>,
}

impl Simplex {
    fn source(&self, e: usize) -> usize {
        if e < self.n_arcs {
            e / self.n_dem
        } else {
            self.art_source[e - self.n_arcs]
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.n_arcs {
            self.n_sup + e % self.n_dem
        } else {
            let u = e - self.n_arcs;
            if self.art_source[u] == u {
                self.root()
            } else {
                u
            }
        }
    }

    fn root(&self) -> usize {
        self.n_sup + self.n_dem
    }

    /// Block search from arc `next`: returns the most negative reduced-cost
    /// arc of the first block containing one, or `NONE` at optimality.
    fn price(&self, next: &mut usize, block: usize, eps: f64) -> usize {
        let nd = self.n_dem;
        let n_arcs = self.n_arcs;
        let pi_dem = &self.pi[self.n_sup..self.n_sup + nd];
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut scanned = 0;
        let mut in_block = 0;
        let mut e = *next;
        while scanned < n_arcs {
            // Walk one row segment at a time to avoid per-arc division.
            let (i, j0) = (e / nd, e % nd);
            let len = (nd - j0).min(block - in_block).min(n_arcs - scanned);
            let pi_i = self.pi[i];
            let costs = &self.cost[e..e + len];
            for (k, (&c, &pj)) in costs.iter().zip(&pi_dem[j0..j0 + len]).enumerate() {
                let rc = c + pi_i - pj;
                if rc < best_rc && !self.in_tree[e + k] {
                    best_rc = rc;
                    best = e + k;
                }
            }
            scanned += len;
            in_block += len;
            e += len;
            if e == n_arcs {
                e = 0;
            }
            if in_block == block {
                if best != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        *next = e;
        best
    }

    fn find_join(&mut self, a: usize, b: usize) -> usize {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        let mut u = a;
        while u != NONE {
            self.stamp[u] = self.epoch;
            u = self.parent[u];
        }
        let mut v = b;
        while self.stamp[v] != self.epoch {
            v = self.parent[v];
        }
        v
    }

    fn detach_child(&mut self, parent: usize, child: usize) {
        let kids = &mut self.children[parent];
        let pos = kids.iter().position(|&c| c == child).expect("tree child lists are consistent");
        kids.swap_remove(pos);
    }

    /// Recomputes potentials below `top` from its (already updated) parent.
    fn refresh_potentials(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            let p = self.parent[u];
            let c = self.cost[self.pred[u]];
            self.pi[u] = if self.up[u] { self.pi[p] - c } else { self.pi[p] + c };
            stack.extend_from_slice(&self.children[u]);
        }
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let first = self.source(entering);
        let second = self.target(entering);
        let join = self.find_join(first, second);

        // Leaving arc by the strongly feasible rule: strict on the first
        // side, non-strict on the second.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut out_on_first = false;
        let mut u = first;
        while u != join {
            if self.up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    out_on_first = true;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    out_on_first = false;
                }
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(Error::InvalidArgument("transport problem is unbounded".into()));
        }

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                if self.up[u] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                if self.up[u] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                u = self.parent[u];
            }
        }
        let leaving = self.pred[u_out];
        self.flow[leaving] = 0.0;

        let (u_in, v_in) = if out_on_first { (first, second) } else { (second, first) };

        // Reverse the path u_in -> ... -> u_out and hang it below v_in.
        let mut path = vec![u_in];
        while *path.last().unwrap() != u_out {
            let last = *path.last().unwrap();
            path.push(self.parent[last]);
        }
        let old_pred: Vec<usize> = path.iter().map(|&p| self.pred[p]).collect();
        let old_up: Vec<bool> = path.iter().map(|&p| self.up[p]).collect();
        let k = path.len() - 1;
        self.detach_child(self.parent[path[k]], path[k]);
        for i in 1..=k {
            let (child, node) = (path[i - 1], path[i]);
            self.detach_child(node, child);
            self.children[child].push(node);
            self.parent[node] = child;
            self.pred[node] = old_pred[i - 1];
            self.up[node] = !old_up[i - 1];
        }
        self.parent[u_in] = v_in;
        self.pred[u_in] = entering;
        self.up[u_in] = self.source(entering) == u_in;
        self.children[v_in].push(u_in);

        self.in_tree[entering] = true;
        self.in_tree[leaving] = false;
        self.refresh_potentials(u_in);
        Ok(())
    }
}

/// Solves `min sum c(i, j) x_ij` subject to row sums `supply` and column
/// sums `demand`, `x >= 0`. Both sides must be non-negative with equal
/// totals (up to rounding).
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportPlan> {
    let bad = |v: &&f64| !v.is_finite() || **v < 0.0;
    if supply.iter().any(|v| bad(&v)) || demand.iter().any(|v| bad(&v)) {
        return Err(Error::InvalidArgument("masses must be finite and non-negative".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if total_s <= 0.0 || total_d <= 0.0 {
        return Err(Error::AllZeroMap);
    }
    if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d) {
        return Err(Error::InvalidArgument(format!(
            "unbalanced transport: supply {total_s} vs demand {total_d}"
        )));
    }

    // Zero-mass nodes never carry flow in an optimal plan.
    let sup_idx: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0.0).collect();
    let dem_idx: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0.0).collect();
    let (n_sup, n_dem) = (sup_idx.len(), dem_idx.len());
    let n_nodes = n_sup + n_dem;
    let n_arcs = n_sup * n_dem;

    let mut arc_cost = Vec::with_capacity(n_arcs + n_nodes);
    let mut max_cost: f64 = 0.0;
    for &i in &sup_idx {
        for &j in &dem_idx {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite cost at ({i}, {j})")));
            }
            max_cost = max_cost.max(c.abs());
            arc_cost.push(c);
        }
    }
    let art_cost = (max_cost + 1.0) * n_nodes as f64;

    let root = n_nodes;
    let mut sx = Simplex {
        n_sup,
        n_dem,
        n_arcs,
        cost: arc_cost,
        flow: vec![0.0; n_arcs + n_nodes],
        in_tree: vec![false; n_arcs + n_nodes],
        parent: vec![NONE; n_nodes + 1],
        pred: vec![NONE; n_nodes + 1],
        up: vec![false; n_nodes + 1],
        pi: vec![0.0; n_nodes + 1],
        children: vec![Vec::new(); n_nodes + 1],
        stamp: vec![0; n_nodes + 1],
        epoch: 0,
        art_source: Vec::with_capacity(n_nodes),
    };
    let scale_s = 1.0 / total_s;
    let scale_d = 1.0 / total_d;
    for u in 0..n_nodes {
        let e = n_arcs + u;
        sx.parent[u] = root;
        sx.pred[u] = e;
        sx.in_tree[e] = true;
        sx.children[root].push(u);
        if u < n_sup {
            // Supply node: artificial arc u -> root.
            sx.up[u] = true;
            sx.art_source.push(u);
            sx.flow[e] = supply[sup_idx[u]] * scale_s;
            sx.cost.push(0.0);
            sx.pi[u] = 0.0;
        } else {
            sx.up[u] = false;
            sx.art_source.push(root);
            sx.flow[e] = demand[dem_idx[u - n_sup]] * scale_d;
            sx.cost.push(art_cost);
            sx.pi[u] = art_cost;
        }
    }

    // Block-search pricing over real arcs only.
    let eps = 1e-12 * art_cost;
    let block = ((n_arcs as f64).sqrt().ceil() as usize).max(16).min(n_arcs.max(1));
    let mut next = 0usize;
    let mut pivots = 0usize;
    let max_pivots = 50 * n_arcs + 1000;
    loop {
        let best = sx.price(&mut next, block, eps);
        if best == NONE {
            break;
        }
        sx.pivot(best)?;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::InvalidArgument("network simplex failed to converge".into()));
        }
    }

    let mut total = 0.0;
    let mut flows = Vec::new();
    for e in 0..n_arcs {
        let f = sx.flow[e];
        if f > 0.0 {
            let (i, j) = (e / n_dem, e % n_dem);
            total += f * sx.cost[e];
            flows.push((sup_idx[i], dem_idx[j], f * total_s));
        }
    }
    let stranded: f64 = (n_arcs..n_arcs + n_nodes).map(|e| sx.flow[e]).sum();
    if stranded > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "transport left {stranded} mass on artificial arcs"
        )));
    }
    Ok(TransportPlan {
        cost: total * total_s,
        flows,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_force_2x2(a: [f64; 2], b: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
        // One free variable x = x00; others follow from the marginals.
        let lo = 0f64.max(a[0] - b[1]);
        let hi = a[0].min(b[0]);
        let f = |x: f64| {
            let x01 = a[0] - x;
            let x10 = b[0] - x;
            let x11 = a[1] - x10;
            c[0][0] * x + c[0][1] * x01 + c[1][0] * x10 + c[1][1] * x11
        };
        f(lo).min(f(hi))
    }

    #[test]
    fn matches_two_by_two_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p: f64 = rng.random_range(0.01..0.99);
            let q: f64 = rng.random_range(0.01..0.99);
            let c = [[rng.random(), rng.random()], [rng.random(), rng.random()]];
            let a = [p, 1.0 - p];
            let b = [q, 1.0 - q];
            let plan = solve_transport(&a, &b, |i, j| c[i][j]).unwrap();
            assert!((plan.cost - brute_force_2x2(a, b, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_respects_marginals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        b.iter_mut().for_each(|v| *v *= sa / sb);
        let plan = solve_transport(&a, &b, |i, j| ((i as f64) - (j as f64)).abs()).unwrap();
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, f) in &plan.flows {
            rows[i] += f;
            cols[j] += f;
        }
        for (r, v) in rows.iter().zip(&a) {
            assert!((r - v).abs() < 1e-9);
        }
        for (c, v) in cols.iter().zip(&b) {
            assert!((c - v).abs() < 1e-9);
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // On a line with |i - j| cost the optimum is the L1 distance between CDFs.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = 12;
            let mut a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            a.iter_mut().for_each(|v| *v /= sa);
            b.iter_mut().for_each(|v| *v /= sb);
            let mut cdf = 0.0;
            let mut expected = 0.0;
            for k in 0..n {
                cdf += a[k] - b[k];
                expected += cdf.abs();
            }
            let plan = solve_transport(&a, &b, |i, j| (i as f64 - j as f64).abs()).unwrap();
            assert!((plan.cost - expected).abs() < 1e-10, "{} vs {}", plan.cost, expected);
        }
    }

    #[test]
    fn rejects_unbalanced_and_negative() {
        assert!(solve_transport(&[1.0], &[2.0], |_, _| 1.0).is_err());
        assert!(solve_transport(&[-1.0, 2.0], &[1.0], |_, _| 1.0).is_err());
        assert!(matches!(solve_transport(&[0.0], &[0.0], |_, _| 1.0), Err(Error::AllZeroMap)));
    }
}

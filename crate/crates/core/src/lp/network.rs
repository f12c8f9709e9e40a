//! Primal network simplex for the dense transportation problem
//!
//! ```text
//! min Σ C_ij P_ij   s.t.  Σ_j P_ij = a_i,  Σ_i P_ij = b_j,  P ≥ 0.
//! ```
//!
//! Nodes `0..n` are sources, `n..n+m` sinks; every arc runs source → sink.
//! The basis is a spanning tree stored by parent pointers, so the arc
//! joining a node to its parent is implicit and its orientation follows
//! from the node type: a sink hangs below a source on a "down" arc, a
//! source below a sink on an "up" arc.
//!
//! Degeneracy is handled with strongly feasible trees (every zero-flow
//! tree arc points away from the root). The initial tree comes from the
//! north-west corner rule, breaking ties by advancing the column so that
//! the degenerate arcs point down, and the leaving arc is the last
//! blocking arc met when walking the pivot cycle from its apex along the
//! direction of the entering flow. This rule keeps the tree strongly
//! feasible and rules out cycling.

use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

/// Optimal basis of a transportation problem.
#[derive(Clone, Debug)]
pub struct TransportBasis<T> {
    /// The `n + m − 1` tree arcs `(i, j, flow)`; degenerate arcs carry zero.
    pub arcs: Vec<(usize, usize, T)>,
    /// Row potentials; `f_i + g_j = C_ij` on every tree arc.
    pub f: Vec<T>,
    /// Column potentials, shifted so that the last entry is zero.
    pub g: Vec<T>,
    pub pivots: usize,
}

struct Tree<'a, T> {
    n: usize,
    m: usize,
    cost: &'a [T],
    supply: Vec<T>,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    flow: Vec<T>,
    pot: Vec<T>,
    root: usize,
    zero_tol: T,
}

impl<'a, T: Real> Tree<'a, T> {
    #[inline]
    fn is_sink(&self, v: usize) -> bool {
        v >= self.n
    }

    /// Cost of the arc joining `v` to `w`, one source and one sink.
    #[inline]
    fn arc_cost(&self, v: usize, w: usize) -> T {
        let (i, j) = if v < self.n { (v, w - self.n) } else { (w, v - self.n) };
        self.cost[i * self.m + j]
    }

    fn attach(&mut self, child: usize, parent: usize) {
        self.parent[child] = parent;
        self.children[parent].push(child);
    }

    fn detach(&mut self, child: usize) {
        let p = self.parent[child];
        let kids = &mut self.children[p];
        let pos = kids.iter().position(|&c| c == child).expect("child listed");
        kids.swap_remove(pos);
        self.parent[child] = NONE;
    }

    /// Pre-order of the subtree rooted at `start`.
    fn preorder(&self, start: usize) -> Vec<usize> {
        let mut order = Vec::new();
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().copied());
        }
        order
    }

    /// Recomputes depths and potentials below `start` from its own values.
    fn refresh_subtree(&mut self, start: usize) {
        for v in self.preorder(start) {
            for k in 0..self.children[v].len() {
                let w = self.children[v][k];
                self.depth[w] = self.depth[v] + 1;
                self.pot[w] = self.arc_cost(v, w) - self.pot[v];
            }
        }
    }

    /// Recomputes every tree flow from the supplies. Returns the most
    /// negative flow encountered before clamping.
    fn recompute_flows(&mut self) -> T {
        let order = self.preorder(self.root);
        let mut net = self.supply.clone();
        let mut worst = T::zero();
        for &v in order.iter().rev() {
            if v == self.root {
                continue;
            }
            let p = self.parent[v];
            // a source pushes its surplus up; a sink pulls its deficit down
            let nv = net[v];
            let mut x = if self.is_sink(v) { -nv } else { nv };
            worst = worst.min(x);
            if x.abs() <= self.zero_tol {
                x = T::zero();
            }
            self.flow[v] = x.max(T::zero());
            net[p] += nv;
        }
        worst
    }

    fn lca(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u];
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v];
        }
        while u != v {
            u = self.parent[u];
            v = self.parent[v];
        }
        u
    }

    /// Pivots arc `(i, j)` into the basis.
    fn pivot(&mut self, i: usize, j: usize, reduced: T) {
        let u = i;
        let v = self.n + j;
        let join = self.lca(u, v);

        // Walk the cycle backwards on the source side and forwards on the
        // sink side; the tie rules select the last blocking arc in cycle order.
        let mut delta = T::infinity();
        let mut out = NONE;
        let mut out_first = false;
        let mut w = u;
        while w != join {
            if !self.is_sink(w) && self.flow[w] < delta {
                delta = self.flow[w];
                out = w;
                out_first = true;
            }
            w = self.parent[w];
        }
        w = v;
        while w != join {
            if self.is_sink(w) && self.flow[w] <= delta {
                delta = self.flow[w];
                out = w;
                out_first = false;
            }
            w = self.parent[w];
        }
        debug_assert!(out != NONE, "transportation cycles always contain a backward arc");

        if delta > T::zero() {
            let mut w = u;
            while w != join {
                if self.is_sink(w) {
                    self.flow[w] += delta;
                } else {
                    self.flow[w] -= delta;
                }
                w = self.parent[w];
            }
            w = v;
            while w != join {
                if self.is_sink(w) {
                    self.flow[w] -= delta;
                } else {
                    self.flow[w] += delta;
                }
                w = self.parent[w];
            }
        }

        let (inner, outer) = if out_first { (u, v) } else { (v, u) };

        // Reverse the path inner → out so that `inner` hangs below `outer`.
        let mut path = vec![inner];
        while *path.last().unwrap() != out {
            let last = *path.last().unwrap();
            path.push(self.parent[last]);
        }
        let old_flows: Vec<T> = path.iter().map(|&p| self.flow[p]).collect();
        self.detach(out);
        for k in (0..path.len() - 1).rev() {
            self.detach(path[k]);
        }
        self.attach(inner, outer);
        self.flow[inner] = delta;
        for k in 0..path.len() - 1 {
            self.attach(path[k + 1], path[k]);
            self.flow[path[k + 1]] = old_flows[k];
        }
        for &p in &path {
            if self.flow[p].abs() <= self.zero_tol {
                self.flow[p] = T::zero();
            }
        }

        // Shift potentials on the re-hung subtree to make (i, j) tight.
        let subtree = self.preorder(inner);
        let inner_is_source = !self.is_sink(inner);
        for &s in &subtree {
            let shift = if self.is_sink(s) == inner_is_source { -reduced } else { reduced };
            self.pot[s] += shift;
        }
        self.depth[inner] = self.depth[outer] + 1;
        for &s in &subtree {
            for &c in &self.children[s] {
                self.depth[c] = self.depth[s] + 1;
            }
        }
    }
}

/// Solves the transportation problem with row-major `cost` (`n × m`).
///
/// `order` gives the row and column sequences used by the north-west
/// corner start; sorting both sides along a common direction gives a
/// near-optimal (in one dimension, optimal) initial basis.
pub fn solve_transport<T: Real>(
    a: &[T],
    b: &[T],
    cost: &[T],
    order: Option<(&[usize], &[usize])>,
) -> Result<TransportBasis<T>> {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return Err(Error::Invalid("empty marginal".into()));
    }
    if cost.len() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "cost has {} entries, expected {n}×{m}",
            cost.len()
        )));
    }
    let rows: Vec<usize> = order.map_or_else(|| (0..n).collect(), |o| o.0.to_vec());
    let cols: Vec<usize> = order.map_or_else(|| (0..m).collect(), |o| o.1.to_vec());
    debug_assert_eq!(rows.len(), n);
    debug_assert_eq!(cols.len(), m);

    let mass_scale = a.iter().chain(b).fold(T::zero(), |s, &v| s.max(v));
    let zero_tol = T::solver_eps() * mass_scale;
    let cost_scale = cost.iter().fold(T::zero(), |s, &c| s.max(c.abs()));
    let price_tol = T::solver_eps() * (T::one() + cost_scale);

    let nodes = n + m;
    let mut supply: Vec<T> = a.to_vec();
    supply.extend(b.iter().map(|&x| -x));
    let mut tree = Tree {
        n,
        m,
        cost,
        supply,
        parent: vec![NONE; nodes],
        children: vec![Vec::new(); nodes],
        depth: vec![0; nodes],
        flow: vec![T::zero(); nodes],
        pot: vec![T::zero(); nodes],
        root: rows[0],
        zero_tol,
    };

    // North-west corner start.
    let (mut p, mut q) = (0usize, 0usize);
    let mut rem_a = a[rows[0]];
    let mut rem_b = b[cols[0]];
    tree.attach(n + cols[0], rows[0]);
    loop {
        let x = rem_a.min(rem_b);
        rem_a -= x;
        rem_b -= x;
        if p + 1 == n && q + 1 == m {
            break;
        }
        let advance_col = q + 1 < m && (p + 1 == n || rem_b <= zero_tol);
        if advance_col {
            q += 1;
            tree.attach(n + cols[q], rows[p]);
            rem_b = b[cols[q]];
        } else {
            p += 1;
            tree.attach(rows[p], n + cols[q]);
            rem_a = a[rows[p]];
        }
    }
    let root = tree.root;
    tree.depth[root] = 0;
    tree.pot[root] = T::zero();
    tree.refresh_subtree(root);
    tree.recompute_flows();

    // Block-search pricing.
    let arcs = n * m;
    let block = ((arcs as f64).sqrt() as usize).max(16).min(arcs);
    let max_pivots = 200 * (n + m) + 10_000;
    let mut next = 0usize;
    let mut pivots = 0usize;
    loop {
        let mut best = (T::zero(), NONE);
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        while scanned < arcs {
            let e = next;
            next += 1;
            if next == arcs {
                next = 0;
            }
            scanned += 1;
            in_block += 1;
            let (i, j) = (e / m, e % m);
            let r = cost[e] - tree.pot[i] - tree.pot[n + j];
            if r < best.0 {
                best = (r, e);
            }
            if in_block == block {
                if best.0 < -price_tol {
                    break;
                }
                in_block = 0;
            }
        }
        if best.0 >= -price_tol {
            break;
        }
        let (i, j) = (best.1 / m, best.1 % m);
        tree.pivot(i, j, best.0);
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical {
                message: format!("network simplex exceeded {max_pivots} pivots"),
                residual: best.0.abs().as_f64(),
            });
        }
    }

    // Clean up accumulated rounding: exact tree flows and potentials.
    let worst = tree.recompute_flows();
    if worst < -(T::lit(1e3) * zero_tol).max(T::lit(1e-11) * mass_scale) {
        return Err(Error::Numerical {
            message: "negative flow on an optimal basis".into(),
            residual: worst.abs().as_f64(),
        });
    }
    tree.pot[root] = T::zero();
    tree.refresh_subtree(root);

    let mut arcs_out = Vec::with_capacity(nodes - 1);
    for v in 0..nodes {
        if v == root {
            continue;
        }
        let w = tree.parent[v];
        let (i, j) = if v < n { (v, w - n) } else { (w, v - n) };
        arcs_out.push((i, j, tree.flow[v]));
    }
    let shift = tree.pot[n + m - 1];
    let f = tree.pot[..n].iter().map(|&x| x + shift).collect();
    let g = tree.pot[n..].iter().map(|&x| x - shift).collect();
    Ok(TransportBasis {
        arcs: arcs_out,
        f,
        g,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &[f64], b: &[f64], cost: &[f64], expected: f64) {
        let sol = solve_transport(a, b, cost, None).unwrap();
        let m = b.len();
        let value: f64 = sol.arcs.iter().map(|&(i, j, x)| x * cost[i * m + j]).sum();
        assert!((value - expected).abs() < 1e-12, "value {value} vs {expected}");
        let dual: f64 = sol.f.iter().zip(a).map(|(f, a)| f * a).sum::<f64>()
            + sol.g.iter().zip(b).map(|(g, b)| g * b).sum::<f64>();
        assert!((dual - expected).abs() < 1e-12);
        for i in 0..a.len() {
            for j in 0..m {
                assert!(sol.f[i] + sol.g[j] <= cost[i * m + j] + 1e-12);
            }
        }
        assert_eq!(sol.g[m - 1], 0.0);
    }

    #[test]
    fn two_by_two_crossing() {
        // x = {0, 2}, y = {1, 3}, half squared distances; monotone plan costs 0.5
        check(&[0.5, 0.5], &[0.5, 0.5], &[0.5, 4.5, 0.5, 0.5], 0.5);
        // reversed column order forces a pivot away from the start
        check(&[0.5, 0.5], &[0.5, 0.5], &[4.5, 0.5, 0.5, 0.5], 0.5);
    }

    #[test]
    fn unbalanced_sizes() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.6, 0.4];
        let cost = [3.0, 1.0, 2.0, 2.0, 1.0, 5.0];
        // brute force over the two free entries P_00, P_10 on a 1e-4 lattice
        let mut best = f64::INFINITY;
        for k in 0..=2000 {
            for l in 0..=3000 {
                let p00 = k as f64 * 1e-4;
                let p10 = l as f64 * 1e-4;
                let p20 = 0.6 - p00 - p10;
                if !(-1e-12..=0.5 + 1e-12).contains(&p20) {
                    continue;
                }
                let v = p00 * 3.0 + (0.2 - p00) * 1.0 + p10 * 2.0 + (0.3 - p10) * 2.0
                    + p20 * 1.0 + (0.5 - p20) * 5.0;
                best = best.min(v);
            }
        }
        check(&a, &b, &cost, best);
    }

    #[test]
    fn single_cell() {
        check(&[1.0], &[1.0], &[2.5], 2.5);
    }
}

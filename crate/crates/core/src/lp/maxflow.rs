use std::collections::VecDeque;

use crate::scalar::Real;

/// Dinic's algorithm on real capacities. Residual capacities at or below
/// `tol` count as saturated.
#[derive(Clone, Debug)]
pub struct MaxFlow<T> {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<T>,
    tol: T,
}

impl<T: Real> MaxFlow<T> {
    pub fn new(nodes: usize, tol: T) -> Self {
        Self {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            tol,
        }
    }

    /// Adds `u → v`; returns the arc id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: T) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(T::zero());
        id
    }

    /// Flow currently routed on arc `id`.
    pub fn flow(&self, id: usize) -> T {
        self.cap[id + 1]
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > self.tol && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, pushed: T, level: &[usize], it: &mut [usize]) -> T {
        if u == t {
            return pushed;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > self.tol && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, it);
                if got > T::zero() {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        T::zero()
    }

    pub fn run(&mut self, s: usize, t: usize) -> T {
        let mut total = T::zero();
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0usize; self.head.len()];
            loop {
                let got = self.augment(s, t, T::infinity(), &level, &mut it);
                if got <= T::zero() {
                    break;
                }
                total += got;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph after [`run`](Self::run).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let level = self.levels(s);
        level.iter().map(|&l| l != usize::MAX).collect()
    }
}

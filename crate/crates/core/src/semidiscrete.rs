//! Semi-discrete dual: minimization of
//!
//! ```text
//! F(g) = Σ_i a_i φ_g(x_i) + Σ_j b_j (½‖y_j‖² − g_j)
//! ```
//!
//! over offsets `g`, for a target `ν = Σ b_j δ_{y_j}` and a source given by
//! samples or quadrature nodes `x_i` with weights `a_i`. Its minimum equals
//! `½∫‖x‖²dμ + ½∫‖y‖²dν − OT(μ, ν)`.

use std::collections::HashMap;

use serde::Serialize;

use crate::brenier::BrenierPotential;
use crate::error::{Error, Result};
use crate::lp::MaxFlow;
use crate::measures::Measure;
use crate::scalar::{dot, norm_sq, Real};

/// Largest `samples × atoms` table kept in memory.
pub const MAX_TABLE: usize = 50_000_000;

#[derive(Clone, Debug)]
pub struct SemiDual<T> {
    source: Measure<T>,
    target: Measure<T>,
    /// `⟨x_i, y_k⟩ − ½‖y_k‖²`, row-major by sample.
    cross: Vec<T>,
}

/// Hard assignment of every source point to a Laguerre cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T> {
    /// Maximizing piece per source point, lowest index on ties.
    pub labels: Vec<usize>,
    /// Source mass per cell.
    pub masses: Vec<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    /// Tie tolerance of the current stage; bounds the optimality gap once the stage is certified.
    pub tolerance: f64,
    /// Unmatched mass `1 − maxflow` of the matching between points and tied cells.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SemiDualSolution<T> {
    /// Optimal offsets, normalized so the last entry is zero.
    pub g: Vec<T>,
    pub objective: T,
    /// Certified bound on `F(g) − min F`.
    pub gap_bound: T,
    /// Unmatched mass at the final tolerance.
    pub residual: T,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

impl<T: Real> SemiDual<T> {
    pub fn new(source: Measure<T>, target: Measure<T>) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch(format!(
                "source in R^{} but target in R^{}",
                source.dim(),
                target.dim()
            )));
        }
        let (n, m) = (source.len(), target.len());
        if n.saturating_mul(m) > MAX_TABLE {
            return Err(Error::TooLarge(format!("{n} source points × {m} atoms")));
        }
        let half = T::lit(0.5);
        let sq: Vec<T> = target.points().map(|y| half * norm_sq(y)).collect();
        let mut cross = Vec::with_capacity(n * m);
        for x in source.points() {
            for (y, &s) in target.points().zip(&sq) {
                cross.push(dot(x, y) - s);
            }
        }
        Ok(Self { source, target, cross })
    }

    pub fn source(&self) -> &Measure<T> {
        &self.source
    }

    pub fn target(&self) -> &Measure<T> {
        &self.target
    }

    fn check(&self, g: &[T]) -> Result<()> {
        if g.len() != self.target.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} offsets for {} atoms",
                g.len(),
                self.target.len()
            )));
        }
        Ok(())
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        let m = self.target.len();
        &self.cross[i * m..(i + 1) * m]
    }

    /// `½∫‖x‖²dμ + ½∫‖y‖²dν`, the constant linking `min F` to the transport cost.
    pub fn moment_term(&self) -> T {
        self.source.half_second_moment() + self.target.half_second_moment()
    }

    pub fn objective(&self, g: &[T]) -> Result<T> {
        self.check(g)?;
        let half = T::lit(0.5);
        let mut total = T::zero();
        for (i, &a) in self.source.weights().iter().enumerate() {
            let top = self.row(i).iter().zip(g).map(|(&c, &gk)| c + gk).fold(T::neg_infinity(), T::max);
            total += a * top;
        }
        for (y, (&b, &gk)) in self.target.points().zip(self.target.weights().iter().zip(g)) {
            total += b * (half * norm_sq(y) - gk);
        }
        Ok(total)
    }

    pub fn laguerre_assign(&self, g: &[T]) -> Result<Assignment<T>> {
        self.check(g)?;
        let m = self.target.len();
        let mut labels = Vec::with_capacity(self.source.len());
        let mut masses = vec![T::zero(); m];
        for (i, &a) in self.source.weights().iter().enumerate() {
            let mut best = (T::neg_infinity(), 0);
            for (k, (&c, &gk)) in self.row(i).iter().zip(g).enumerate() {
                if c + gk > best.0 {
                    best = (c + gk, k);
                }
            }
            labels.push(best.1);
            masses[best.1] += a;
        }
        Ok(Assignment { labels, masses })
    }

    /// Cell masses minus target weights: a subgradient of `F`.
    pub fn subgradient(&self, g: &[T]) -> Result<Vec<T>> {
        let cells = self.laguerre_assign(g)?;
        Ok(cells
            .masses
            .iter()
            .zip(self.target.weights())
            .map(|(&c, &b)| c - b)
            .collect())
    }

    pub fn potential(&self, g: &[T]) -> Result<BrenierPotential<T>> {
        BrenierPotential::from_dual(&self.target, g)
    }

    /// Minimizes `F` to within `tol · (1 + |F|)`.
    ///
    /// Each step matches source points to the cells tied within the current
    /// tolerance by a max-flow; a deficient matching yields, through its
    /// minimum cut, a set `S` of cells whose offsets can be lowered jointly,
    /// and the step length along `−1_S` is found exactly from the
    /// breakpoints of the piecewise-linear restriction. A complete matching
    /// certifies `F(g) − min F ≤ tolerance`, which is then reduced tenfold.
    pub fn minimize(&self, init: Option<&[T]>, tol: T, max_iter: usize) -> Result<SemiDualSolution<T>> {
        if !(tol > T::zero()) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
        }
        let m = self.target.len();
        let mut g: Vec<T> = match init {
            Some(g0) => {
                self.check(g0)?;
                g0.to_vec()
            }
            None => vec![T::zero(); m],
        };
        let rx = self.source.support_radius();
        let ry = self.target.support_radius();
        let scale = T::one() + (rx + ry) * (rx + ry);
        let floor = T::lit(1e-13).max(T::solver_eps() * T::lit(16.0)) * scale;
        let mut delta = T::lit(1e-2) * scale;
        let mut objective = self.objective(&g)?;
        let mut trace = Vec::new();
        let mut iterations = 0usize;
        let mut residual;
        loop {
            let (deficit, cut) = self.matching(&g, delta);
            residual = deficit;
            trace.push(TraceRow {
                iteration: iterations,
                objective: objective.as_f64(),
                tolerance: delta.as_f64(),
                residual: deficit.as_f64(),
            });
            match cut {
                None => {
                    let target = tol * (T::one() + objective.abs());
                    if delta <= target || delta <= floor {
                        break;
                    }
                    delta = (delta * T::lit(0.1)).max(floor).max(target * T::lit(0.5).min(T::one()));
                }
                Some(set) => {
                    if iterations >= max_iter {
                        return Err(Error::MaxIter {
                            max_iter,
                            residual: deficit.as_f64(),
                        });
                    }
                    let step = self.line_search(&g, &set);
                    for (gk, &inside) in g.iter_mut().zip(&set) {
                        if inside {
                            *gk -= step;
                        }
                    }
                    objective = self.objective(&g)?;
                    iterations += 1;
                }
            }
        }
        let shift = g[m - 1];
        g.iter_mut().for_each(|v| *v -= shift);
        let objective = self.objective(&g)?;
        Ok(SemiDualSolution {
            g,
            objective,
            gap_bound: delta,
            residual,
            iterations,
            trace,
        })
    }

    /// Max-flow matching of source mass to cells tied within `delta`.
    /// Returns the unmatched mass and, when positive, the source side of a
    /// minimum cut restricted to the cells.
    fn matching(&self, g: &[T], delta: T) -> (T, Option<Vec<bool>>) {
        let m = self.target.len();
        let mut groups: HashMap<Vec<usize>, T> = HashMap::new();
        for (i, &a) in self.source.weights().iter().enumerate() {
            let vals: Vec<T> = self.row(i).iter().zip(g).map(|(&c, &gk)| c + gk).collect();
            let top = vals.iter().copied().fold(T::neg_infinity(), T::max);
            let key: Vec<usize> = (0..m).filter(|&k| vals[k] >= top - delta).collect();
            *groups.entry(key).or_insert_with(T::zero) += a;
        }
        let mut keys: Vec<(Vec<usize>, T)> = groups.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        let source = 0;
        let sink = 1;
        let cell_node = |k: usize| 2 + k;
        let group_node = |r: usize| 2 + m + r;
        let mut net = MaxFlow::new(2 + m + keys.len(), T::epsilon() * T::lit(4.0));
        for (k, &b) in self.target.weights().iter().enumerate() {
            net.add_edge(cell_node(k), sink, b);
        }
        for (r, (cells, mass)) in keys.iter().enumerate() {
            net.add_edge(source, group_node(r), *mass);
            for &k in cells {
                net.add_edge(group_node(r), cell_node(k), T::infinity());
            }
        }
        let flow = net.run(source, sink);
        let deficit = (T::one() - flow).max(T::zero());
        if deficit <= T::lit(1e-12).max(T::solver_eps() * T::lit(16.0)) {
            return (deficit, None);
        }
        let side = net.source_side(source);
        let set: Vec<bool> = (0..m).map(|k| side[cell_node(k)]).collect();
        if set.iter().all(|&s| !s) || set.iter().all(|&s| s) {
            return (deficit, None);
        }
        (deficit, Some(set))
    }

    /// Exact minimizer over `t ≥ 0` of `F(g − t·1_S)`.
    fn line_search(&self, g: &[T], set: &[bool]) -> T {
        let b_set: T = self
            .target
            .weights()
            .iter()
            .zip(set)
            .filter(|(_, &s)| s)
            .map(|(&b, _)| b)
            .sum();
        let mut breaks: Vec<(T, T)> = Vec::new();
        for (i, &a) in self.source.weights().iter().enumerate() {
            let mut inside = T::neg_infinity();
            let mut outside = T::neg_infinity();
            for ((&c, &gk), &s) in self.row(i).iter().zip(g).zip(set) {
                if s {
                    inside = inside.max(c + gk);
                } else {
                    outside = outside.max(c + gk);
                }
            }
            if inside > outside {
                breaks.push((inside - outside, a));
            }
        }
        // slope at t is b(S) − Σ_{t_i > t} a_i; stop where it turns nonnegative
        breaks.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut mass = T::zero();
        for &(t, a) in &breaks {
            mass += a;
            if mass >= b_set {
                return t;
            }
        }
        breaks.last().map_or(T::zero(), |b| b.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Measure<f64> {
        Measure::uniform(1, points.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn objective_examples() {
        let sd = SemiDual::new(line(&[0.3, -2.0]), line(&[0.0])).unwrap();
        assert_eq!(sd.objective(&[0.0]).unwrap(), 0.0);
        let sd = SemiDual::new(line(&[0.0]), line(&[-1.0, 1.0])).unwrap();
        assert_eq!(sd.objective(&[0.0, 0.0]).unwrap(), 0.0);
        let a = sd.objective(&[0.2, -0.4]).unwrap();
        let b = sd.objective(&[1.7, 1.1]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(sd.objective(&[0.0]).is_err());
    }

    #[test]
    fn assignment_examples() {
        let sd = SemiDual::new(line(&[-0.5, 0.5]), line(&[-1.0, 1.0])).unwrap();
        let cells = sd.laguerre_assign(&[0.0, 0.0]).unwrap();
        assert_eq!(cells.labels, vec![0, 1]);
        assert_eq!(cells.masses, vec![0.5, 0.5]);
        assert_eq!(sd.subgradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let single = SemiDual::new(line(&[-0.5, 0.5, 3.0]), line(&[2.0])).unwrap();
        assert_eq!(single.laguerre_assign(&[4.0]).unwrap().masses, vec![1.0]);
        let tie = SemiDual::new(line(&[0.0]), line(&[-1.0, 1.0])).unwrap();
        assert_eq!(tie.laguerre_assign(&[0.0, 0.0]).unwrap().labels, vec![0]);
    }

    #[test]
    fn minimizes_small_instance() {
        let mu = line(&[0.0, 2.0]);
        let nu = line(&[1.0, 3.0]);
        let sd = SemiDual::new(mu.clone(), nu.clone()).unwrap();
        let sol = sd.minimize(None, 1e-12, 1000).unwrap();
        // optimal transport cost is 0.5
        assert!((sol.objective - (sd.moment_term() - 0.5)).abs() < 1e-10);
        assert_eq!(sol.g[1], 0.0);
    }

    #[test]
    fn identical_measures() {
        let mu = line(&[-1.0, 0.25, 2.0]);
        let sd = SemiDual::new(mu.clone(), mu.clone()).unwrap();
        let sol = sd.minimize(None, 1e-12, 1000).unwrap();
        assert!((sol.objective - sd.moment_term()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let sd = SemiDual::new(line(&[0.0]), line(&[0.0])).unwrap();
        assert!(sd.minimize(None, 0.0, 10).is_err());
    }
}

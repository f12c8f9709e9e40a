//! The explicit piecewise-affine Brenier potential
//!
//! ```text
//! φ_g(x) = max_k ⟨x, y_k⟩ + g_k − ½‖y_k‖²
//! ```
//!
//! built from target atoms `y_k` and dual offsets `g_k`, together with its
//! subdifferential, Monge map selection, Legendre conjugate and proximal map.

mod prox;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{DenseLp, LpFailure};
use crate::measures::Measure;
use crate::ot_lp::{OtSolution, ACTIVE_MASS};
use crate::scalar::{dot, norm_sq, Real};

/// Relative tie tolerance used when none is given: `1e-9 · (1 + |φ(x)|)`.
pub const TOL_ACT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BrenierPotential<T> {
    dim: usize,
    atoms: Vec<T>,
    g: Vec<T>,
    /// Intercepts `c_k = g_k − ½‖y_k‖²`.
    c: Vec<T>,
    tightened: bool,
}

#[derive(Serialize, Deserialize)]
struct PotentialFile<T> {
    atoms: Vec<Vec<T>>,
    g: Vec<T>,
    #[serde(default)]
    tightened: bool,
}

impl<T: Real> BrenierPotential<T> {
    /// Potential with atoms `y_k` (rows of `atoms`, flat row-major) and offsets `g`.
    pub fn from_flat(dim: usize, atoms: Vec<T>, g: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if !atoms.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into points of R^{dim}",
                atoms.len()
            )));
        }
        let m = atoms.len() / dim;
        if m == 0 {
            return Err(Error::Invalid("potential needs at least one atom".into()));
        }
        if g.len() != m {
            return Err(Error::DimensionMismatch(format!("{} offsets for {m} atoms", g.len())));
        }
        if !atoms.iter().chain(&g).all(|v| v.is_finite()) {
            return Err(Error::Invalid("non-finite atom or offset".into()));
        }
        let half = T::lit(0.5);
        let c = atoms
            .chunks_exact(dim)
            .zip(&g)
            .map(|(y, &gk)| gk - half * norm_sq(y))
            .collect();
        Ok(Self {
            dim,
            atoms,
            g,
            c,
            tightened: false,
        })
    }

    pub fn new(dim: usize, atoms: Vec<Vec<T>>, g: Vec<T>) -> Result<Self> {
        if let Some(p) = atoms.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(format!("atom of length {} in R^{dim}", p.len())));
        }
        Self::from_flat(dim, atoms.concat(), g)
    }

    /// Potential associated with dual offsets `g` on the atoms of `nu`.
    pub fn from_dual(nu: &Measure<T>, g: &[T]) -> Result<Self> {
        Self::from_flat(nu.dim(), nu.coords().to_vec(), g.to_vec())
    }

    pub fn from_solution(nu: &Measure<T>, sol: &OtSolution<T>) -> Result<Self> {
        Self::from_dual(nu, &sol.duals.g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[T] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.atoms.chunks_exact(self.dim)
    }

    pub fn offsets(&self) -> &[T] {
        &self.g
    }

    pub fn intercepts(&self) -> &[T] {
        &self.c
    }

    pub fn is_tightened(&self) -> bool {
        self.tightened
    }

    /// Global Lipschitz constant `max_k ‖y_k‖`.
    pub fn lipschitz(&self) -> T {
        self.atoms().map(norm_sq).fold(T::zero(), T::max).sqrt()
    }

    /// Affine piece `A_k(x) = ⟨x, y_k⟩ + g_k − ½‖y_k‖²`.
    #[inline]
    pub fn piece(&self, k: usize, x: &[T]) -> T {
        dot(x, self.atom(k)) + self.c[k]
    }

    fn check_point(&self, x: &[T]) {
        assert_eq!(x.len(), self.dim, "point of length {} for a potential on R^{}", x.len(), self.dim);
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.check_point(x);
        (0..self.len()).map(|k| self.piece(k, x)).fold(T::neg_infinity(), T::max)
    }

    /// Value and lowest maximizing index.
    pub fn eval_argmax(&self, x: &[T]) -> (T, usize) {
        self.check_point(x);
        let mut best = (T::neg_infinity(), 0);
        for k in 0..self.len() {
            let v = self.piece(k, x);
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    pub fn default_tol(value: T) -> T {
        T::lit(TOL_ACT) * (T::one() + value.abs())
    }

    /// Sorted indices `k` with `A_k(x) ≥ φ(x) − tol_act`.
    pub fn active_set(&self, x: &[T]) -> Vec<usize> {
        self.active_set_tol(x, None)
    }

    pub fn active_set_tol(&self, x: &[T], tol: Option<T>) -> Vec<usize> {
        self.check_point(x);
        let vals: Vec<T> = (0..self.len()).map(|k| self.piece(k, x)).collect();
        let top = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = tol.unwrap_or_else(|| Self::default_tol(top));
        (0..self.len()).filter(|&k| vals[k] >= top - tol).collect()
    }

    /// Averaging selection of the subdifferential: the mean of the active atoms.
    pub fn monge_map(&self, x: &[T]) -> Vec<T> {
        self.map_from_active(&self.active_set(x))
    }

    fn map_from_active(&self, active: &[usize]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &k in active {
            for (o, &y) in out.iter_mut().zip(self.atom(k)) {
                *o += y;
            }
        }
        let count = T::of_usize(active.len());
        out.iter_mut().for_each(|o| *o /= count);
        out
    }

    /// `φ*(y) = min Σ λ_k (½‖y_k‖² − g_k)` over simplex weights with
    /// `Σ λ_k y_k = y`; `+∞` when `y` is outside the convex hull of the atoms.
    pub fn conjugate(&self, y: &[T]) -> T {
        self.check_point(y);
        let m = self.len();
        if m == 1 {
            let same = self.atom(0).iter().zip(y).all(|(&a, &b)| (a - b).abs() <= self.hull_tol());
            return if same { -self.c[0] } else { T::infinity() };
        }
        let mut lp = DenseLp::new(m);
        for k in 0..m {
            lp.set_cost(k, -self.c[k]);
        }
        for i in 0..self.dim {
            lp.add_eq((0..m).map(|k| self.atom(k)[i]).collect(), y[i]);
        }
        lp.add_eq(vec![T::one(); m], T::one());
        match lp.solve(self.hull_tol()) {
            Ok(sol) => sol.value,
            Err(_) => T::infinity(),
        }
    }

    fn atom_scale(&self) -> T {
        T::one() + self.atoms.iter().fold(T::zero(), |s, v| s.max(v.abs()))
    }

    fn hull_tol(&self) -> T {
        T::lit(1e-10).max(T::solver_eps() * T::lit(16.0)) * self.atom_scale()
    }

    /// ℓ¹ residual of the best representation of `v` as a convex
    /// combination of the atoms indexed by `subset`.
    pub fn hull_residual(&self, subset: &[usize], v: &[T]) -> T {
        self.check_point(v);
        if subset.is_empty() {
            return T::infinity();
        }
        let mut lp = DenseLp::new(subset.len());
        for i in 0..self.dim {
            lp.add_eq(subset.iter().map(|&k| self.atom(k)[i]).collect(), v[i]);
        }
        lp.add_eq(vec![T::one(); subset.len()], T::one());
        match lp.solve(T::zero()) {
            Ok(sol) => sol.infeasibility,
            Err(LpFailure::Infeasible { residual }) => residual,
            Err(_) => T::infinity(),
        }
    }

    /// Residual of `v ∈ ∂φ(x) = conv{y_k : k ∈ I(x)}`.
    pub fn subdifferential_residual(&self, x: &[T], v: &[T]) -> T {
        self.hull_residual(&self.active_set(x), v)
    }

    /// Raises every offset to the largest value that leaves `φ` unchanged,
    /// so that each affine piece touches the graph and
    /// `φ*(y_k) = ½‖y_k‖² − g_k` for all `k`.
    pub fn tighten(&self) -> Self {
        let half = T::lit(0.5);
        let scale = T::one() + self.c.iter().fold(T::zero(), |s, v| s.max(v.abs()));
        let keep = T::lit(1e-12) * scale;
        let g: Vec<T> = (0..self.len())
            .map(|k| {
                let conj = self.conjugate(self.atom(k));
                let raised = half * norm_sq(self.atom(k)) - conj;
                if raised.is_finite() && raised > self.g[k] + keep {
                    raised
                } else {
                    self.g[k]
                }
            })
            .collect();
        let mut out = Self::from_flat(self.dim, self.atoms.clone(), g).expect("same shape");
        out.tightened = true;
        out
    }

    /// Shifts all offsets so that the last one is zero; `φ` moves by a constant.
    pub fn normalized(&self) -> Self {
        let shift = *self.g.last().expect("nonempty");
        let g = self.g.iter().map(|&v| v - shift).collect();
        let mut out = Self::from_flat(self.dim, self.atoms.clone(), g).expect("same shape");
        out.tightened = self.tightened;
        out
    }

    /// Adds `c` to every offset, i.e. returns `φ + c`.
    pub fn shifted(&self, c: T) -> Self {
        let g = self.g.iter().map(|&v| v + c).collect();
        let mut out = Self::from_flat(self.dim, self.atoms.clone(), g).expect("same shape");
        out.tightened = self.tightened;
        out
    }

    /// A point where the piece `q` attains `φ`, found by minimizing
    /// `φ(x) − ⟨x, y_q⟩` as an epigraph LP over a box. `None` when the piece
    /// never touches the graph.
    pub fn witness(&self, q: usize) -> Option<Vec<T>> {
        let (d, m) = (self.dim, self.len());
        let max_g = self.g.iter().fold(T::zero(), |s, v| s.max(v.abs()));
        let ry = self.lipschitz();
        let mut radius = T::lit(10.0) * (T::one() + ry + ry + max_g);
        let scale = self.atom_scale() * self.atom_scale() + max_g;
        let tol = T::lit(1e-8) * (T::one() + scale);
        for _ in 0..8 {
            // variables: x⁺ (d), x⁻ (d), t⁺, t⁻, slacks s (m), box slacks (2d)
            let nv = 4 * d + 2 + m;
            let mut lp = DenseLp::new(nv);
            let yq = self.atom(q);
            for i in 0..d {
                lp.set_cost(i, -yq[i]);
                lp.set_cost(d + i, yq[i]);
            }
            lp.set_cost(2 * d, T::one());
            lp.set_cost(2 * d + 1, -T::one());
            for k in 0..m {
                let mut row = vec![T::zero(); nv];
                for i in 0..d {
                    row[i] = -self.atom(k)[i];
                    row[d + i] = self.atom(k)[i];
                }
                row[2 * d] = T::one();
                row[2 * d + 1] = -T::one();
                row[2 * d + 2 + k] = -T::one();
                lp.add_eq(row, self.c[k]);
            }
            for i in 0..2 * d {
                let mut row = vec![T::zero(); nv];
                row[i] = T::one();
                row[2 * d + 2 + m + i] = T::one();
                lp.add_eq(row, radius);
            }
            let sol = lp.solve(T::lit(1e-9) * (T::one() + radius)).ok()?;
            let x: Vec<T> = (0..d).map(|i| sol.x[i] - sol.x[d + i]).collect();
            let on_boundary = x.iter().any(|v| v.abs() >= radius * T::lit(1.0 - 1e-9));
            let gap = self.eval(&x) - self.piece(q, &x);
            if gap <= tol {
                return Some(x);
            }
            if !on_boundary {
                return None;
            }
            radius *= T::lit(4.0);
        }
        None
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = PotentialFile {
            atoms: self.atoms().map(<[T]>::to_vec).collect(),
            g: self.g.clone(),
            tightened: self.tightened,
        };
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &file)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let file: PotentialFile<T> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let dim = file.atoms.first().map_or(0, Vec::len);
        let mut out = Self::new(dim, file.atoms, file.g)?;
        out.tightened = file.tightened;
        Ok(out)
    }
}

/// Outcome of checking that an optimal plan is carried by `∂φ`.
#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    /// Largest `φ(x_i) − A_j(x_i)` over active plan cells.
    pub max_activation_residual: f64,
    /// Active cells whose residual exceeds `1e-8`.
    pub violating_cells: Vec<(usize, usize)>,
    /// Set when the plan is a permutation: largest `‖T̂(x_i) − y_σ(i)‖`.
    pub max_map_error: Option<f64>,
}

impl PushforwardReport {
    pub fn passed(&self) -> bool {
        self.violating_cells.is_empty() && self.max_map_error.is_none_or(|e| e <= 1e-8)
    }
}

/// Checks that every active cell `(i, j)` of `sol.plan` satisfies
/// `y_j ∈ ∂φ(x_i)`, and for permutation plans that `T̂(x_i) = y_σ(i)`.
pub fn pushforward_check<T: Real>(
    phi: &BrenierPotential<T>,
    mu: &Measure<T>,
    sol: &OtSolution<T>,
) -> Result<PushforwardReport> {
    if mu.len() != sol.plan.rows() || phi.len() != sol.plan.cols() || mu.dim() != phi.dim() {
        return Err(Error::DimensionMismatch("potential, source and plan disagree".into()));
    }
    let active = T::lit(ACTIVE_MASS);
    let mut worst = 0.0_f64;
    let mut violating = Vec::new();
    for &(i, j, mass) in sol.plan.cells() {
        if mass <= active {
            continue;
        }
        let x = mu.point(i);
        let r = (phi.eval(x) - phi.piece(j, x)).as_f64();
        worst = worst.max(r);
        if r > 1e-8 {
            violating.push((i, j));
        }
    }
    let max_map_error = sol.plan.as_permutation().map(|sigma| {
        sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let t = phi.monge_map(mu.point(i));
                crate::scalar::dist_sq(&t, phi.atom(j)).sqrt().as_f64()
            })
            .fold(0.0, f64::max)
    });
    Ok(PushforwardReport {
        max_activation_residual: worst,
        violating_cells: violating,
        max_map_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_minus_half() -> BrenierPotential<f64> {
        BrenierPotential::new(1, vec![vec![-1.0], vec![1.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let zero = BrenierPotential::new(1, vec![vec![0.0]], vec![0.0]).unwrap();
        assert_eq!(zero.eval(&[3.0]), 0.0);
        let phi = abs_minus_half();
        assert_eq!(phi.eval(&[0.0]), -0.5);
        assert_eq!(phi.eval(&[2.0]), 1.5);
        assert_eq!(phi.active_set(&[0.0]), vec![0, 1]);
        assert_eq!(phi.eval(&[3.0]), 2.5);
        assert_eq!(phi.active_set(&[3.0]), vec![1]);
        let plane = BrenierPotential::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        for &(a, b) in &[(0.2, 5.0), (1.7, -3.0), (-4.0, 0.0)] {
            assert_eq!(plane.eval(&[a, b]), f64::max(0.0, a - 0.5));
        }
    }

    #[test]
    fn map_examples() {
        let phi = abs_minus_half();
        assert_eq!(phi.monge_map(&[0.0]), vec![0.0]);
        assert_eq!(phi.monge_map(&[3.0]), vec![1.0]);
        let single = BrenierPotential::new(2, vec![vec![0.3, -2.0]], vec![1.0]).unwrap();
        assert_eq!(single.monge_map(&[9.0, 1.0]), vec![0.3, -2.0]);
        assert_eq!(single.active_set(&[-5.0, 7.0]), vec![0]);
    }

    #[test]
    fn conjugate_examples() {
        let phi = abs_minus_half();
        for y in [-1.0, -0.4, 0.0, 0.7, 1.0] {
            assert!((phi.conjugate(&[y]) - 0.5).abs() < 1e-12);
        }
        assert_eq!(phi.conjugate(&[1.5]), f64::INFINITY);
        let single = BrenierPotential::new(2, vec![vec![1.0, 2.0]], vec![0.0]).unwrap();
        assert_eq!(single.conjugate(&[1.0, 2.0]), 2.5);
        assert_eq!(single.conjugate(&[1.0, 2.5]), f64::INFINITY);
    }

    #[test]
    fn tighten_example() {
        let phi = BrenierPotential::<f64>::new(1, vec![vec![-1.0], vec![0.0], vec![1.0]], vec![0.0, -10.0, 0.0]).unwrap();
        let t = phi.tighten();
        assert!(t.is_tightened());
        assert!((t.offsets()[1] + 0.5).abs() < 1e-12);
        assert_eq!(t.offsets()[0], 0.0);
        assert!((t.conjugate(&[0.0]) - 0.5).abs() < 1e-12);
        for k in -40..=40 {
            let x = [k as f64 * 0.1];
            assert!((t.eval(&x) - phi.eval(&x)).abs() < 1e-12);
        }
        let again = t.tighten();
        for (a, b) in again.offsets().iter().zip(t.offsets()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let w = t.witness(1).unwrap();
        assert!((t.eval(&w) - t.piece(1, &w)).abs() < 1e-8);
    }

    #[test]
    fn witness_absent_for_buried_piece() {
        let phi = BrenierPotential::<f64>::new(1, vec![vec![-1.0], vec![0.0], vec![1.0]], vec![0.0, -10.0, 0.0]).unwrap();
        assert!(phi.witness(1).is_none());
        assert!(phi.witness(0).is_some());
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.json");
        let phi = abs_minus_half().tighten();
        phi.write_json(&path).unwrap();
        assert_eq!(BrenierPotential::<f64>::read_json(&path).unwrap(), phi);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(BrenierPotential::<f64>::new(1, vec![vec![0.0]], vec![0.0, 1.0]).is_err());
        assert!(BrenierPotential::<f64>::new(2, vec![vec![0.0]], vec![0.0]).is_err());
        let nu = Measure::<f64>::uniform(1, vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(BrenierPotential::from_dual(&nu, &[0.0]), Err(Error::DimensionMismatch(_))));
    }
}

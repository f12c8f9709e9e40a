//! Population laws with compact support, used to draw empirical measures
//! and, in one dimension, to build closed-form transport oracles.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{stream, Measure};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::DimensionMismatch(format!(
                "box bounds of lengths {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self
            .lo
            .iter()
            .zip(&self.hi)
            .any(|(l, h)| !l.is_finite() || !h.is_finite() || l >= h)
        {
            return Err(Error::Invalid("empty support: box with lo ≥ hi".into()));
        }
        Ok(())
    }

    fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (l * l).max(h * h))
            .sum::<f64>()
            .sqrt()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| *c >= l - tol && *c <= h + tol)
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut Vec<f64>) {
        for (l, h) in self.lo.iter().zip(&self.hi) {
            out.push(l + (h - l) * rng.random::<f64>());
        }
    }
}

/// One-dimensional factor of a product law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Marginal1d {
    Uniform { lo: f64, hi: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
}

impl Marginal1d {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal1d::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal1d::Triangular { lo, mode, hi } => {
                lo.is_finite() && hi.is_finite() && lo < hi && lo <= mode && mode <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("empty support: invalid marginal {self:?}")))
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Marginal1d::Uniform { lo, hi } | Marginal1d::Triangular { lo, hi, .. } => (lo, hi),
        }
    }

    fn density_bound(&self) -> f64 {
        match *self {
            Marginal1d::Uniform { lo, hi } => 1.0 / (hi - lo),
            Marginal1d::Triangular { lo, hi, .. } => 2.0 / (hi - lo),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Marginal1d::Uniform { .. } => 1.0 / (hi - lo),
            Marginal1d::Triangular { mode, .. } => {
                if x <= mode && mode > lo {
                    2.0 * (x - lo) / ((hi - lo) * (mode - lo))
                } else if x >= mode && hi > mode {
                    2.0 * (hi - x) / ((hi - lo) * (hi - mode))
                } else {
                    2.0 / (hi - lo)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal1d::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal1d::Triangular { lo, mode, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else if x <= mode {
                    (x - lo) * (x - lo) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - x) * (hi - x) / ((hi - lo) * (hi - mode))
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Marginal1d::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal1d::Triangular { lo, mode, hi } => {
                let split = (mode - lo) / (hi - lo);
                if u <= split {
                    lo + (u * (hi - lo) * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
                }
            }
        }
    }
}

/// A compactly supported population law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionSpec {
    UniformBox(BoxBounds),
    /// Uniform on the union of two boxes with disjoint interiors.
    UniformTwoBoxes { first: BoxBounds, second: BoxBounds },
    UniformAnnulus { center: Vec<f64>, inner: f64, outer: f64 },
    FiniteAtoms { points: Vec<Vec<f64>>, weights: Vec<f64> },
    Product1d { factors: Vec<Marginal1d> },
}

/// Volume of the unit ball in `R^d`, via `V_d = 2π/d · V_{d-2}`.
pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

impl DistributionSpec {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        DistributionSpec::UniformBox(BoxBounds { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::uniform_box(vec![lo], vec![hi])
    }

    pub fn atoms(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        DistributionSpec::FiniteAtoms { points, weights }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::UniformBox(b) => b.lo.len(),
            DistributionSpec::UniformTwoBoxes { first, .. } => first.lo.len(),
            DistributionSpec::UniformAnnulus { center, .. } => center.len(),
            DistributionSpec::FiniteAtoms { points, .. } => points.first().map_or(0, Vec::len),
            DistributionSpec::Product1d { factors } => factors.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::UniformBox(b) => b.validate(),
            DistributionSpec::UniformTwoBoxes { first, second } => {
                first.validate()?;
                second.validate()?;
                if first.lo.len() != second.lo.len() {
                    return Err(Error::DimensionMismatch("boxes of different dimension".into()));
                }
                let separated = (0..first.lo.len())
                    .any(|k| first.hi[k] <= second.lo[k] || second.hi[k] <= first.lo[k]);
                if !separated {
                    return Err(Error::Invalid("boxes overlap".into()));
                }
                Ok(())
            }
            DistributionSpec::UniformAnnulus { center, inner, outer } => {
                if center.is_empty() {
                    return Err(Error::Invalid("annulus needs a center".into()));
                }
                if !(*inner >= 0.0 && inner < outer && outer.is_finite()) {
                    return Err(Error::Invalid("empty support: annulus with inner ≥ outer".into()));
                }
                Ok(())
            }
            DistributionSpec::FiniteAtoms { points, weights } => {
                if points.is_empty() {
                    return Err(Error::Invalid("empty support: no atoms".into()));
                }
                Measure::<f64>::new(self.dim(), points.clone(), weights.clone()).map(|_| ())
            }
            DistributionSpec::Product1d { factors } => {
                if factors.is_empty() {
                    return Err(Error::Invalid("product law without factors".into()));
                }
                factors.iter().try_for_each(Marginal1d::validate)
            }
        }
    }

    /// Radius of a centered ball containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            DistributionSpec::UniformBox(b) => b.radius(),
            DistributionSpec::UniformTwoBoxes { first, second } => first.radius().max(second.radius()),
            DistributionSpec::UniformAnnulus { center, outer, .. } => {
                center.iter().map(|c| c * c).sum::<f64>().sqrt() + outer
            }
            DistributionSpec::FiniteAtoms { points, .. } => points
                .iter()
                .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            DistributionSpec::Product1d { factors } => factors
                .iter()
                .map(|f| {
                    let (lo, hi) = f.bounds();
                    (lo * lo).max(hi * hi)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Upper bound on the Lebesgue density; `None` for atomic laws.
    pub fn density_bound(&self) -> Option<f64> {
        match self {
            DistributionSpec::UniformBox(b) => Some(1.0 / b.volume()),
            DistributionSpec::UniformTwoBoxes { first, second } => {
                Some(1.0 / (first.volume() + second.volume()))
            }
            DistributionSpec::UniformAnnulus { center, inner, outer } => {
                let d = center.len() as i32;
                Some(1.0 / (unit_ball_volume(center.len()) * (outer.powi(d) - inner.powi(d))))
            }
            DistributionSpec::FiniteAtoms { .. } => None,
            DistributionSpec::Product1d { factors } => {
                Some(factors.iter().map(Marginal1d::density_bound).product())
            }
        }
    }

    /// Lebesgue density at `x`; `None` for atomic laws.
    pub fn density(&self, x: &[f64]) -> Option<f64> {
        let inside = |tol| self.contains(x, tol);
        match self {
            DistributionSpec::FiniteAtoms { .. } => None,
            DistributionSpec::Product1d { factors } => {
                Some(factors.iter().zip(x).map(|(f, &c)| f.density(c)).product())
            }
            _ => Some(if inside(0.0) { self.density_bound().unwrap_or(0.0) } else { 0.0 }),
        }
    }

    /// Smallest axis-aligned box containing the support.
    pub fn bounding_box(&self) -> BoxBounds {
        match self {
            DistributionSpec::UniformBox(b) => b.clone(),
            DistributionSpec::UniformTwoBoxes { first, second } => BoxBounds::new(
                first.lo.iter().zip(&second.lo).map(|(a, b)| a.min(*b)).collect(),
                first.hi.iter().zip(&second.hi).map(|(a, b)| a.max(*b)).collect(),
            ),
            DistributionSpec::UniformAnnulus { center, outer, .. } => BoxBounds::new(
                center.iter().map(|c| c - outer).collect(),
                center.iter().map(|c| c + outer).collect(),
            ),
            DistributionSpec::FiniteAtoms { points, .. } => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in points {
                    for k in 0..d {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                BoxBounds::new(lo, hi)
            }
            DistributionSpec::Product1d { factors } => {
                let (lo, hi) = factors.iter().map(Marginal1d::bounds).unzip();
                BoxBounds::new(lo, hi)
            }
        }
    }

    /// Midpoint-rule discretization with at least `min_nodes` nodes of
    /// positive density, weighted by density and renormalized. Atomic laws
    /// are returned as they are.
    pub fn quadrature(&self, min_nodes: usize) -> Result<Measure<f64>> {
        self.validate()?;
        let d = self.dim();
        if let DistributionSpec::FiniteAtoms { points, weights } = self {
            let total: f64 = weights.iter().sum();
            return Measure::new(d, points.clone(), weights.iter().map(|w| w / total).collect());
        }
        if d > 3 {
            return Err(Error::TooLarge(format!("quadrature grid in dimension {d}")));
        }
        let bb = self.bounding_box();
        let mut per_axis = (min_nodes.max(1) as f64).powf(1.0 / d as f64).ceil() as usize;
        loop {
            let total_nodes = per_axis.checked_pow(d as u32).unwrap_or(usize::MAX);
            if total_nodes > 50_000_000 {
                return Err(Error::TooLarge(format!("quadrature grid of {total_nodes} nodes")));
            }
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let mut x = vec![0.0; d];
            for idx in 0..total_nodes {
                let mut rest = idx;
                for k in 0..d {
                    let h = (bb.hi[k] - bb.lo[k]) / per_axis as f64;
                    x[k] = bb.lo[k] + h * ((rest % per_axis) as f64 + 0.5);
                    rest /= per_axis;
                }
                let rho = self.density(&x).unwrap_or(0.0);
                if rho > 0.0 {
                    coords.extend_from_slice(&x);
                    weights.push(rho);
                }
            }
            if weights.len() >= min_nodes {
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                return Measure::from_flat(d, coords, weights);
            }
            let grow = (min_nodes as f64 / weights.len().max(1) as f64).powf(1.0 / d as f64);
            per_axis = ((per_axis as f64 * grow).ceil() as usize).max(per_axis + 1);
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            DistributionSpec::UniformBox(b) => b.contains(x, tol),
            DistributionSpec::UniformTwoBoxes { first, second } => {
                first.contains(x, tol) || second.contains(x, tol)
            }
            DistributionSpec::UniformAnnulus { center, inner, outer } => {
                let r = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                r >= inner - tol && r <= outer + tol
            }
            DistributionSpec::FiniteAtoms { points, .. } => points
                .iter()
                .any(|p| p.iter().zip(x).all(|(a, b)| (a - b).abs() <= tol)),
            DistributionSpec::Product1d { factors } => factors.iter().zip(x).all(|(f, c)| {
                let (lo, hi) = f.bounds();
                *c >= lo - tol && *c <= hi + tol
            }),
        }
    }

    /// Appends one draw to `out`.
    pub fn draw(&self, rng: &mut impl Rng, out: &mut Vec<f64>) {
        match self {
            DistributionSpec::UniformBox(b) => b.draw(rng, out),
            DistributionSpec::UniformTwoBoxes { first, second } => {
                let (v1, v2) = (first.volume(), second.volume());
                if rng.random::<f64>() * (v1 + v2) < v1 {
                    first.draw(rng, out)
                } else {
                    second.draw(rng, out)
                }
            }
            DistributionSpec::UniformAnnulus { center, inner, outer } => {
                let d = center.len();
                let dir: Vec<f64> = loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break v.into_iter().map(|c| c / norm).collect();
                    }
                };
                let df = d as f64;
                let (a, b) = (inner.powf(df), outer.powf(df));
                let r = (a + rng.random::<f64>() * (b - a)).powf(1.0 / df).min(*outer);
                out.extend(center.iter().zip(&dir).map(|(c, u)| c + r * u));
            }
            DistributionSpec::FiniteAtoms { points, weights } => {
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = points.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                out.extend_from_slice(&points[pick]);
            }
            DistributionSpec::Product1d { factors } => {
                for f in factors {
                    out.push(f.quantile(rng.random::<f64>()));
                }
            }
        }
    }

    /// Draws `n` points as a flat row-major buffer.
    pub fn draw_points(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed);
        let mut out = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.draw(&mut rng, &mut out);
        }
        out
    }

    fn intervals_1d(&self) -> Option<Vec<(f64, f64)>> {
        let mut iv = match self {
            DistributionSpec::UniformBox(b) if b.lo.len() == 1 => vec![(b.lo[0], b.hi[0])],
            DistributionSpec::UniformTwoBoxes { first, second } if first.lo.len() == 1 => {
                vec![(first.lo[0], first.hi[0]), (second.lo[0], second.hi[0])]
            }
            DistributionSpec::UniformAnnulus { center, inner, outer } if center.len() == 1 => {
                let c = center[0];
                if *inner == 0.0 {
                    vec![(c - outer, c + outer)]
                } else {
                    vec![(c - outer, c - inner), (c + inner, c + outer)]
                }
            }
            _ => return None,
        };
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(iv)
    }

    fn sorted_atoms_1d(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            DistributionSpec::FiniteAtoms { points, weights } if self.dim() == 1 => {
                let total: f64 = weights.iter().sum();
                let mut a: Vec<(f64, f64)> = points
                    .iter()
                    .zip(weights)
                    .map(|(p, w)| (p[0], w / total))
                    .collect();
                a.sort_by(|x, y| x.0.total_cmp(&y.0));
                Some(a)
            }
            _ => None,
        }
    }

    /// Cumulative distribution function of a one-dimensional law.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        if let Some(iv) = self.intervals_1d() {
            let total: f64 = iv.iter().map(|(l, h)| h - l).sum();
            let below: f64 = iv.iter().map(|(l, h)| (x.min(*h) - l).max(0.0)).sum();
            return Ok((below / total).clamp(0.0, 1.0));
        }
        if let Some(atoms) = self.sorted_atoms_1d() {
            return Ok(atoms
                .iter()
                .take_while(|(y, _)| *y <= x)
                .map(|(_, w)| w)
                .sum::<f64>()
                .min(1.0));
        }
        match self {
            DistributionSpec::Product1d { factors } if factors.len() == 1 => Ok(factors[0].cdf(x)),
            _ => Err(self.unsupported_1d()),
        }
    }

    /// Left-continuous quantile `inf { x : F(x) ≥ u }`.
    pub fn quantile_1d(&self, u: f64) -> Result<f64> {
        let u = u.clamp(0.0, 1.0);
        if let Some(iv) = self.intervals_1d() {
            let total: f64 = iv.iter().map(|(l, h)| h - l).sum();
            let mut remaining = u * total;
            for (k, &(l, h)) in iv.iter().enumerate() {
                let len = h - l;
                if remaining <= len || k + 1 == iv.len() {
                    return Ok((l + remaining).min(h));
                }
                remaining -= len;
            }
        }
        if let Some(atoms) = self.sorted_atoms_1d() {
            let mut acc = 0.0;
            for &(y, w) in &atoms {
                acc += w;
                if acc >= u {
                    return Ok(y);
                }
            }
            return Ok(atoms[atoms.len() - 1].0);
        }
        match self {
            DistributionSpec::Product1d { factors } if factors.len() == 1 => {
                Ok(factors[0].quantile(u))
            }
            _ => Err(self.unsupported_1d()),
        }
    }

    /// Points where the one-dimensional CDF or quantile changes regime.
    pub(crate) fn breakpoints_1d(&self) -> Vec<f64> {
        if let Some(iv) = self.intervals_1d() {
            return iv.iter().flat_map(|&(l, h)| [l, h]).collect();
        }
        if let Some(atoms) = self.sorted_atoms_1d() {
            return atoms.iter().map(|a| a.0).collect();
        }
        match self {
            DistributionSpec::Product1d { factors } if factors.len() == 1 => match factors[0] {
                Marginal1d::Uniform { lo, hi } => vec![lo, hi],
                Marginal1d::Triangular { lo, mode, hi } => vec![lo, mode, hi],
            },
            _ => Vec::new(),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, DistributionSpec::FiniteAtoms { .. })
    }

    fn unsupported_1d(&self) -> Error {
        Error::Invalid(format!(
            "closed-form CDF/quantile unavailable for this law in dimension {}",
            self.dim()
        ))
    }
}

/// Empirical measure of `n` i.i.d. draws, each with weight `1/n`.
///
/// Identical draws (only possible for atomic laws) are merged, so the
/// result has at most `n` atoms with weights in multiples of `1/n`.
pub fn sample<T: Real>(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Measure<T>> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be positive".into()));
    }
    spec.validate()?;
    let dim = spec.dim();
    let coords: Vec<T> = spec.draw_points(n, seed).into_iter().map(T::lit).collect();
    let w = T::one() / T::of_usize(n);
    Measure::from_flat(dim, coords, vec![w; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]),
            DistributionSpec::UniformTwoBoxes {
                first: BoxBounds::new(vec![-1.0, -1.0], vec![-0.5, 1.0]),
                second: BoxBounds::new(vec![0.5, -1.0], vec![1.0, 1.0]),
            },
            DistributionSpec::UniformAnnulus {
                center: vec![0.5, -0.5],
                inner: 0.3,
                outer: 0.8,
            },
            DistributionSpec::atoms(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![0.3, 0.7]),
            DistributionSpec::Product1d {
                factors: vec![
                    Marginal1d::Uniform { lo: -1.0, hi: 2.0 },
                    Marginal1d::Triangular { lo: 0.0, mode: 0.2, hi: 1.0 },
                ],
            },
        ]
    }

    #[test]
    fn draws_stay_in_support() {
        for (k, spec) in specs().into_iter().enumerate() {
            let pts = spec.draw_points(10_000, 11 + k as u64);
            let r = spec.support_radius();
            for p in pts.chunks_exact(spec.dim()) {
                assert!(spec.contains(p, 1e-12), "{spec:?} produced {p:?}");
                assert!(p.iter().map(|c| c * c).sum::<f64>().sqrt() <= r + 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_respects_support() {
        for spec in specs().into_iter().filter(|s| !s.is_atomic()) {
            let q = spec.quadrature(2000).unwrap();
            assert!(q.len() >= 2000);
            assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for p in q.points() {
                assert!(spec.contains(p, 1e-12));
            }
        }
        let tri = Marginal1d::Triangular { lo: 0.0, mode: 0.2, hi: 1.0 };
        let spec = DistributionSpec::Product1d { factors: vec![tri.clone()] };
        let q = spec.quadrature(10_000).unwrap();
        let mean: f64 = q.integrate(|x| x[0]);
        assert!((mean - 0.4).abs() < 1e-6);
        assert!((tri.density(0.2) - 2.0).abs() < 1e-12 && tri.density(1.5) == 0.0);
    }

    #[test]
    fn uniform_box_example() {
        let spec = DistributionSpec::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let m: Measure<f64> = sample(&spec, 4, 7).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.weights().iter().all(|&w| w == 0.25));
        assert!(m.points().all(|p| p.iter().all(|c| (0.0..=1.0).contains(c))));
    }

    #[test]
    fn sampling_is_deterministic() {
        for spec in specs() {
            let a: Measure<f64> = sample(&spec, 50, 3).unwrap();
            let b: Measure<f64> = sample(&spec, 50, 3).unwrap();
            assert_eq!(a, b);
            let c: Measure<f64> = sample(&spec, 50, 4).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn rejects_invalid() {
        let spec = DistributionSpec::interval(0.0, 1.0);
        assert!(sample::<f64>(&spec, 0, 1).is_err());
        assert!(sample::<f64>(&DistributionSpec::interval(1.0, 1.0), 3, 1).is_err());
        let annulus = DistributionSpec::UniformAnnulus {
            center: vec![0.0, 0.0],
            inner: 1.0,
            outer: 0.5,
        };
        assert!(sample::<f64>(&annulus, 3, 1).is_err());
        assert!(sample::<f64>(&DistributionSpec::atoms(vec![], vec![]), 3, 1).is_err());
    }

    #[test]
    fn uniform_box_mean_converges() {
        let spec = DistributionSpec::uniform_box(vec![-1.0, 0.0], vec![1.0, 2.0]);
        let n = 10_000;
        let m: Measure<f64> = sample(&spec, n, 99).unwrap();
        let mean = m.mean();
        let slack = 4.0 * 2.0 / (n as f64).sqrt();
        assert!((mean[0] - 0.0).abs() <= slack);
        assert!((mean[1] - 1.0).abs() <= slack);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let laws = vec![
            DistributionSpec::interval(-1.0, 3.0),
            DistributionSpec::UniformTwoBoxes {
                first: BoxBounds::new(vec![2.0], vec![3.0]),
                second: BoxBounds::new(vec![-1.0], vec![0.0]),
            },
            DistributionSpec::UniformAnnulus {
                center: vec![1.0],
                inner: 0.5,
                outer: 1.0,
            },
            DistributionSpec::Product1d {
                factors: vec![Marginal1d::Triangular { lo: 0.0, mode: 0.3, hi: 2.0 }],
            },
        ];
        for law in laws {
            for k in 1..100 {
                let u = k as f64 / 100.0;
                let x = law.quantile_1d(u).unwrap();
                assert!((law.cdf_1d(x).unwrap() - u).abs() < 1e-12, "{law:?} at {u}");
            }
        }
    }

    #[test]
    fn atomic_quantile_is_left_continuous() {
        let law = DistributionSpec::atoms(vec![vec![1.0], vec![0.0]], vec![0.5, 0.5]);
        assert_eq!(law.quantile_1d(0.0).unwrap(), 0.0);
        assert_eq!(law.quantile_1d(0.5).unwrap(), 0.0);
        assert_eq!(law.quantile_1d(0.5 + 1e-12).unwrap(), 1.0);
        assert_eq!(law.cdf_1d(0.5).unwrap(), 0.5);
    }

    #[test]
    fn annulus_density_bound() {
        let a = DistributionSpec::UniformAnnulus {
            center: vec![0.0, 0.0],
            inner: 1.0,
            outer: 2.0,
        };
        let expected = 1.0 / (std::f64::consts::PI * 3.0);
        assert!((a.density_bound().unwrap() - expected).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}

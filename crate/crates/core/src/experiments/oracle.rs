//! Ground-truth transport maps for the rate experiments.

use crate::brenier::BrenierPotential;
use crate::error::{Error, Result};
use crate::measures::{DistributionSpec, Measure};
use crate::metrics::ConvexPotential;
use crate::semidiscrete::SemiDual;

/// Quadratic-cost optimal transport between two laws on the line.
///
/// The map is the monotone rearrangement `T = Q_ν ∘ F_μ` and the potential
/// is `φ̄(x) = ∫₀ˣ T`. A finite target gives a max-affine potential whose
/// breakpoints are the quantiles of `μ` at the cumulative target weights;
/// otherwise `φ̄` is integrated by adaptive Simpson between the points where
/// `T` changes regime.
#[derive(Clone, Debug)]
pub struct Oracle1d {
    mu: DistributionSpec,
    nu: DistributionSpec,
    discrete: Option<BrenierPotential<f64>>,
    knots: Vec<f64>,
    nu_range: (f64, f64),
}

impl Oracle1d {
    pub fn new(mu: &DistributionSpec, nu: &DistributionSpec) -> Result<Self> {
        mu.validate()?;
        nu.validate()?;
        if mu.dim() != 1 || nu.dim() != 1 {
            return Err(Error::Invalid(format!(
                "one-dimensional oracle needs laws on the line, got dimensions {} and {}",
                mu.dim(),
                nu.dim()
            )));
        }
        if mu.is_atomic() {
            return Err(Error::Invalid("oracle source law must have a density".into()));
        }
        mu.cdf_1d(0.0)?;
        nu.cdf_1d(0.0)?;
        let bb = nu.bounding_box();
        let discrete = if nu.is_atomic() { Some(discrete_potential(mu, nu)?) } else { None };
        let mut knots = mu.breakpoints_1d();
        if discrete.is_none() {
            for c in nu.breakpoints_1d() {
                knots.push(mu.quantile_1d(nu.cdf_1d(c)?)?);
            }
        }
        knots.retain(|v| v.is_finite());
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        Ok(Self {
            mu: mu.clone(),
            nu: nu.clone(),
            discrete,
            knots,
            nu_range: (bb.lo[0], bb.hi[0]),
        })
    }

    pub fn source(&self) -> &DistributionSpec {
        &self.mu
    }

    pub fn target(&self) -> &DistributionSpec {
        &self.nu
    }

    /// The closed-form max-affine potential when the target is finite.
    pub fn semidiscrete_potential(&self) -> Option<&BrenierPotential<f64>> {
        self.discrete.as_ref()
    }

    /// `Q_ν(F_μ(x))`; with a finite target, ties between atoms are averaged.
    pub fn map(&self, x: f64) -> f64 {
        match &self.discrete {
            Some(phi) => phi.monge_map(&[x])[0],
            None => self.quantile_map(x),
        }
    }

    fn quantile_map(&self, x: f64) -> f64 {
        let u = self.mu.cdf_1d(x).unwrap_or(0.0);
        self.nu.quantile_1d(u).unwrap_or(f64::NAN)
    }

    pub fn potential(&self, x: f64) -> f64 {
        if let Some(phi) = &self.discrete {
            return phi.eval(&[x]);
        }
        let (a, b, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut cuts = vec![a];
        cuts.extend(self.knots.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        let f = |s: f64| self.quantile_map(s);
        let total: f64 = cuts
            .windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-13 * (1.0 + (w[1] - w[0]).abs())))
            .sum();
        sign * total
    }

    /// `φ̄*(y) = x y − φ̄(x)` at `x = Q_μ(F_ν(y))`; `+∞` off the target hull.
    pub fn conjugate(&self, y: f64) -> f64 {
        let (lo, hi) = self.nu_range;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if y < lo - slack || y > hi + slack {
            return f64::INFINITY;
        }
        let y = y.clamp(lo, hi);
        let u = self.nu.cdf_1d(y).unwrap_or(1.0);
        let x = self.mu.quantile_1d(u).unwrap_or(f64::NAN);
        x * y - self.potential(x)
    }
}

impl ConvexPotential for Oracle1d {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.potential(x[0])
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![self.map(x[0])]
    }

    fn conjugate(&self, y: &[f64]) -> f64 {
        Oracle1d::conjugate(self, y[0])
    }
}

fn discrete_potential(mu: &DistributionSpec, nu: &DistributionSpec) -> Result<BrenierPotential<f64>> {
    let target = nu.quadrature(1)?;
    let mut atoms: Vec<(f64, f64)> = target.points().map(|p| p[0]).zip(target.weights().iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = atoms.len();
    let mut c = vec![0.0; m];
    let mut cumulative = 0.0;
    for k in 0..m.saturating_sub(1) {
        cumulative += atoms[k].1;
        let t = mu.quantile_1d(cumulative)?;
        c[k + 1] = c[k] + t * (atoms[k].0 - atoms[k + 1].0);
    }
    let mut g: Vec<f64> = c.iter().zip(&atoms).map(|(ck, (y, _))| ck + 0.5 * y * y).collect();
    let phi = BrenierPotential::new(1, atoms.iter().map(|a| vec![a.0]).collect(), g.clone())?;
    let shift = phi.eval(&[0.0]);
    g.iter_mut().for_each(|v| *v -= shift);
    Ok(BrenierPotential::new(1, atoms.iter().map(|a| vec![a.0]).collect(), g)?.tighten())
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fc) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

/// Semi-discrete reference potential computed on a fine quadrature grid.
#[derive(Clone, Debug)]
pub struct SemidiscreteReference {
    pub potential: BrenierPotential<f64>,
    /// Quadrature nodes actually used.
    pub nodes: usize,
    /// Certified bound on the semi-dual suboptimality.
    pub gap_bound: f64,
    /// Unmatched mass of the final certificate.
    pub residual: f64,
    pub iterations: usize,
}

impl SemidiscreteReference {
    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        self.potential.monge_map(x)
    }
}

/// Minimizes the semi-dual with `μ` replaced by a midpoint grid of at least
/// `n_ref` nodes and returns the tightened potential.
pub fn oracle_semidiscrete_ref(mu: &DistributionSpec, nu: &Measure<f64>, n_ref: usize) -> Result<SemidiscreteReference> {
    if mu.is_atomic() {
        return Err(Error::Invalid("reference source law must have a density".into()));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source in R^{} but target in R^{}",
            mu.dim(),
            nu.dim()
        )));
    }
    if mu.dim() >= 2 && n_ref < 100_000 {
        return Err(Error::Invalid(format!(
            "reference grid needs at least 100000 nodes in dimension {}, got {n_ref}",
            mu.dim()
        )));
    }
    let grid = mu.quadrature(n_ref)?;
    let nodes = grid.len();
    let problem = SemiDual::new(grid, nu.clone())?;
    let sol = problem.minimize(None, 1e-11, 20_000)?;
    let potential = problem.potential(&sol.g)?.tighten();
    Ok(SemidiscreteReference {
        potential,
        nodes,
        gap_bound: sol.gap_bound,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// Upper envelope of the pieces of a one-dimensional potential, for fast
/// evaluation of the averaging gradient selection at many points.
#[derive(Clone, Debug)]
pub(crate) struct Envelope1d {
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    breaks: Vec<f64>,
}

impl Envelope1d {
    pub(crate) fn new(phi: &BrenierPotential<f64>) -> Self {
        debug_assert_eq!(phi.dim(), 1);
        let mut lines: Vec<(f64, f64)> = phi.atoms().map(|a| a[0]).zip(phi.intercepts().iter().copied()).collect();
        lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
        for line in lines {
            if let Some(last) = hull.last() {
                if last.0 == line.0 {
                    hull.pop();
                }
            }
            while hull.len() >= 2 {
                let (l1, l2) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // l2 is redundant when l3 overtakes l1 no later than l2 does
                if (line.1 - l1.1) * (l2.0 - l1.0) >= (l2.1 - l1.1) * (line.0 - l1.0) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(line);
        }
        let breaks = hull.windows(2).map(|w| (w[0].1 - w[1].1) / (w[1].0 - w[0].0)).collect();
        Self {
            slopes: hull.iter().map(|l| l.0).collect(),
            intercepts: hull.iter().map(|l| l.1).collect(),
            breaks,
        }
    }

    pub(crate) fn map(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < x);
        let lo = idx.saturating_sub(1);
        let hi = (idx + 1).min(self.slopes.len() - 1);
        let value = |k: usize| self.slopes[k] * x + self.intercepts[k];
        let best = (lo..=hi).map(value).fold(f64::NEG_INFINITY, f64::max);
        let tol = BrenierPotential::<f64>::default_tol(best);
        let (sum, count) = (lo..=hi)
            .filter(|&k| value(k) >= best - tol)
            .fold((0.0, 0usize), |(s, c), k| (s + self.slopes[k], c + 1));
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::stream;
    use rand::Rng;

    #[test]
    fn identity_when_laws_agree() {
        let mu = DistributionSpec::interval(-1.0, 2.0);
        let o = Oracle1d::new(&mu, &mu).unwrap();
        for x in [-0.9, 0.0, 0.5, 1.7] {
            assert!((o.map(x) - x).abs() < 1e-12);
            assert!((o.potential(x) - 0.5 * x * x).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_between_intervals() {
        let o = Oracle1d::new(&DistributionSpec::interval(0.0, 1.0), &DistributionSpec::interval(2.0, 3.0)).unwrap();
        for x in [0.1, 0.5, 0.99] {
            assert!((o.map(x) - (x + 2.0)).abs() < 1e-12);
            assert!((o.potential(x) - (0.5 * x * x + 2.0 * x)).abs() < 1e-10);
        }
        let y = 2.4;
        assert!((o.conjugate(y) - 0.5 * (y - 2.0f64).powi(2)).abs() < 1e-10);
        assert!(o.conjugate(3.5).is_infinite());
    }

    #[test]
    fn two_atom_target() {
        let nu = DistributionSpec::atoms(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]);
        let o = Oracle1d::new(&DistributionSpec::interval(0.0, 1.0), &nu).unwrap();
        assert_eq!(o.map(0.3), 0.0);
        assert_eq!(o.map(0.7), 1.0);
        assert!((o.map(0.5) - 0.5).abs() < 1e-12);
        assert!(o.potential(0.0).abs() < 1e-15);
        assert!((o.potential(0.8) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn discrete_and_integrated_potentials_agree() {
        let mu = DistributionSpec::Product1d {
            factors: vec![crate::measures::Marginal1d::Triangular { lo: -1.0, mode: 0.3, hi: 1.0 }],
        };
        let nu = DistributionSpec::atoms(vec![vec![-0.5], vec![0.1], vec![0.9]], vec![0.2, 0.5, 0.3]);
        let o = Oracle1d::new(&mu, &nu).unwrap();
        let phi = o.semidiscrete_potential().unwrap().clone();
        let mut rng = stream(3);
        for _ in 0..200 {
            let x = rng.random_range(-1.0..1.0);
            let u = mu.cdf_1d(x).unwrap();
            let t = nu.quantile_1d(u).unwrap();
            let sel = o.map(x);
            assert!((sel - t).abs() < 1e-9 || phi.active_set(&[x]).len() > 1);
            let y = [-0.5, 0.1, 0.9][rng.random_range(0..3)];
            assert!(ConvexPotential::conjugate(&o, &[y]) >= x * y - o.potential(x) - 1e-12);
            assert!((ConvexPotential::conjugate(&o, &[y]) - phi.conjugate(&[y])).abs() < 1e-9);
        }
        let cont = Oracle1d::new(&mu, &DistributionSpec::interval(-0.5, 0.9)).unwrap();
        assert!((cont.potential(0.7) - midpoint(0.0, 0.7, |s| cont.map(s))).abs() < 1e-9);
    }

    fn midpoint(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let n = 200_000;
        let h = (b - a) / n as f64;
        (0..n).map(|k| f(a + (k as f64 + 0.5) * h) * h).sum()
    }

    #[test]
    fn envelope_matches_brute_force() {
        let mut rng = stream(9);
        for _ in 0..50 {
            let m = rng.random_range(1..40);
            let atoms: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
            let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let phi = BrenierPotential::new(1, atoms, g).unwrap();
            let env = Envelope1d::new(&phi);
            for _ in 0..200 {
                let x = rng.random_range(-3.0..3.0);
                assert!((env.map(x) - phi.monge_map(&[x])[0]).abs() < 1e-12);
            }
            let t = phi.witness(0).map(|w| w[0]);
            if let Some(t) = t {
                assert!((env.map(t) - phi.monge_map(&[t])[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_atom_reference_is_affine() {
        let mu = DistributionSpec::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let nu = Measure::dirac(vec![0.3, -0.2]).unwrap();
        let r = oracle_semidiscrete_ref(&mu, &nu, 100_000).unwrap();
        assert!(r.nodes >= 100_000);
        assert_eq!(r.map(&[0.5, 0.5]), vec![0.3, -0.2]);
        assert!(oracle_semidiscrete_ref(&mu, &nu, 1000).is_err());
    }

    #[test]
    fn symmetric_pair_splits_on_bisector() {
        let mu = DistributionSpec::uniform_box(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let nu = Measure::uniform(2, vec![vec![-0.5, 0.2], vec![0.5, 0.2]]).unwrap();
        let r = oracle_semidiscrete_ref(&mu, &nu, 100_000).unwrap();
        let g = r.potential.normalized().offsets().to_vec();
        assert!(g[0].abs() < 1e-9 && g[1] == 0.0, "{g:?}");
        assert_eq!(r.map(&[-1e-3, 0.7]), vec![-0.5, 0.2]);
        assert_eq!(r.map(&[1e-3, -0.7]), vec![0.5, 0.2]);
    }
}

//! Exact discrete optimal transport: the primal plan and the dual
//! potentials of the transportation linear program.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_transport;
use crate::measures::Measure;
use crate::scalar::{dist_sq, Real};

/// Plan cells with at least this much mass count as active.
pub const ACTIVE_MASS: f64 = 1e-12;

/// Largest dense instance accepted (`n · m`).
pub const MAX_CELLS: usize = 5000 * 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `½‖x − y‖²`
    HalfSquaredEuclidean,
    /// `‖x − y‖`
    Euclidean,
}

/// Dense `n × m` ground cost, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<T> {
    n: usize,
    m: usize,
    kind: CostKind,
    entries: Vec<T>,
}

impl<T: Real> CostMatrix<T> {
    pub fn between(mu: &Measure<T>, nu: &Measure<T>, kind: CostKind) -> Result<Self> {
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch(format!(
                "source in R^{} but target in R^{}",
                mu.dim(),
                nu.dim()
            )));
        }
        let (n, m) = (mu.len(), nu.len());
        if n.saturating_mul(m) > MAX_CELLS {
            return Err(Error::TooLarge(format!("{n}×{m} cost matrix exceeds {MAX_CELLS} cells")));
        }
        let half = T::lit(0.5);
        let mut entries = Vec::with_capacity(n * m);
        for x in mu.points() {
            for y in nu.points() {
                let d2 = dist_sq(x, y);
                entries.push(match kind {
                    CostKind::HalfSquaredEuclidean => half * d2,
                    CostKind::Euclidean => d2.sqrt(),
                });
            }
        }
        Ok(Self { n, m, kind, entries })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.m {
            for i in 0..self.n {
                entries.push(self.get(i, j));
            }
        }
        Self {
            n: self.m,
            m: self.n,
            kind: self.kind,
            entries,
        }
    }
}

/// `C_ij = ½‖x_i − y_j‖²`.
pub fn build_cost<T: Real>(mu: &Measure<T>, nu: &Measure<T>) -> Result<CostMatrix<T>> {
    CostMatrix::between(mu, nu, CostKind::HalfSquaredEuclidean)
}

/// Sparse coupling between `n` source and `m` target atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    n: usize,
    m: usize,
    /// Strictly positive cells `(i, j, P_ij)`, sorted by `(i, j)`.
    cells: Vec<(usize, usize, T)>,
    row_marginal: Vec<T>,
    col_marginal: Vec<T>,
}

impl<T: Real> TransportPlan<T> {
    pub fn from_cells(
        mut cells: Vec<(usize, usize, T)>,
        row_marginal: Vec<T>,
        col_marginal: Vec<T>,
    ) -> Result<Self> {
        let (n, m) = (row_marginal.len(), col_marginal.len());
        if let Some(c) = cells.iter().find(|c| c.0 >= n || c.1 >= m || !(c.2 >= T::zero())) {
            return Err(Error::Invalid(format!("plan cell ({}, {}, {}) out of range", c.0, c.1, c.2)));
        }
        cells.retain(|c| c.2 > T::zero());
        cells.sort_by_key(|c| (c.0, c.1));
        Ok(Self {
            n,
            m,
            cells,
            row_marginal,
            col_marginal,
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> &[(usize, usize, T)] {
        &self.cells
    }

    pub fn row_marginal(&self) -> &[T] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[T] {
        &self.col_marginal
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.cells
            .binary_search_by_key(&(i, j), |c| (c.0, c.1))
            .map_or(T::zero(), |k| self.cells[k].2)
    }

    pub fn support_size(&self) -> usize {
        self.cells.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut p = vec![vec![T::zero(); self.m]; self.n];
        for &(i, j, x) in &self.cells {
            p[i][j] = x;
        }
        p
    }

    pub fn row_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.n];
        for &(i, _, x) in &self.cells {
            s[i] += x;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.m];
        for &(_, j, x) in &self.cells {
            s[j] += x;
        }
        s
    }

    /// Largest absolute deviation from the prescribed marginals.
    pub fn marginal_residual(&self) -> T {
        let rows = self.row_sums().into_iter().zip(&self.row_marginal);
        let cols = self.col_sums().into_iter().zip(&self.col_marginal);
        rows.chain(cols)
            .map(|(s, &t)| (s - t).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cost(&self, c: &CostMatrix<T>) -> T {
        self.cells.iter().map(|&(i, j, x)| x * c.get(i, j)).sum()
    }

    /// For a square plan where every row and column holds one active cell,
    /// returns the assignment `i ↦ σ(i)`.
    pub fn as_permutation(&self) -> Option<Vec<usize>> {
        if self.n != self.m {
            return None;
        }
        let active = T::lit(ACTIVE_MASS);
        let mut sigma = vec![usize::MAX; self.n];
        let mut used = vec![false; self.m];
        for &(i, j, x) in &self.cells {
            if x <= active {
                continue;
            }
            if sigma[i] != usize::MAX || used[j] {
                return None;
            }
            sigma[i] = j;
            used[j] = true;
        }
        sigma.iter().all(|&s| s != usize::MAX).then_some(sigma)
    }

    /// Writes `i,j,mass` triplets for the positive cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "i,j,mass")?;
        for &(i, j, x) in &self.cells {
            writeln!(out, "{i},{j},{x}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads triplets written by [`write_csv`](Self::write_csv).
    pub fn read_csv(path: impl AsRef<Path>, row_marginal: Vec<T>, col_marginal: Vec<T>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut cells = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| Error::Malformed { line: k + 2, message };
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.len())));
            }
            let i: usize = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
            let j: usize = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
            let x: f64 = rec[2].parse().map_err(|e| bad(format!("{e}")))?;
            cells.push((i, j, T::lit(x)));
        }
        Self::from_cells(cells, row_marginal, col_marginal)
    }
}

/// Dual variables `(f, g)` of the transportation LP for the half
/// squared Euclidean cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPair<T> {
    pub f: Vec<T>,
    pub g: Vec<T>,
    #[serde(default = "default_convention")]
    pub cost_convention: CostKind,
}

fn default_convention() -> CostKind {
    CostKind::HalfSquaredEuclidean
}

impl<T: Real> DualPair<T> {
    pub fn new(f: Vec<T>, g: Vec<T>) -> Self {
        Self {
            f,
            g,
            cost_convention: CostKind::HalfSquaredEuclidean,
        }
    }

    /// `⟨f, a⟩ + ⟨g, b⟩`.
    pub fn objective(&self, a: &[T], b: &[T]) -> T {
        let fa: T = self.f.iter().zip(a).map(|(&f, &a)| f * a).sum();
        let gb: T = self.g.iter().zip(b).map(|(&g, &b)| g * b).sum();
        fa + gb
    }

    /// `(f − c, g + c)`; the objective is unchanged for probability marginals.
    pub fn shifted(&self, c: T) -> Self {
        Self {
            f: self.f.iter().map(|&x| x - c).collect(),
            g: self.g.iter().map(|&x| x + c).collect(),
            cost_convention: self.cost_convention,
        }
    }

    /// Shifts so that the last `g` entry is zero.
    pub fn normalized(&self) -> Self {
        let c = self.g.last().copied().unwrap_or_else(T::zero);
        self.shifted(-c)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

#[derive(Clone, Debug)]
pub struct OtSolution<T> {
    pub plan: TransportPlan<T>,
    pub duals: DualPair<T>,
    pub primal_value: T,
    pub dual_value: T,
    pub pivots: usize,
}

impl<T: Real> OtSolution<T> {
    pub fn duality_gap(&self) -> T {
        (self.primal_value - self.dual_value).abs()
    }
}

/// Row and column visiting order for the north-west corner start: atoms
/// sorted along the first coordinate.
fn sweep_order<T: Real>(m: &Measure<T>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| {
        m.point(a)[0]
            .partial_cmp(&m.point(b)[0])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Solves the transportation problem between `mu` and `nu` for `cost`.
pub fn solve_with_cost<T: Real>(mu: &Measure<T>, nu: &Measure<T>, cost: &CostMatrix<T>) -> Result<OtSolution<T>> {
    if cost.rows() != mu.len() || cost.cols() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}×{} but measures have {} and {} atoms",
            cost.rows(),
            cost.cols(),
            mu.len(),
            nu.len()
        )));
    }
    let rows = sweep_order(mu);
    let cols = sweep_order(nu);
    let basis = solve_transport(mu.weights(), nu.weights(), cost.entries(), Some((&rows, &cols)))?;
    let plan = TransportPlan::from_cells(basis.arcs, mu.weights().to_vec(), nu.weights().to_vec())?;
    let duals = DualPair {
        f: basis.f,
        g: basis.g,
        cost_convention: cost.kind(),
    };
    let primal_value = plan.cost(cost);
    let dual_value = duals.objective(mu.weights(), nu.weights());
    let sol = OtSolution {
        plan,
        duals,
        primal_value,
        dual_value,
        pivots: basis.pivots,
    };
    let gap_tol = T::lit(1e-9).max(T::solver_eps() * T::lit(1e3)) * (T::one() + primal_value.abs());
    if sol.duality_gap() > gap_tol {
        return Err(Error::Numerical {
            message: "duality gap above tolerance".into(),
            residual: sol.duality_gap().as_f64(),
        });
    }
    Ok(sol)
}

/// Optimal plan and duals for the half squared Euclidean cost.
pub fn solve<T: Real>(mu: &Measure<T>, nu: &Measure<T>) -> Result<OtSolution<T>> {
    let cost = build_cost(mu, nu)?;
    solve_with_cost(mu, nu, &cost)
}

impl<T: Real> OtSolution<T> {
    /// Optimal duals for which, as far as possible, only the cells carrying
    /// mass are tight: every other cell gets a slack of at least `ε` for the
    /// largest `ε ∈ {1e-6, 1e-7, 1e-8} · (1 + max C)` that admits one.
    /// Returns `None` when the optimal plan is not unique on the tight cells
    /// at these margins.
    pub fn strictly_complementary_duals(&self, cost: &CostMatrix<T>) -> Option<DualPair<T>> {
        let scale = T::one() + cost.entries().iter().fold(T::zero(), |s, v| s.max(v.abs()));
        [1e-6, 1e-7, 1e-8]
            .iter()
            .find_map(|&e| separate_duals(&self.plan, &self.duals, cost, T::lit(e) * scale))
    }

    /// Replaces the duals by [`strictly_complementary_duals`](Self::strictly_complementary_duals) when they exist.
    pub fn with_strict_duals(mut self, cost: &CostMatrix<T>) -> Self {
        if let Some(d) = self.strictly_complementary_duals(cost) {
            self.dual_value = d.objective(&self.plan.row_marginal, &self.plan.col_marginal);
            self.duals = d;
        }
        self
    }
}

/// Label-correcting search for potentials `π` (`π_i = f_i`, `π_{n+j} = −g_j`)
/// satisfying `π_i − π_{n+j} ≤ C_ij − ε` off the support and equality on it,
/// started from the given optimal duals.
fn separate_duals<T: Real>(
    plan: &TransportPlan<T>,
    duals: &DualPair<T>,
    cost: &CostMatrix<T>,
    eps: T,
) -> Option<DualPair<T>> {
    let (n, m) = (cost.rows(), cost.cols());
    let active = T::lit(ACTIVE_MASS);
    let mut support = vec![false; n * m];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, x) in plan.cells() {
        if x > active {
            support[i * m + j] = true;
            out_edges[i].push(j);
        }
    }
    let mut pi: Vec<T> = duals.f.iter().copied().chain(duals.g.iter().map(|&g| -g)).collect();
    let nodes = n + m;
    let slack = eps * T::lit(1e-6);
    let mut queued = vec![false; nodes];
    let mut queue = std::collections::VecDeque::with_capacity(nodes);
    for v in n..nodes {
        queue.push_back(v);
        queued[v] = true;
    }
    let mut pops = 0usize;
    let budget = 40 * nodes + 1000;
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        pops += 1;
        if pops > budget {
            return None;
        }
        if u >= n {
            let j = u - n;
            for i in 0..n {
                let w = if support[i * m + j] { cost.get(i, j) } else { cost.get(i, j) - eps };
                let cand = pi[u] + w;
                if cand < pi[i] - slack {
                    pi[i] = cand;
                    if !queued[i] {
                        queued[i] = true;
                        queue.push_back(i);
                    }
                }
            }
        } else {
            for &j in &out_edges[u] {
                let v = n + j;
                let cand = pi[u] - cost.get(u, j);
                if cand < pi[v] - slack {
                    pi[v] = cand;
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    let f: Vec<T> = pi[..n].to_vec();
    let g: Vec<T> = pi[n..].iter().map(|&p| -p).collect();
    let out = DualPair {
        f,
        g,
        cost_convention: duals.cost_convention,
    }
    .normalized();
    // the relaxation stops within `slack`; confirm the margins it promised
    for i in 0..n {
        for j in 0..m {
            let r = cost.get(i, j) - out.f[i] - out.g[j];
            let ok = if support[i * m + j] {
                r.abs() <= eps * T::lit(1e-4)
            } else {
                r >= eps * T::lit(0.5)
            };
            if !ok {
                return None;
            }
        }
    }
    Some(out)
}

/// Optimality diagnostics of a primal–dual pair.
#[derive(Clone, Debug, Serialize)]
pub struct SlacknessReport {
    /// Largest `|f_i + g_j − C_ij|` over cells with mass above [`ACTIVE_MASS`].
    pub max_active_residual: f64,
    /// Largest `max(f_i + g_j − C_ij, 0)` over all cells.
    pub max_dual_violation: f64,
    pub max_marginal_residual: f64,
    pub duality_gap: f64,
}

pub fn verify_slackness<T: Real>(sol: &OtSolution<T>, cost: &CostMatrix<T>) -> Result<SlacknessReport> {
    let (n, m) = (cost.rows(), cost.cols());
    if sol.plan.rows() != n || sol.plan.cols() != m || sol.duals.f.len() != n || sol.duals.g.len() != m {
        return Err(Error::DimensionMismatch("solution and cost shapes differ".into()));
    }
    let (f, g) = (&sol.duals.f, &sol.duals.g);
    let active = T::lit(ACTIVE_MASS);
    let max_active_residual = sol
        .plan
        .cells()
        .iter()
        .filter(|c| c.2 > active)
        .map(|&(i, j, _)| (f[i] + g[j] - cost.get(i, j)).abs().as_f64())
        .fold(0.0, f64::max);
    let mut max_dual_violation = 0.0_f64;
    for (i, &fi) in f.iter().enumerate() {
        for (j, &gj) in g.iter().enumerate() {
            max_dual_violation = max_dual_violation.max((fi + gj - cost.get(i, j)).as_f64());
        }
    }
    Ok(SlacknessReport {
        max_active_residual,
        max_dual_violation,
        max_marginal_residual: sol.plan.marginal_residual().as_f64(),
        duality_gap: sol.duality_gap().as_f64(),
    })
}

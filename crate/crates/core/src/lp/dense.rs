use crate::scalar::Real;

/// `min cᵀx  s.t.  A x = b,  x ≥ 0`, solved by a two-phase tableau
/// simplex with Bland's rule. Intended for problems with at most a few
/// hundred rows and columns.
#[derive(Clone, Debug)]
pub struct DenseLp<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    cost: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Phase-one optimum: the smallest achievable `‖A x − b‖₁`.
    pub infeasibility: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpFailure<T> {
    Infeasible { residual: T },
    Unbounded,
    IterationLimit,
}

struct Tableau<T> {
    // rows × (cols + 1); the last column is the right-hand side
    t: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
}

impl<T: Real> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != T::zero() {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = T::zero();
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[T], allowed: usize) -> Vec<T> {
        let mut z: Vec<T> = cost[..allowed].to_vec();
        for (row, &bv) in self.t.iter().zip(&self.basis) {
            let cb = cost[bv];
            if cb != T::zero() {
                for (zj, &a) in z.iter_mut().zip(row.iter()) {
                    *zj -= cb * a;
                }
            }
        }
        z
    }

    /// Runs Bland's rule on columns `0..allowed`.
    fn optimize(&mut self, cost: &[T], allowed: usize, tol: T, max_iter: usize) -> Result<(), LpFailure<T>> {
        for _ in 0..max_iter {
            let z = self.reduced_costs(cost, allowed);
            let Some(enter) = (0..allowed).find(|&j| z[j] < -tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for (r, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > tol {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - tol
                                || (ratio <= lratio + tol && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(LpFailure::Unbounded),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Err(LpFailure::IterationLimit)
    }
}

impl<T: Real> DenseLp<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            rows: Vec::new(),
            rhs: Vec::new(),
            cost: vec![T::zero(); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn set_cost(&mut self, j: usize, c: T) {
        self.cost[j] = c;
    }

    /// Adds the equality `Σ coeffs[k] x_k = rhs`.
    pub fn add_eq(&mut self, coeffs: Vec<T>, rhs: T) {
        assert_eq!(coeffs.len(), self.cost.len(), "row length");
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn solve(&self, feas_tol: T) -> Result<LpSolution<T>, LpFailure<T>> {
        let m = self.rows.len();
        let n = self.cost.len();
        let scale = self
            .rows
            .iter()
            .flatten()
            .chain(&self.rhs)
            .fold(T::one(), |s, v| s.max(v.abs()));
        let tol = T::epsilon().sqrt() * T::lit(1e-3) * scale;
        let max_iter = 50 * (m + n + 10);

        let cols = n + m;
        let mut t = Vec::with_capacity(m);
        for (r, (row, &b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let sign = if b < T::zero() { -T::one() } else { T::one() };
            let mut line: Vec<T> = row.iter().map(|&a| a * sign).collect();
            line.extend((0..m).map(|k| if k == r { T::one() } else { T::zero() }));
            line.push(b * sign);
            t.push(line);
        }
        let mut tab = Tableau {
            t,
            basis: (n..n + m).collect(),
            cols,
        };

        let mut phase1_cost = vec![T::zero(); cols];
        for c in phase1_cost.iter_mut().skip(n) {
            *c = T::one();
        }
        tab.optimize(&phase1_cost, cols, tol, max_iter)?;
        let infeasibility: T = tab
            .t
            .iter()
            .zip(&tab.basis)
            .filter(|(_, &bv)| bv >= n)
            .map(|(row, _)| row[cols].abs())
            .sum();
        if infeasibility > feas_tol {
            return Err(LpFailure::Infeasible {
                residual: infeasibility,
            });
        }

        // Drive artificial variables out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n {
                let col = (0..n)
                    .filter(|&j| tab.t[r][j].abs() > tol)
                    .max_by(|&a, &b| tab.t[r][a].abs().partial_cmp(&tab.t[r][b].abs()).unwrap());
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        let mut cost2 = self.cost.clone();
        cost2.extend(std::iter::repeat_n(T::zero(), m));
        tab.optimize(&cost2, n, tol, max_iter)?;

        let mut x = vec![T::zero(); n];
        for (row, &bv) in tab.t.iter().zip(&tab.basis) {
            if bv < n {
                x[bv] = row[cols].max(T::zero());
            }
        }
        let value = x.iter().zip(&self.cost).map(|(&xi, &ci)| xi * ci).sum();
        Ok(LpSolution {
            x,
            value,
            infeasibility,
        })
    }
}

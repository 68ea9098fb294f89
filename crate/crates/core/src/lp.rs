//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems here have at most a few thousand columns, so a dense tableau is
//! adequate. Pivoting is fully deterministic: the entering column is the
//! lowest-index improving column and ratio-test ties go to the lowest-index
//! basic variable.

use std::fmt;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
    Feasibility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Row>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, LpStatus::Optimal | LpStatus::Feasible)
    }
}

impl LinearProgram {
    /// A program over `num_vars` variables, each bounded to `[0, +inf)` until
    /// changed with [`LinearProgram::set_bounds`].
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        LinearProgram {
            num_vars,
            sense,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_objective(&mut self, coeffs: Vec<f64>) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(Error::InvalidInput("objective length mismatch".into()));
        }
        self.objective = coeffs;
        Ok(())
    }

    pub fn set_objective_coeff(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> Result<()> {
        if !lo.is_finite() || lo > hi {
            return Err(Error::InvalidInput(format!("bad bounds [{lo}, {hi}] for variable {var}")));
        }
        self.lower[var] = lo;
        self.upper[var] = hi;
        Ok(())
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(Error::InvalidInput("row length mismatch".into()));
        }
        self.rows.push(Row { coeffs, relation, rhs });
        Ok(())
    }

    /// Adds a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.rows.push(Row { coeffs, relation, rhs });
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_vars {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> LpSolution {
        Tableau::build(self).run(self)
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
            Sense::Feasibility => "find",
        };
        write!(f, "{sense}")?;
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                write!(f, " {c:+}*x{j}")?;
            }
        }
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for row in &self.rows {
            for (j, a) in row.coeffs.iter().enumerate() {
                if *a != 0.0 {
                    write!(f, " {a:+}*x{j}")?;
                }
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            writeln!(f, " {rel} {}", row.rhs)?;
        }
        for j in 0..self.num_vars {
            writeln!(f, " {} <= x{j} <= {}", self.lower[j], self.upper[j])?;
        }
        Ok(())
    }
}

struct Tableau {
    /// `m` rows of `cols + 1` entries; the last entry is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    structural: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars;
        // Rows in shifted variables x' = x - lo, plus explicit upper-bound rows.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        for row in &lp.rows {
            let shift: f64 = row.coeffs.iter().zip(&lp.lower).map(|(a, lo)| a * lo).sum();
            rows.push((row.coeffs.clone(), row.relation, row.rhs - shift));
        }
        for j in 0..n {
            if lp.upper[j].is_finite() {
                let mut coeffs = vec![0.0; n];
                coeffs[j] = 1.0;
                rows.push((coeffs, Relation::Le, lp.upper[j] - lp.lower[j]));
            }
        }
        for (coeffs, rel, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                coeffs.iter_mut().for_each(|a| *a = -*a);
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        let m = rows.len();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + num_slack;
        let cols = first_artificial + num_art;
        let mut a = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial;
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            a[i][..n].copy_from_slice(&coeffs);
            a[i][cols] = rhs;
            match rel {
                Relation::Le => {
                    a[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[i][slack] = -1.0;
                    slack += 1;
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            a,
            basis,
            cols,
            structural: n,
            first_artificial,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, row) in self.a.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.cols {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    /// Minimizes `cost` over the current basis; columns `>= allowed` never enter.
    fn minimize(&mut self, cost: &[f64], allowed: usize, iter_cap: usize) -> std::result::Result<(), LpStatus> {
        let rhs = self.cols;
        for _ in 0..iter_cap {
            let d = self.reduced_costs(cost);
            let entering = (0..allowed).find(|&j| d[j] < -COST_TOL && !self.basis.contains(&j));
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let coef = self.a[i][c];
                if coef > PIVOT_TOL {
                    let ratio = self.a[i][rhs].max(0.0) / coef;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(LpStatus::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(LpStatus::IterationLimit)
    }

    fn run(mut self, lp: &LinearProgram) -> LpSolution {
        let n = self.structural;
        let iter_cap = 50_000 + 50 * (self.cols + self.a.len());
        let fail = |status| LpSolution {
            status,
            values: Vec::new(),
            objective_value: f64::NAN,
        };

        if self.first_artificial < self.cols {
            let mut cost = vec![0.0; self.cols];
            cost[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            if let Err(status) = self.minimize(&cost, self.cols, iter_cap) {
                return fail(if status == LpStatus::Unbounded { LpStatus::Infeasible } else { status });
            }
            let scale = 1.0 + self.a.iter().map(|r| r[self.cols].abs()).fold(0.0, f64::max);
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.a)
                .filter(|(b, _)| **b >= self.first_artificial)
                .map(|(_, row)| row[self.cols])
                .sum();
            if infeas > FEAS_TOL * scale {
                return fail(LpStatus::Infeasible);
            }
            // Drive zero-valued artificials out of the basis where possible.
            for r in 0..self.a.len() {
                if self.basis[r] >= self.first_artificial {
                    if let Some(c) = (0..self.first_artificial).find(|&j| self.a[r][j].abs() > PIVOT_TOL) {
                        self.pivot(r, c);
                    }
                }
            }
        }

        let mut cost = vec![0.0; self.cols];
        match lp.sense {
            Sense::Maximize => cost[..n].iter_mut().zip(&lp.objective).for_each(|(c, o)| *c = -o),
            Sense::Minimize => cost[..n].copy_from_slice(&lp.objective),
            Sense::Feasibility => {}
        }
        if lp.sense != Sense::Feasibility {
            if let Err(status) = self.minimize(&cost, self.first_artificial, iter_cap) {
                return fail(status);
            }
        }

        let mut values = lp.lower.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                values[b] += self.a[i][self.cols];
            }
        }
        for j in 0..n {
            values[j] = values[j].clamp(lp.lower[j], lp.upper[j]);
        }
        let objective_value = lp.objective_at(&values);
        LpSolution {
            status: if lp.sense == Sense::Feasibility {
                LpStatus::Feasible
            } else {
                LpStatus::Optimal
            },
            values,
            objective_value,
        }
    }
}

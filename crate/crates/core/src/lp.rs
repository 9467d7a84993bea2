//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Sized for the per-node problems in this crate (a handful of variables and
//! constraints), where exactness of the pivoting rule matters more than speed.

use crate::error::{Error, Result};

/// Pivot and feasibility tolerance.
pub const LP_TOLERANCE: f64 = 1e-9;

const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Le, rhs }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Ge, rhs }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Eq, rhs }
    }
}

/// `maximize objective·x` subject to `constraints`, with `x_k ≥ 0` unless
/// `free[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, constraints: Vec::new(), free: vec![false; n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn set_free(&mut self, k: usize) -> &mut Self {
        self.free[k] = true;
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.num_vars();
        if self.free.len() != n {
            return Err(Error::dim("free-variable flags", n, self.free.len()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::dim("constraint coefficients", n, c.coeffs.len()));
            }
            if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::Numerical("non-finite linear program data".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite objective".into()));
        }

        // Column layout: each original variable maps to one column, or two
        // (positive and negative parts) when free.
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
        let mut structural = 0;
        for k in 0..n {
            if self.free[k] {
                col_of.push((structural, Some(structural + 1)));
                structural += 2;
            } else {
                col_of.push((structural, None));
                structural += 1;
            }
        }

        let rows = self.constraints.len();
        let mut slack_cols = 0;
        let mut art_cols = 0;
        let mut normalized = Vec::with_capacity(rows);
        for c in &self.constraints {
            let (mut coeffs, mut rel, mut rhs) = (c.coeffs.clone(), c.relation, c.rhs);
            if rhs < 0.0 {
                coeffs.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            match rel {
                Relation::Le => slack_cols += 1,
                Relation::Ge => {
                    slack_cols += 1;
                    art_cols += 1
                }
                Relation::Eq => art_cols += 1,
            }
            normalized.push((coeffs, rel, rhs));
        }

        let width = structural + slack_cols + art_cols;
        let art_start = structural + slack_cols;
        let mut t = Tableau::new(rows, width);
        let (mut next_slack, mut next_art) = (structural, art_start);
        for (r, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
            for (k, &v) in coeffs.iter().enumerate() {
                let (p, neg) = col_of[k];
                t.set(r, p, v);
                if let Some(q) = neg {
                    t.set(r, q, -v);
                }
            }
            t.set_rhs(r, *rhs);
            match rel {
                Relation::Le => {
                    t.set(r, next_slack, 1.0);
                    t.basis[r] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    t.set(r, next_slack, -1.0);
                    next_slack += 1;
                    t.set(r, next_art, 1.0);
                    t.basis[r] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    t.set(r, next_art, 1.0);
                    t.basis[r] = next_art;
                    next_art += 1;
                }
            }
        }

        if art_cols > 0 {
            // Phase one: maximize -(sum of artificials).
            let mut cost = vec![0.0; width];
            cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
            t.load_objective(&cost);
            match t.run(width)? {
                Phase::Optimal => {}
                Phase::Unbounded => return Err(Error::Numerical("phase one reported unbounded".into())),
            }
            if t.objective_value() < -LP_TOLERANCE * (1.0 + t.rhs_scale()) {
                return Ok(LpOutcome::Infeasible);
            }
            t.expel_artificials(art_start);
        }

        let mut cost = vec![0.0; width];
        for (k, &c) in self.objective.iter().enumerate() {
            let (p, neg) = col_of[k];
            cost[p] = c;
            if let Some(q) = neg {
                cost[q] = -c;
            }
        }
        t.load_objective(&cost);
        match t.run(art_start)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        }

        let cols = t.solution();
        let x: Vec<f64> = col_of.iter().map(|&(p, neg)| cols[p] - neg.map_or(0.0, |q| cols[q])).collect();
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

/// Maximizes `objective·u` over the probability simplex intersected with
/// `extra` constraints.
pub fn maximize_on_simplex(objective: &[f64], extra: &[Constraint]) -> Result<LpOutcome> {
    let n = objective.len();
    let mut lp = LinearProgram::new(objective.to_vec());
    lp.push(Constraint::eq(vec![1.0; n], 1.0));
    for c in extra {
        lp.push(c.clone());
    }
    lp.solve()
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// Row-major `rows × (width + 1)`; the last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs `c_j − c_B B⁻¹ A_j`, then `-z` in the last slot.
    obj: Vec<f64>,
}

impl Tableau {
    fn new(rows: usize, width: usize) -> Self {
        Self { rows, width, a: vec![0.0; rows * (width + 1)], basis: vec![usize::MAX; rows], obj: vec![0.0; width + 1] }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.width + 1) + c]
    }

    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.a[r * (self.width + 1) + c] = v;
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn set_rhs(&mut self, r: usize, v: f64) {
        let w = self.width;
        self.set(r, w, v);
    }

    fn rhs_scale(&self) -> f64 {
        (0..self.rows).map(|r| self.rhs(r).abs()).fold(0.0, f64::max)
    }

    fn load_objective(&mut self, cost: &[f64]) {
        self.obj[..self.width].copy_from_slice(cost);
        self.obj[self.width] = 0.0;
        for r in 0..self.rows {
            let b = self.basis[r];
            let cb = self.obj[b];
            if cb != 0.0 {
                for c in 0..=self.width {
                    self.obj[c] -= cb * self.at(r, c);
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.obj[self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        self.a[pr * w + pc] = 1.0;
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                for c in 0..w {
                    let v = self.a[pr * w + c];
                    self.a[r * w + c] -= f * v;
                }
                self.a[r * w + pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for c in 0..w {
                self.obj[c] -= f * self.a[pr * w + c];
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule: lowest-index improving column, lowest-index basic
    /// variable among ratio ties. Only columns below `allowed` may enter.
    fn run(&mut self, allowed: usize) -> Result<Phase> {
        for _ in 0..MAX_PIVOTS {
            let Some(pc) = (0..allowed).find(|&c| self.obj[c] > LP_TOLERANCE) else {
                return Ok(Phase::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let v = self.at(r, pc);
                if v > LP_TOLERANCE {
                    let ratio = self.rhs(r).max(0.0) / v;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - LP_TOLERANCE
                                || (ratio <= bratio + LP_TOLERANCE && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(Phase::Unbounded),
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
        Err(Error::Numerical("simplex pivot limit reached".into()))
    }

    /// Pivots zero-level artificial variables out of the basis and drops rows
    /// that turn out to be redundant.
    fn expel_artificials(&mut self, art_start: usize) {
        let mut r = 0;
        while r < self.rows {
            if self.basis[r] >= art_start {
                if let Some(pc) = (0..art_start).find(|&c| self.at(r, c).abs() > LP_TOLERANCE) {
                    self.pivot(r, pc);
                } else {
                    self.remove_row(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width + 1;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.width];
        for r in 0..self.rows {
            x[self.basis[r]] = self.rhs(r).max(0.0);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximize_first_coordinate_on_simplex() {
        let (x, v) = maximize_on_simplex(&[1.0, 0.0], &[]).unwrap().optimal().unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn two_by_two_max_min() {
        // Variables (u1, u2, t): max t, 2u1 >= t, 3u2 >= t, u1 + u2 = 1.
        let mut lp = LinearProgram::new(vec![0.0, 0.0, 1.0]);
        lp.push(Constraint::eq(vec![1.0, 1.0, 0.0], 1.0))
            .push(Constraint::ge(vec![2.0, 0.0, -1.0], 0.0))
            .push(Constraint::ge(vec![0.0, 3.0, -1.0], 0.0));
        let (x, v) = lp.solve().unwrap().optimal().unwrap();
        // Hand solution of 2u1 = 3u2, u1 + u2 = 1.
        assert!((v - 1.2).abs() < 1e-12);
        assert!((x[0] - 0.6).abs() < 1e-12);
        assert!((x[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tie_picks_lowest_index_vertex() {
        let (x, v) = maximize_on_simplex(&[1.0, 1.0], &[]).unwrap().optimal().unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn infeasible_detected() {
        let out = maximize_on_simplex(&[1.0, 0.0], &[Constraint::ge(vec![1.0, 1.0], 2.0)]).unwrap();
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.push(Constraint::le(vec![0.0, 1.0], 1.0));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variable_goes_negative() {
        // max -y s.t. y >= -3, y free.
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.set_free(0).push(Constraint::ge(vec![1.0], -3.0));
        let (x, v) = lp.solve().unwrap().optimal().unwrap();
        assert!((x[0] + 3.0).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.push(Constraint::eq(vec![1.0, 1.0], 1.0)).push(Constraint::eq(vec![2.0, 2.0], 2.0));
        let (x, v) = lp.solve().unwrap().optimal().unwrap();
        assert_eq!(x, vec![0.0, 1.0]);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.push(Constraint::le(vec![1.0], 1.0));
        assert!(matches!(lp.solve(), Err(Error::Dimension { .. })));
    }
}

//! A small dense two-phase simplex solver, generic over the scalar type.
//!
//! The same code path runs in exact rational arithmetic (`BigRational`, zero
//! tolerance) and in floating point (`f64`, fixed comparison tolerance), so
//! covering values and certificates can be produced in either mode without
//! duplicating the pivoting logic. Bland's rule picks entering and leaving
//! variables, which rules out cycling and makes every run deterministic.
//!
//! All variables are nonnegative; the problems in this crate (covering values,
//! smoothing, peeling, sparsifier feasibility) are naturally stated that way.

use num::{BigRational, One, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar admissible for the simplex tableau.
pub trait LpScalar:
    Clone
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// Comparison tolerance: entries within `tol` of zero count as zero.
    fn tol() -> Self;

    fn is_positive_past_tol(&self) -> bool {
        *self > Self::tol()
    }

    fn is_negative_past_tol(&self) -> bool {
        *self < -Self::tol()
    }
}

impl LpScalar for f64 {
    fn tol() -> f64 {
        1e-9
    }
}

impl LpScalar for BigRational {
    fn tol() -> BigRational {
        BigRational::zero()
    }
}

/// Constraint comparison direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// A linear program over nonnegative variables.
pub struct LinearProgram<T> {
    num_vars: usize,
    maximize: bool,
    objective: Vec<T>,
    constraints: Vec<(Vec<T>, Cmp, T)>,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn maximize(objective: Vec<T>) -> Self {
        LinearProgram {
            num_vars: objective.len(),
            maximize: true,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn minimize(objective: Vec<T>) -> Self {
        LinearProgram {
            num_vars: objective.len(),
            maximize: false,
            objective,
            constraints: Vec::new(),
        }
    }

    /// Add `coeffs · x  cmp  rhs`.
    ///
    /// # Panics
    /// Panics if `coeffs` has the wrong length.
    pub fn constraint(&mut self, coeffs: Vec<T>, cmp: Cmp, rhs: T) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "constraint arity mismatch");
        self.constraints.push((coeffs, cmp, rhs));
        self
    }

    pub fn solve(&self) -> LpOutcome<T> {
        solve_impl(self)
    }
}

/// Solver result. `solution` holds the structural variables only.
#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { value: T, solution: Vec<T> },
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    /// Unwrap the optimal value and solution.
    ///
    /// # Panics
    /// Panics if the outcome is infeasible or unbounded.
    pub fn expect_optimal(self, what: &str) -> (T, Vec<T>) {
        match self {
            LpOutcome::Optimal { value, solution } => (value, solution),
            other => panic!("{what}: expected optimal LP outcome, got {other:?}", other = kind(&other)),
        }
    }
}

fn kind<T>(o: &LpOutcome<T>) -> &'static str {
    match o {
        LpOutcome::Optimal { .. } => "optimal",
        LpOutcome::Infeasible => "infeasible",
        LpOutcome::Unbounded => "unbounded",
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    zrow: Vec<T>,
    basis: Vec<usize>,
    ncols: usize,
    rhs: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn pivot(&mut self, prow: usize, pcol: usize) {
        let pval = self.rows[prow][pcol].clone();
        for j in 0..=self.rhs {
            let v = self.rows[prow][j].clone() / pval.clone();
            self.rows[prow][j] = v;
        }
        for i in 0..self.rows.len() {
            if i == prow {
                continue;
            }
            let factor = self.rows[i][pcol].clone();
            if factor.is_zero() {
                continue;
            }
            for j in 0..=self.rhs {
                let v = self.rows[i][j].clone() - factor.clone() * self.rows[prow][j].clone();
                self.rows[i][j] = v;
            }
        }
        let factor = self.zrow[pcol].clone();
        if !factor.is_zero() {
            for j in 0..=self.rhs {
                let v = self.zrow[j].clone() - factor.clone() * self.rows[prow][j].clone();
                self.zrow[j] = v;
            }
        }
        self.basis[prow] = pcol;
    }

    /// Bland's rule iteration over columns in `allowed`. Returns false on
    /// unboundedness.
    fn run(&mut self, allowed: &[bool]) -> bool {
        loop {
            let entering = (0..self.ncols)
                .find(|&j| allowed[j] && self.zrow[j].is_negative_past_tol());
            let Some(pcol) = entering else {
                return true;
            };
            let mut prow: Option<usize> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][pcol].is_positive_past_tol() {
                    continue;
                }
                let better = match prow {
                    None => true,
                    Some(r) => {
                        let cur = self.rows[r][self.rhs].clone() / self.rows[r][pcol].clone();
                        let cand = self.rows[i][self.rhs].clone() / self.rows[i][pcol].clone();
                        cand < cur || (cand == cur && self.basis[i] < self.basis[r])
                    }
                };
                if better {
                    prow = Some(i);
                }
            }
            let Some(prow) = prow else {
                return false;
            };
            self.pivot(prow, pcol);
        }
    }
}

fn solve_impl<T: LpScalar>(lp: &LinearProgram<T>) -> LpOutcome<T> {
    let n = lp.num_vars;
    let m = lp.constraints.len();

    // Normalize rows to nonnegative right-hand sides first; flipping a row
    // also flips its comparison direction, which changes the slack and
    // artificial columns it needs.
    let normalized: Vec<(Vec<T>, Cmp, T)> = lp
        .constraints
        .iter()
        .map(|(coeffs, cmp, b)| {
            if b.is_negative_past_tol() {
                let eff = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
                (coeffs.iter().map(|c| -c.clone()).collect(), eff, -b.clone())
            } else {
                (coeffs.clone(), *cmp, b.clone())
            }
        })
        .collect();

    // Column layout: structural | slack/surplus | artificial | rhs.
    let n_slack = normalized.iter().filter(|(_, c, _)| *c != Cmp::Eq).count();
    let n_art = normalized.iter().filter(|(_, c, _)| *c != Cmp::Le).count();
    let ncols = n + n_slack + n_art;
    let rhs = ncols;

    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let art_start = n + n_slack;
    for (coeffs, cmp, b) in &normalized {
        let mut row = vec![T::zero(); ncols + 1];
        for (j, c) in coeffs.iter().enumerate() {
            row[j] = c.clone();
        }
        row[rhs] = b.clone();
        match cmp {
            Cmp::Le => {
                row[slack_at] = T::one();
                basis.push(slack_at);
                slack_at += 1;
            }
            Cmp::Ge => {
                row[slack_at] = -T::one();
                slack_at += 1;
                row[art_at] = T::one();
                basis.push(art_at);
                art_at += 1;
            }
            Cmp::Eq => {
                row[art_at] = T::one();
                basis.push(art_at);
                art_at += 1;
            }
        }
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        zrow: vec![T::zero(); ncols + 1],
        basis,
        ncols,
        rhs,
    };

    // Phase 1: maximize -(sum of artificials). z-row starts at -c, then basic
    // artificial columns are eliminated so reduced costs are consistent.
    if n_art > 0 {
        for j in art_start..ncols {
            tab.zrow[j] = T::one();
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..=rhs {
                    let v = tab.zrow[j].clone() - tab.rows[i][j].clone();
                    tab.zrow[j] = v;
                }
            }
        }
        let allowed = vec![true; ncols];
        if !tab.run(&allowed) {
            // Phase 1 is bounded below by 0; this cannot trigger.
            unreachable!("phase-1 objective is bounded");
        }
        if tab.zrow[rhs].is_negative_past_tol() {
            return LpOutcome::Infeasible;
        }
        // Drive surviving artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] < art_start {
                continue;
            }
            if let Some(col) =
                (0..art_start).find(|&j| !tab.rows[i][j].is_zero() && {
                    tab.rows[i][j].is_positive_past_tol() || tab.rows[i][j].is_negative_past_tol()
                })
            {
                tab.pivot(i, col);
            }
            // Otherwise the row is redundant; the artificial stays basic at
            // zero and is barred from re-entering in phase 2.
        }
    }

    // Phase 2: rebuild the z-row for the real objective over the current
    // basis.
    let sign_obj: Vec<T> = lp
        .objective
        .iter()
        .map(|c| if lp.maximize { c.clone() } else { -c.clone() })
        .collect();
    tab.zrow = vec![T::zero(); ncols + 1];
    for (j, c) in sign_obj.iter().enumerate() {
        tab.zrow[j] = -c.clone();
    }
    for i in 0..m {
        let k = tab.basis[i];
        if k < n && !sign_obj[k].is_zero() {
            let factor = sign_obj[k].clone();
            for j in 0..=rhs {
                let v = tab.zrow[j].clone() + factor.clone() * tab.rows[i][j].clone();
                tab.zrow[j] = v;
            }
        }
    }
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().take(ncols).skip(art_start) {
        *a = false;
    }
    if !tab.run(&allowed) {
        return LpOutcome::Unbounded;
    }

    let mut solution = vec![T::zero(); n];
    for i in 0..m {
        if tab.basis[i] < n {
            solution[tab.basis[i]] = tab.rows[i][rhs].clone();
        }
    }
    let raw = tab.zrow[rhs].clone();
    let value = if lp.maximize { raw } else { -raw };
    LpOutcome::Optimal { value, solution }
}

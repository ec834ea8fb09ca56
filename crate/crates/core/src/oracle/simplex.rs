//! Exact two-phase simplex over rationals with Bland's anti-cycling rule.

use num_traits::{Signed, Zero};

use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, x: Vec<Rational> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows[r]` holds the coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, obj: &mut [Rational], r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = &*v - &f * pv;
                }
            }
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = &*v - &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes the objective whose reduced costs are in `obj` (last entry is minus
    /// the current value) over columns allowed by `allowed`. Returns false when
    /// unbounded.
    fn optimize(&mut self, obj: &mut [Rational], allowed: impl Fn(usize) -> bool) -> bool {
        loop {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && obj[j].is_positive()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[c];
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(obj, r, c),
                None => return false,
            }
        }
    }
}

/// Maximizes `c . x` subject to `constraints` and `x >= 0`.
pub fn maximize(c: &[Rational], constraints: &[Constraint]) -> LpOutcome {
    let nvars = c.len();
    // normalize to non-negative right-hand sides
    let rows: Vec<(Vec<Rational>, Relation, Rational)> = constraints
        .iter()
        .map(|con| {
            assert_eq!(con.coeffs.len(), nvars, "constraint width");
            if con.rhs.is_negative() {
                let rel = match con.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (con.coeffs.iter().map(|v| -v).collect(), rel, -&con.rhs)
            } else {
                (con.coeffs.clone(), con.relation, con.rhs.clone())
            }
        })
        .collect();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = nvars + slack_count;
    let cols = art_start + art_count;

    let mut tab = Tableau {
        rows: Vec::with_capacity(rows.len()),
        basis: Vec::with_capacity(rows.len()),
        cols,
    };
    let (mut s, mut a) = (nvars, art_start);
    for (coeffs, rel, rhs) in rows {
        let mut row = coeffs;
        row.resize(cols + 1, rational::zero());
        row[cols] = rhs;
        match rel {
            Relation::Le => {
                row[s] = rational::one();
                tab.basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -rational::one();
                s += 1;
                row[a] = rational::one();
                tab.basis.push(a);
                a += 1;
            }
            Relation::Eq => {
                row[a] = rational::one();
                tab.basis.push(a);
                a += 1;
            }
        }
        tab.rows.push(row);
    }

    // phase 1: maximize minus the sum of artificials
    if art_count > 0 {
        let mut obj = vec![rational::zero(); cols + 1];
        for v in &mut obj[art_start..cols] {
            *v = -rational::one();
        }
        for r in 0..tab.rows.len() {
            if tab.basis[r] >= art_start {
                for (v, rv) in obj.iter_mut().zip(&tab.rows[r]) {
                    *v = &*v + rv;
                }
            }
        }
        tab.optimize(&mut obj, |_| true);
        if !obj[cols].is_zero() {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&j| !tab.rows[r][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(&mut obj, r, j);
                        r += 1;
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    // phase 2
    let mut obj = vec![rational::zero(); cols + 1];
    obj[..nvars].clone_from_slice(c);
    for r in 0..tab.rows.len() {
        let b = tab.basis[r];
        if !obj[b].is_zero() {
            let f = obj[b].clone();
            for (v, rv) in obj.iter_mut().zip(&tab.rows[r]) {
                *v = &*v - &f * rv;
            }
        }
    }
    if !tab.optimize(&mut obj, |j| j < art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![rational::zero(); nvars];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nvars {
            x[b] = tab.rows[r][cols].clone();
        }
    }
    LpOutcome::Optimal { value: -&obj[cols], x }
}

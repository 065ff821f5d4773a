//! Dense two-phase tableau simplex, generic over the scalar field.
//!
//! With [`BigRational`](crate::scalar::BigRational) every pivot is exact, so
//! feasibility verdicts near a region boundary cannot flip on round-off.
//! Infeasible programs return a Farkas certificate read off the phase-1 duals.

use crate::error::{Error, Result};
use crate::scalar::LpScalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// `minimize cᵀx  s.t.  rows, x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram { num_vars, objective: vec![T::zero(); num_vars], constraints: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Row activity `a_iᵀx`.
    pub fn activity(&self, row: usize, x: &[T]) -> T {
        self.constraints[row]
            .coeffs
            .iter()
            .fold(T::zero(), |acc, (j, a)| acc + a.clone() * x[*j].clone())
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per constraint, sign convention of the original rows.
    pub duals: Vec<T>,
}

/// Multipliers `z` with `Aᵀz ≥ 0`, `bᵀz < 0`, `z ≥ 0` on `≤` rows and `z ≤ 0` on
/// `≥` rows. Any such vector proves the constraint system has no solution.
#[derive(Clone, Debug)]
pub struct FarkasCertificate<T> {
    pub multipliers: Vec<T>,
}

#[derive(Clone, Debug)]
pub enum LpOutcome<T> {
    Optimal(Solution<T>),
    Infeasible(FarkasCertificate<T>),
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible(_))
    }
}

/// Checks a Farkas certificate against `lp` with the scalar's tolerance.
pub fn verify_farkas<T: LpScalar>(lp: &LinearProgram<T>, cert: &FarkasCertificate<T>) -> bool {
    let z = &cert.multipliers;
    if z.len() != lp.constraints.len() {
        return false;
    }
    let mut aty = vec![T::zero(); lp.num_vars];
    let mut bty = T::zero();
    for (row, zi) in lp.constraints.iter().zip(z) {
        match row.relation {
            Relation::Le if zi.is_neg() => return false,
            Relation::Ge if zi.is_pos() => return false,
            _ => {}
        }
        if zi.is_zero() {
            continue;
        }
        for (j, a) in &row.coeffs {
            aty[*j] = aty[*j].clone() + a.clone() * zi.clone();
        }
        bty = bty + row.rhs.clone() * zi.clone();
    }
    bty.is_neg() && aty.iter().all(|v| !v.is_neg())
}

const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Column {
    Structural,
    Slack,
    Artificial,
}

struct Tableau<T> {
    /// `rows × (cols + 1)`, last entry is the right-hand side.
    a: Vec<Vec<T>>,
    cols: usize,
    kinds: Vec<Column>,
    basis: Vec<usize>,
    /// Column holding the identity vector of each row in the starting basis.
    unit_col: Vec<usize>,
    /// Rows that were negated to make the right-hand side non-negative.
    flipped: Vec<bool>,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let mut kinds = vec![Column::Structural; n];
        let mut rows: Vec<(Vec<(usize, T)>, Relation, T, bool)> = Vec::with_capacity(m);
        for c in &lp.constraints {
            let flip = c.rhs.is_negative();
            let (coeffs, relation, rhs) = if flip {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|(j, a)| (*j, -a.clone())).collect(), rel, -c.rhs.clone())
            } else {
                (c.coeffs.clone(), c.relation, c.rhs.clone())
            };
            rows.push((coeffs, relation, rhs, flip));
        }
        let mut slack_of = vec![None; m];
        let mut art_of = vec![None; m];
        let mut cols = n;
        for (i, r) in rows.iter().enumerate() {
            if r.1 != Relation::Eq {
                slack_of[i] = Some(cols);
                kinds.push(Column::Slack);
                cols += 1;
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.1 != Relation::Le {
                art_of[i] = Some(cols);
                kinds.push(Column::Artificial);
                cols += 1;
            }
        }
        let mut a = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut unit_col = Vec::with_capacity(m);
        let mut flipped = Vec::with_capacity(m);
        for (i, (coeffs, relation, rhs, flip)) in rows.into_iter().enumerate() {
            let mut row = vec![T::zero(); cols + 1];
            for (j, v) in coeffs {
                row[j] = row[j].clone() + v;
            }
            if let Some(s) = slack_of[i] {
                row[s] = if relation == Relation::Le { T::one() } else { -T::one() };
            }
            let unit = match relation {
                Relation::Le => slack_of[i].unwrap(),
                _ => art_of[i].unwrap(),
            };
            row[unit] = T::one();
            row[cols] = rhs;
            a.push(row);
            basis.push(unit);
            unit_col.push(unit);
            flipped.push(flip);
        }
        Tableau { a, cols, kinds, basis, unit_col, flipped }
    }

    /// Reduced-cost row `c - c_Bᵀ B⁻¹ A` (last entry `-c_Bᵀ B⁻¹ b`).
    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let mut d: Vec<T> = cost.to_vec();
        d.push(T::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, aij) in d.iter_mut().zip(&self.a[i]) {
                if !aij.is_zero() {
                    *dj = dj.clone() - cb.clone() * aij.clone();
                }
            }
        }
        d
    }

    fn pivot(&mut self, d: &mut [T], row: usize, col: usize) {
        let piv = self.a[row][col].clone();
        if !piv.is_one() {
            for v in self.a[row].iter_mut() {
                if !v.is_zero() {
                    *v = v.clone() / piv.clone();
                }
            }
        }
        let nz: Vec<usize> = (0..=self.cols).filter(|&j| !self.a[row][j].is_zero()).collect();
        let prow: Vec<T> = nz.iter().map(|&j| self.a[row][j].clone()).collect();
        let eliminate = |target: &mut [T]| {
            let f = target[col].clone();
            if f.is_zero() {
                return;
            }
            for (&j, p) in nz.iter().zip(&prow) {
                target[j] = target[j].clone() - f.clone() * p.clone();
            }
            if !T::EXACT {
                target[col] = T::zero();
            }
        };
        for (i, r) in self.a.iter_mut().enumerate() {
            if i != row {
                eliminate(r);
            }
        }
        eliminate(d);
        self.basis[row] = col;
    }

    /// Runs simplex iterations; returns `false` on unboundedness.
    fn optimize(&mut self, d: &mut [T], allowed: impl Fn(usize) -> bool) -> Result<bool> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = T::zero();
            for j in 0..self.cols {
                if !allowed(j) || !d[j].is_neg() {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if enter.is_none() || d[j] < best {
                    best = d[j].clone();
                    enter = Some(j);
                }
            }
            let Some(col) = enter else { return Ok(true) };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.a.iter().enumerate() {
                let aij = &row[col];
                if !aij.is_pos() {
                    continue;
                }
                let ratio = row[self.cols].clone() / aij.clone();
                let better = match &leave {
                    None => true,
                    Some((k, r)) => {
                        ratio < *r || (ratio == *r && self.basis[i] < self.basis[*k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, ratio)) = leave else { return Ok(false) };
            if ratio.is_negligible() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(d, row, col);
        }
        Err(Error::Lp(format!("no convergence after {MAX_PIVOTS} pivots")))
    }

    /// `y_i = c_unit - d_unit` for every row, mapped back through row flips.
    fn row_multipliers(&self, cost: &[T], d: &[T]) -> Vec<T> {
        self.unit_col
            .iter()
            .zip(&self.flipped)
            .map(|(&u, &flip)| {
                let y = cost[u].clone() - d[u].clone();
                if flip {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }
}

/// Solves `lp` with the two-phase method.
pub fn solve<T: LpScalar>(lp: &LinearProgram<T>) -> Result<LpOutcome<T>> {
    for c in &lp.constraints {
        if c.coeffs.iter().any(|(j, _)| *j >= lp.num_vars) {
            return Err(Error::Lp("constraint references an unknown variable".into()));
        }
    }
    let mut t = Tableau::build(lp);
    let cols = t.cols;

    let phase1: Vec<T> = t
        .kinds
        .iter()
        .map(|k| if *k == Column::Artificial { T::one() } else { T::zero() })
        .collect();
    let mut d = t.reduced_costs(&phase1);
    t.optimize(&mut d, |_| true)?;
    let infeasibility = -d[cols].clone();
    if infeasibility.is_pos() {
        // Phase-1 duals y satisfy Aᵀy ≤ 0 and bᵀy > 0; z = -y is the certificate.
        let multipliers = t.row_multipliers(&phase1, &d).into_iter().map(|y| -y).collect();
        return Ok(LpOutcome::Infeasible(FarkasCertificate { multipliers }));
    }

    // Drive zero-level artificials out of the basis where possible.
    for row in 0..t.basis.len() {
        if t.kinds[t.basis[row]] != Column::Artificial {
            continue;
        }
        if let Some(col) = (0..cols)
            .find(|&j| t.kinds[j] != Column::Artificial && !t.a[row][j].is_negligible())
        {
            t.pivot(&mut d, row, col);
        }
    }

    let mut phase2 = lp.objective.clone();
    phase2.resize(cols, T::zero());
    let mut d = t.reduced_costs(&phase2);
    let kinds = t.kinds.clone();
    if !t.optimize(&mut d, |j| kinds[j] != Column::Artificial)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![T::zero(); lp.num_vars];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < lp.num_vars {
            x[b] = t.a[i][cols].clone();
        }
    }
    let objective = -d[cols].clone();
    let duals = t.row_multipliers(&phase2, &d);
    Ok(LpOutcome::Optimal(Solution { x, objective, duals }))
}

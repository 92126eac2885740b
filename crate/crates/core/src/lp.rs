//! Small dense linear programs.
//!
//! Two-phase tableau simplex with Bland's rule. Problems here have at most a
//! few hundred variables, so a dense tableau is adequate.

const EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Maximise `objective · x` subject to `constraints` and `x >= 0`.
pub fn maximize(objective: &[f64], constraints: &[Constraint]) -> LpOutcome {
    let nvar = objective.len();
    let m = constraints.len();
    // Normalise rows to nonnegative rhs.
    let rows: Vec<(Vec<f64>, Relation, f64)> = constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|x| -x).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = nvar + n_slack + n_art;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let (mut s, mut a) = (nvar, nvar + n_slack);
    let art_start = nvar + n_slack;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t[i][..nvar].copy_from_slice(&coeffs[..nvar]);
        t[i][width] = *rhs;
        match rel {
            Relation::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Relation::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    // Phase 1: minimise the sum of artificials.
    if n_art > 0 {
        let mut cost = vec![0.0; width];
        for c in cost.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        if !run_simplex(&mut t, &mut basis, &cost, width) {
            return LpOutcome::Infeasible; // cannot be unbounded
        }
        let infeas: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(i, _)| t[i][width])
            .sum();
        if infeas > 1e-8 {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for i in 0..m {
            if basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, j);
                }
            }
        }
        for row in t.iter_mut() {
            for x in row.iter_mut().take(width).skip(art_start) {
                *x = 0.0;
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..nvar].copy_from_slice(objective);
    // forbid artificials from re-entering
    if !run_simplex_restricted(&mut t, &mut basis, &cost, width, art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; nvar];
    for (i, &b) in basis.iter().enumerate() {
        if b < nvar {
            x[b] = t[i][width];
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, value }
}

/// Feasibility of the constraint system with `x >= 0`.
pub fn feasible(nvar: usize, constraints: &[Constraint]) -> Option<Vec<f64>> {
    match maximize(&vec![0.0; nvar], constraints) {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for x in t[r].iter_mut() {
        *x /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    basis[r] = c;
}

fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], width: usize) -> bool {
    run_simplex_restricted(t, basis, cost, width, width)
}

/// Maximise `cost · x`; columns `>= allowed` never enter. Returns false if unbounded.
fn run_simplex_restricted(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    allowed: usize,
) -> bool {
    loop {
        // reduced costs: c_j - c_B B^-1 A_j
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let z: f64 = basis.iter().enumerate().map(|(i, &b)| cost[b] * t[i][j]).sum();
            cost[j] - z > EPS
        });
        let Some(c) = entering else { return true };
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[c] > EPS {
                let ratio = row[width] / row[c];
                match best {
                    Some((bi, br)) if ratio > br + EPS || (ratio > br - EPS && basis[i] > basis[bi]) => {}
                    _ => best = Some((i, ratio)),
                }
            }
        }
        let Some((r, _)) = best else { return false };
        pivot(t, basis, r, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint { coeffs: coeffs.to_vec(), relation: Relation::Le, rhs }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let out = maximize(&[3.0, 5.0], &[le(&[1.0, 0.0], 4.0), le(&[0.0, 2.0], 12.0), le(&[3.0, 2.0], 18.0)]);
        match out {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let c = [
            Constraint { coeffs: vec![1.0], relation: Relation::Ge, rhs: 2.0 },
            le(&[1.0], 1.0),
        ];
        assert_eq!(maximize(&[1.0], &c), LpOutcome::Infeasible);
        let c = [Constraint { coeffs: vec![1.0, -1.0], relation: Relation::Eq, rhs: 0.0 }];
        assert_eq!(maximize(&[1.0, 0.0], &c), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_rows() {
        // x - y <= -1 (i.e. y >= x + 1), max x with y <= 3
        let out = maximize(&[1.0, 0.0], &[le(&[1.0, -1.0], -1.0), le(&[0.0, 1.0], 3.0)]);
        assert!(matches!(out, LpOutcome::Optimal { value, .. } if (value - 2.0).abs() < 1e-9));
    }
}

//! Brute-force LP oracle: enumerate every basic solution of a small LP with
//! finite bounds and keep the best feasible one.

#![allow(dead_code)]

use stormgrid_lp::{LpProblem, Sense};

pub enum OracleResult {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
}

/// Solve the square system `a x = b` with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                let (top, bottom) = a.split_at_mut(i);
                for (aij, akj) in bottom[0][k..n].iter_mut().zip(&top[k][k..n]) {
                    *aij -= f * akj;
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

pub fn feasible(lp: &LpProblem, x: &[f64], tol: f64) -> bool {
    for ((&xj, &lo), &hi) in x.iter().zip(lp.lower()).zip(lp.upper()) {
        if xj < lo - tol || xj > hi + tol {
            return false;
        }
    }
    lp.rows().iter().zip(lp.row_activities(x)).all(|(r, act)| match r.sense {
        Sense::Le => act <= r.rhs + tol,
        Sense::Ge => act >= r.rhs - tol,
        Sense::Eq => (act - r.rhs).abs() <= tol,
    })
}

/// Requires finite bounds on every variable.
pub fn vertex_enumerate(lp: &LpProblem) -> OracleResult {
    let n = lp.num_vars();
    // Candidate active hyperplanes: rows, then lower bounds, then upper bounds.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in lp.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] = v;
        }
        planes.push((a, r.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a.clone(), lp.lower()[j]));
        planes.push((a, lp.upper()[j]));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if feasible(lp, &x, 1e-9) {
                let obj = lp.evaluate(&x);
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((objective, x)) => OracleResult::Optimal { objective, x },
        None => OracleResult::Infeasible,
    }
}

/// Random LP with at most `max_vars` variables and `max_rows` rows, all
/// variables boxed.
pub fn random_bounded_lp(rng: &mut impl rand::Rng, max_vars: usize, max_rows: usize) -> LpProblem {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(0..=max_rows);
    let mut lp = LpProblem::new();
    for j in 0..n {
        let lo = rng.random_range(-5..=0) as f64;
        let hi = lo + rng.random_range(0..=6) as f64;
        let c = rng.random_range(-5.0..5.0f64);
        lp.add_var(format!("x{j}"), lo, hi, (c * 4.0).round() / 4.0);
    }
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                coeffs.push((j, rng.random_range(-4..=4) as f64));
            }
        }
        let sense = match rng.random_range(0..6) {
            0 => Sense::Eq,
            1 | 2 => Sense::Ge,
            _ => Sense::Le,
        };
        let rhs = rng.random_range(-6..=8) as f64;
        lp.add_row(format!("r{i}"), coeffs, sense, rhs);
    }
    lp
}

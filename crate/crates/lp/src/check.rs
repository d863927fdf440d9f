use crate::{LpError, LpProblem, LpSolution, Sense};

/// Residuals of a candidate solution, computed from the problem data alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionReport {
    /// Largest violation of any row, in row units.
    pub max_row_residual: f64,
    /// Largest distance of any variable outside its bounds.
    pub max_bound_violation: f64,
    pub primal_objective: f64,
    /// Dual objective implied by `solution.duals`, when the duals bound it.
    pub dual_objective: Option<f64>,
    pub duality_gap: Option<f64>,
}

/// Reduced costs below this magnitude are treated as zero when forming the
/// dual objective.
const DUAL_ZERO: f64 = 1e-9;

pub fn check_solution(problem: &LpProblem, solution: &LpSolution) -> Result<SolutionReport, LpError> {
    let n = problem.num_vars();
    if solution.x.len() != n {
        return Err(LpError::DimensionMismatch {
            expected: n,
            got: solution.x.len(),
        });
    }
    let x = &solution.x;
    let mut report = SolutionReport {
        primal_objective: problem.evaluate(x),
        ..Default::default()
    };

    for (row, act) in problem.rows().iter().zip(problem.row_activities(x)) {
        let viol = match row.sense {
            Sense::Le => (act - row.rhs).max(0.0),
            Sense::Ge => (row.rhs - act).max(0.0),
            Sense::Eq => (act - row.rhs).abs(),
        };
        report.max_row_residual = report.max_row_residual.max(viol);
    }
    for ((&xj, &lo), &hi) in x.iter().zip(problem.lower()).zip(problem.upper()) {
        let v = (lo - xj).max(xj - hi).max(0.0);
        report.max_bound_violation = report.max_bound_violation.max(v);
    }

    if solution.duals.len() == problem.num_rows() {
        report.dual_objective = dual_objective(problem, &solution.duals);
        report.duality_gap = report
            .dual_objective
            .map(|d| (report.primal_objective - d).abs());
    }
    Ok(report)
}

/// `bᵀy + Σ_j min over the box of (c_j − a_jᵀy) x_j`, or `None` when a
/// reduced cost points at an infinite bound or a row dual has the wrong sign.
fn dual_objective(problem: &LpProblem, y: &[f64]) -> Option<f64> {
    let mut d: Vec<f64> = problem.objective().to_vec();
    let mut obj = problem.objective_offset();
    for (row, &yi) in problem.rows().iter().zip(y) {
        let sign_ok = match row.sense {
            Sense::Le => yi <= DUAL_ZERO,
            Sense::Ge => yi >= -DUAL_ZERO,
            Sense::Eq => true,
        };
        if !sign_ok {
            return None;
        }
        obj += row.rhs * yi;
        for &(j, a) in &row.coeffs {
            d[j] -= a * yi;
        }
    }
    for (j, &dj) in d.iter().enumerate() {
        if dj > DUAL_ZERO {
            let lo = problem.lower()[j];
            if lo.is_infinite() {
                return None;
            }
            obj += dj * lo;
        } else if dj < -DUAL_ZERO {
            let hi = problem.upper()[j];
            if hi.is_infinite() {
                return None;
            }
            obj += dj * hi;
        }
    }
    Some(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{solve, LpStatus, SolveOptions};

    fn small() -> LpProblem {
        let mut lp = LpProblem::new();
        let x = lp.add_var("x", 0.0, 4.0, -3.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, -2.0);
        lp.add_row("a", vec![(x, 1.0), (y, 1.0)], Sense::Le, 5.0);
        lp.add_row("b", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -1.0);
        lp
    }

    #[test]
    fn optimal_solution_has_tiny_residuals_and_gap() {
        let lp = small();
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let rep = check_solution(&lp, &sol).unwrap();
        assert!(rep.max_row_residual <= 1e-7);
        assert!(rep.max_bound_violation <= 1e-7);
        assert!(rep.duality_gap.unwrap() <= 1e-7);
    }

    #[test]
    fn infeasible_point_reports_positive_residual() {
        let lp = small();
        let sol = LpSolution {
            status: LpStatus::Optimal,
            x: vec![5.0, 3.0],
            objective: 0.0,
            duals: vec![],
            iterations: 0,
        };
        let rep = check_solution(&lp, &sol).unwrap();
        assert!((rep.max_row_residual - 3.0).abs() < 1e-12);
        assert!((rep.max_bound_violation - 1.0).abs() < 1e-12);
        assert_eq!(rep.duality_gap, None);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let lp = small();
        let sol = LpSolution {
            status: LpStatus::Optimal,
            x: vec![1.0],
            objective: 0.0,
            duals: vec![],
            iterations: 0,
        };
        assert!(matches!(
            check_solution(&lp, &sol),
            Err(LpError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn empty_problem_gives_empty_report() {
        let lp = LpProblem::new();
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        let rep = check_solution(&lp, &sol).unwrap();
        assert_eq!(rep.max_row_residual, 0.0);
        assert_eq!(rep.max_bound_violation, 0.0);
        assert_eq!(rep.primal_objective, 0.0);
    }
}

use crate::LpError;

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> char {
        match self {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        }
    }
}

/// One sparse row `coeffs · x (sense) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP over bounded variables.
///
/// Bounds may be infinite. Coefficients of a row are kept sorted by column
/// with duplicates summed, so two problems built from the same calls are
/// identical value-for-value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_names: Vec<String>,
    rows: Vec<Constraint>,
    objective_offset: f64,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        mut coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, v) in coeffs {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.rows.push(Constraint {
            name: name.into(),
            coeffs: merged,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn var_name(&self, var: usize) -> &str {
        &self.var_names[var]
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Objective value of `x`, offset included.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Left-hand side of every row at `x`.
    pub fn row_activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(LpError::InvalidProblem(format!(
                    "variable {} has bounds [{lo}, {hi}]",
                    self.var_names[j]
                )));
            }
            if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::InvalidProblem(format!(
                    "variable {} has an empty domain",
                    self.var_names[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::InvalidProblem(format!(
                    "variable {} has non-finite cost",
                    self.var_names[j]
                )));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(LpError::InvalidProblem(format!(
                    "row {} has non-finite rhs",
                    row.name
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::InvalidProblem(format!(
                        "row {} references column {j} of {n}",
                        row.name
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidProblem(format!(
                        "row {} has a non-finite coefficient",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }
}

//! Bounded-variable revised primal simplex.
//!
//! Every row `a·x (sense) b` gets a logical `r = a·x` whose bounds carry the
//! sense, so the working system is `A x − r = 0`. Structural variables start
//! nonbasic at a bound (or at zero when zero lies strictly inside their
//! range), logicals start basic. Rows that start out of range are covered by
//! a column singleton when one fits, otherwise by an artificial variable,
//! and phase one drives the artificials to zero.

use crate::lu::{BasisFactor, LuFactors};
use crate::{LpError, LpProblem, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Defaults to `20 * (rows + cols) + 1000` when `None`.
    pub max_iter: Option<usize>,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iter: None,
            refactor_every: 100,
            bland_after: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values; meaningful when `status` is `Optimal` or
    /// `IterationLimit`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with reduced costs `c − Aᵀy`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic at zero with zero strictly inside the bounds (free variables).
    Zero,
    /// Fixed variables never enter the basis.
    Fixed,
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const MAX_PIVOT_SPREAD: f64 = 1e14;
const DEVEX_RESET: f64 = 1e6;

/// Solve `problem` to optimality or report why not.
pub fn solve(problem: &LpProblem, options: &SolveOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let mut s = Simplex::new(problem, options);
    s.run()
}

struct Simplex<'a> {
    problem: &'a LpProblem,
    opts: &'a SolveOptions,
    m: usize,
    n: usize,
    // Column storage for structurals, logicals and artificials.
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    // Row-wise copy of the same columns, built once artificials exist.
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    value: Vec<f64>,
    /// Reduced costs, kept current by pivot-row updates between
    /// refactorizations.
    d: Vec<f64>,
    /// Devex reference weights for pricing.
    weight: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    factor: BasisFactor,
    n_art: usize,
    iterations: usize,
    max_iter: usize,
    // Scratch.
    rhs: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
    cb: Vec<f64>,
    nz: Vec<usize>,
    cand: Vec<usize>,
    in_cand: Vec<bool>,
    basis_ptr: Vec<usize>,
    basis_idx: Vec<usize>,
    basis_val: Vec<f64>,
    rho: Vec<f64>,
    arow: Vec<f64>,
    in_arow: Vec<bool>,
    touched: Vec<usize>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem, opts: &'a SolveOptions) -> Self {
        let m = problem.num_rows();
        let n = problem.num_vars();

        // Structural columns from the row-wise problem.
        let mut counts = vec![0usize; n];
        for row in problem.rows() {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + 2 * m + 1);
        col_start.push(0);
        for j in 0..n {
            col_start.push(col_start[j] + counts[j]);
        }
        let nnz = col_start[n];
        let mut col_idx = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start[..n].to_vec();
        for (i, row) in problem.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_idx[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        // Logicals: −e_i.
        for i in 0..m {
            col_idx.push(i);
            col_val.push(-1.0);
            col_start.push(col_idx.len());
        }

        let mut lower = problem.lower().to_vec();
        let mut upper = problem.upper().to_vec();
        for row in problem.rows() {
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }

        let max_iter = opts.max_iter.unwrap_or(20 * (m + n) + 1000);
        Simplex {
            problem,
            opts,
            m,
            n,
            col_start,
            col_idx,
            col_val,
            row_start: Vec::new(),
            row_idx: Vec::new(),
            row_val: Vec::new(),
            lower,
            upper,
            cost: Vec::new(),
            value: Vec::new(),
            d: Vec::new(),
            weight: Vec::new(),
            state: Vec::new(),
            basis: Vec::new(),
            factor: BasisFactor::default(),
            n_art: 0,
            iterations: 0,
            max_iter,
            rhs: vec![0.0; m],
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            cb: vec![0.0; m],
            nz: Vec::with_capacity(m),
            cand: Vec::new(),
            in_cand: Vec::new(),
            basis_ptr: Vec::new(),
            basis_idx: Vec::new(),
            basis_val: Vec::new(),
            rho: vec![0.0; m],
            arow: Vec::new(),
            in_arow: Vec::new(),
            touched: Vec::new(),
        }
    }

    fn num_cols(&self) -> usize {
        self.col_start.len() - 1
    }

    fn nonbasic_state(lo: f64, hi: f64) -> (VarState, f64) {
        if lo == hi {
            (VarState::Fixed, lo)
        } else if lo > 0.0 {
            (VarState::Lower, lo)
        } else if hi < 0.0 {
            (VarState::Upper, hi)
        } else if lo == 0.0 {
            (VarState::Lower, 0.0)
        } else if hi == 0.0 {
            (VarState::Upper, 0.0)
        } else {
            (VarState::Zero, 0.0)
        }
    }

    fn initialize(&mut self) {
        let (m, n) = (self.m, self.n);
        self.value = vec![0.0; n + m];
        self.state = vec![VarState::Lower; n + m];
        for j in 0..n {
            let (st, v) = Self::nonbasic_state(self.lower[j], self.upper[j]);
            self.state[j] = st;
            self.value[j] = v;
        }
        let activity = self.problem.row_activities(&self.value[..n]);
        self.basis = (n..n + m).collect();

        // Column singletons usable as crash basics, keyed by row.
        let mut singleton_for_row: Vec<Option<usize>> = vec![None; m];
        for j in 0..n {
            if self.col_start[j + 1] - self.col_start[j] == 1 && self.state[j] != VarState::Fixed {
                let i = self.col_idx[self.col_start[j]];
                if singleton_for_row[i].is_none() {
                    singleton_for_row[i] = Some(j);
                }
            }
        }

        let mut artificials: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            let r = n + i;
            let act = activity[i];
            self.value[r] = act;
            self.state[r] = VarState::Basic(i);
            let target = if act < self.lower[r] {
                self.lower[r]
            } else if act > self.upper[r] {
                self.upper[r]
            } else {
                continue;
            };
            let rstate = if self.lower[r] == self.upper[r] {
                VarState::Fixed
            } else if target == self.lower[r] {
                VarState::Lower
            } else {
                VarState::Upper
            };

            if let Some(j) = singleton_for_row[i] {
                let a = self.col_val[self.col_start[j]];
                let xj = self.value[j] + (target - act) / a;
                if xj >= self.lower[j] && xj <= self.upper[j] {
                    self.value[j] = xj;
                    self.state[j] = VarState::Basic(i);
                    self.basis[i] = j;
                    self.value[r] = target;
                    self.state[r] = rstate;
                    continue;
                }
            }
            // a·x − r + σ·art = 0 with art ≥ 0.
            let sigma = if target > act { 1.0 } else { -1.0 };
            artificials.push((i, sigma));
            self.value[r] = target;
            self.state[r] = rstate;
        }

        self.n_art = artificials.len();
        for &(i, sigma) in &artificials {
            let j = self.num_cols();
            self.col_idx.push(i);
            self.col_val.push(sigma);
            self.col_start.push(self.col_idx.len());
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            let act = activity[i];
            self.value.push((self.value[n + i] - act) / sigma);
            self.state.push(VarState::Basic(i));
            self.basis[i] = j;
        }
    }

    fn build_rows(&mut self) {
        let total = self.num_cols();
        let mut start = vec![0usize; self.m + 1];
        for &i in &self.col_idx {
            start[i + 1] += 1;
        }
        for i in 0..self.m {
            start[i + 1] += start[i];
        }
        let mut fill = start[..self.m].to_vec();
        let mut idx = vec![0; self.col_idx.len()];
        let mut val = vec![0.0; self.col_idx.len()];
        for j in 0..total {
            for e in self.col_start[j]..self.col_start[j + 1] {
                let i = self.col_idx[e];
                idx[fill[i]] = j;
                val[fill[i]] = self.col_val[e];
                fill[i] += 1;
            }
        }
        self.row_start = start;
        self.row_idx = idx;
        self.row_val = val;
        self.arow = vec![0.0; total];
        self.in_arow = vec![false; total];
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        self.initialize();
        self.build_rows();
        self.refactor()?;
        let total = self.num_cols();

        if self.n_art > 0 {
            self.cost = vec![0.0; total];
            for c in &mut self.cost[self.n + self.m..] {
                *c = 1.0;
            }
            self.weight = vec![1.0; total];
            self.recompute_reduced_costs();
            match self.iterate()? {
                PhaseEnd::IterationLimit => return Ok(self.solution(LpStatus::IterationLimit)),
                PhaseEnd::Unbounded => {
                    return Err(LpError::NumericalInstability {
                        iteration: self.iterations,
                        detail: "phase one reported an unbounded ray".into(),
                    })
                }
                PhaseEnd::Optimal => {}
            }
            let worst = (self.n + self.m..total)
                .map(|j| self.value[j].abs())
                .fold(0.0, f64::max);
            if worst > self.opts.feas_tol {
                log::debug!("phase one ended with artificial level {worst:.3e}");
                return Ok(self.solution(LpStatus::Infeasible));
            }
            for j in self.n + self.m..total {
                self.upper[j] = 0.0;
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.state[j] = VarState::Fixed;
                    self.value[j] = 0.0;
                }
            }
        }

        self.cost = vec![0.0; total];
        self.cost[..self.n].copy_from_slice(self.problem.objective());
        self.weight = vec![1.0; total];
        self.recompute_reduced_costs();
        let status = match self.iterate()? {
            PhaseEnd::Optimal => LpStatus::Optimal,
            PhaseEnd::Unbounded => LpStatus::Unbounded,
            PhaseEnd::IterationLimit => LpStatus::IterationLimit,
        };
        Ok(self.solution(status))
    }

    fn solution(&mut self, status: LpStatus) -> LpSolution {
        let x: Vec<f64> = self.value[..self.n].to_vec();
        let objective = self.problem.evaluate(&x);
        let duals = if status == LpStatus::Optimal {
            self.compute_duals();
            self.y.clone()
        } else {
            Vec::new()
        };
        LpSolution {
            status,
            x,
            objective,
            duals,
            iterations: self.iterations,
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        loop {
            self.basis_ptr.clear();
            self.basis_idx.clear();
            self.basis_val.clear();
            self.basis_ptr.push(0);
            for &j in &self.basis {
                let (a, b) = (self.col_start[j], self.col_start[j + 1]);
                self.basis_idx.extend_from_slice(&self.col_idx[a..b]);
                self.basis_val.extend_from_slice(&self.col_val[a..b]);
                self.basis_ptr.push(self.basis_idx.len());
            }
            match LuFactors::factorize(self.m, &self.basis_ptr, &self.basis_idx, &self.basis_val) {
                Ok(lu) => {
                    let spread = lu.pivot_spread();
                    if spread > MAX_PIVOT_SPREAD {
                        return Err(LpError::NumericalInstability {
                            iteration: self.iterations,
                            detail: format!("basis pivot spread {spread:.3e}"),
                        });
                    }
                    self.factor = BasisFactor::new(lu);
                    break;
                }
                Err(singular) => {
                    log::warn!(
                        "singular basis at iteration {}: replacing {} columns with logicals",
                        self.iterations,
                        singular.cols.len()
                    );
                    for (&pos, &row) in singular.cols.iter().zip(&singular.rows) {
                        let out = self.basis[pos];
                        let (st, v) = self.nearest_bound(out);
                        self.state[out] = st;
                        self.value[out] = v;
                        let logical = self.n + row;
                        self.basis[pos] = logical;
                        self.state[logical] = VarState::Basic(pos);
                    }
                }
            }
        }
        self.recompute_basics();
        if !self.cost.is_empty() {
            self.recompute_reduced_costs();
        }
        Ok(())
    }

    fn nearest_bound(&self, j: usize) -> (VarState, f64) {
        let (lo, hi, v) = (self.lower[j], self.upper[j], self.value[j]);
        if lo == hi {
            (VarState::Fixed, lo)
        } else if lo.is_finite() && (hi.is_infinite() || v - lo <= hi - v) {
            (VarState::Lower, lo)
        } else if hi.is_finite() {
            (VarState::Upper, hi)
        } else {
            (VarState::Zero, 0.0)
        }
    }

    /// x_B = −B⁻¹ N x_N.
    fn recompute_basics(&mut self) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.num_cols() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.value[j];
            if v != 0.0 {
                let (a, b) = (self.col_start[j], self.col_start[j + 1]);
                for e in a..b {
                    self.rhs[self.col_idx[e]] -= self.col_val[e] * v;
                }
            }
        }
        let mut out = vec![0.0; self.m];
        self.factor.ftran(&mut self.rhs, &mut out);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.value[j] = out[pos];
        }
    }

    fn compute_duals(&mut self) {
        for (pos, &j) in self.basis.iter().enumerate() {
            self.cb[pos] = self.cost[j];
        }
        self.factor.btran(&mut self.cb, &mut self.y);
    }

    fn recompute_reduced_costs(&mut self) {
        self.compute_duals();
        let total = self.num_cols();
        self.d.resize(total, 0.0);
        self.weight.resize(total, 1.0);
        for j in 0..total {
            self.d[j] = if matches!(self.state[j], VarState::Basic(_)) {
                0.0
            } else {
                self.reduced_cost(j)
            };
        }
        self.cand.clear();
        self.in_cand.clear();
        self.in_cand.resize(total, false);
        for j in 0..total {
            self.consider(j);
        }
    }

    /// Apply the dual step of a pivot on basis position `r` with entering
    /// column `q`: d ← d − (d_q / α_rq) · (row r of B⁻¹A).
    fn update_reduced_costs(&mut self, r: usize, q: usize, alpha_r: f64) {
        self.cb.iter_mut().for_each(|v| *v = 0.0);
        self.cb[r] = 1.0;
        self.factor.btran(&mut self.cb, &mut self.rho);
        for i in 0..self.m {
            let ri = self.rho[i];
            if ri == 0.0 {
                continue;
            }
            for e in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_idx[e];
                if !self.in_arow[j] {
                    self.in_arow[j] = true;
                    self.touched.push(j);
                }
                self.arow[j] += ri * self.row_val[e];
            }
        }
        let theta_d = self.d[q] / alpha_r;
        let wq = self.weight[q];
        for &j in &self.touched {
            if !matches!(self.state[j], VarState::Basic(_)) {
                let a = self.arow[j];
                self.d[j] -= theta_d * a;
                let ratio = a / alpha_r;
                self.weight[j] = self.weight[j].max(ratio * ratio * wq);
            }
            self.arow[j] = 0.0;
            self.in_arow[j] = false;
        }
        let touched = std::mem::take(&mut self.touched);
        for &j in &touched {
            self.consider(j);
        }
        self.touched = touched;
        self.touched.clear();
        let out = self.basis[r];
        self.d[out] = -theta_d;
        self.weight[out] = (wq / (alpha_r * alpha_r)).max(1.0);
        self.d[q] = 0.0;
        if self.weight[out] > DEVEX_RESET {
            self.weight.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let (a, b) = (self.col_start[j], self.col_start[j + 1]);
        let mut d = self.cost[j];
        for e in a..b {
            d -= self.y[self.col_idx[e]] * self.col_val[e];
        }
        d
    }

    /// Direction in which column `j` improves the objective, if any.
    fn improving_direction(&self, j: usize) -> Option<f64> {
        let tol = self.opts.opt_tol;
        let (up, down) = match self.state[j] {
            VarState::Basic(_) | VarState::Fixed => return None,
            VarState::Lower => (true, false),
            VarState::Upper => (false, true),
            VarState::Zero => (true, true),
        };
        let d = self.d[j];
        if up && d < -tol {
            Some(1.0)
        } else if down && d > tol {
            Some(-1.0)
        } else {
            None
        }
    }

    /// Add `j` to the pricing candidates if it is attractive.
    fn consider(&mut self, j: usize) {
        if !self.in_cand[j] && self.improving_direction(j).is_some() {
            self.in_cand[j] = true;
            self.cand.push(j);
        }
    }

    /// Entering column and direction (+1 increase, −1 decrease). Reduced
    /// costs only change through `update_reduced_costs` and refactoring,
    /// so every attractive column is already in the candidate list; stale
    /// entries are dropped here.
    fn price(&mut self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        let mut k = 0;
        while k < self.cand.len() {
            let j = self.cand[k];
            let Some(dir) = self.improving_direction(j) else {
                self.in_cand[j] = false;
                self.cand.swap_remove(k);
                continue;
            };
            k += 1;
            let score = if bland {
                // Smallest index wins.
                -(j as f64)
            } else {
                self.d[j] * self.d[j] / self.weight[j]
            };
            if best.is_none() || score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<PhaseEnd, LpError> {
        let mut degenerate_streak = 0usize;
        let mut confirmed_optimal = false;
        loop {
            if self.iterations >= self.max_iter {
                return Ok(PhaseEnd::IterationLimit);
            }
            if self.factor.num_updates() >= self.opts.refactor_every {
                self.refactor()?;
            }
            if self.iterations > 0 && self.iterations.is_multiple_of(1000) {
                log::debug!("simplex iteration {}", self.iterations);
            }
            let bland = degenerate_streak >= self.opts.bland_after;
            let Some((q, dir)) = self.price(bland) else {
                if confirmed_optimal || self.factor.num_updates() == 0 {
                    return Ok(PhaseEnd::Optimal);
                }
                // Confirm on a fresh factorization before stopping.
                self.refactor()?;
                confirmed_optimal = true;
                continue;
            };
            confirmed_optimal = false;

            // FTRAN of the entering column.
            self.rhs.iter_mut().for_each(|v| *v = 0.0);
            {
                let (a, b) = (self.col_start[q], self.col_start[q + 1]);
                for e in a..b {
                    self.rhs[self.col_idx[e]] = self.col_val[e];
                }
            }
            let mut alpha = std::mem::take(&mut self.alpha);
            self.factor.ftran(&mut self.rhs, &mut alpha);
            self.nz.clear();
            for (pos, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.nz.push(pos);
                }
            }

            let step = self.ratio_test(q, dir, &alpha, bland);
            let Some((theta, leave)) = step else {
                self.alpha = alpha;
                return Ok(PhaseEnd::Unbounded);
            };
            self.iterations += 1;
            if theta <= DEGENERATE_STEP {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            // Move along the edge.
            self.value[q] += dir * theta;
            if theta != 0.0 {
                for &pos in &self.nz {
                    let j = self.basis[pos];
                    self.value[j] -= dir * alpha[pos] * theta;
                }
            }

            match leave {
                None => {
                    // Bound flip.
                    self.state[q] = if dir > 0.0 {
                        self.value[q] = self.upper[q];
                        VarState::Upper
                    } else {
                        self.value[q] = self.lower[q];
                        VarState::Lower
                    };
                }
                Some((pos, to_upper)) => {
                    let small_pivot = alpha[pos].abs() < 1e-7;
                    if !small_pivot {
                        self.update_reduced_costs(pos, q, alpha[pos]);
                    }
                    let out = self.basis[pos];
                    if self.lower[out] == self.upper[out] {
                        self.value[out] = self.lower[out];
                        self.state[out] = VarState::Fixed;
                    } else if to_upper {
                        self.value[out] = self.upper[out];
                        self.state[out] = VarState::Upper;
                    } else {
                        self.value[out] = self.lower[out];
                        self.state[out] = VarState::Lower;
                    }
                    self.basis[pos] = q;
                    self.state[q] = VarState::Basic(pos);
                    self.consider(out);
                    self.factor.update(pos, &alpha, &self.nz);
                    if small_pivot {
                        log::debug!("small pivot {:.3e}; refactoring", alpha[pos]);
                        self.alpha = alpha;
                        self.refactor()?;
                        continue;
                    }
                }
            }
            self.alpha = alpha;
        }
    }

    /// Harris two-pass ratio test. Returns the step length and the leaving
    /// basis position (with the bound it leaves at), or `None` for the
    /// leaving position when the entering variable flips to its other bound.
    #[allow(clippy::type_complexity)]
    fn ratio_test(
        &self,
        q: usize,
        dir: f64,
        alpha: &[f64],
        bland: bool,
    ) -> Option<(f64, Option<(usize, bool)>)> {
        let tol = self.opts.feas_tol;
        let flip = if dir > 0.0 {
            self.upper[q] - self.value[q]
        } else {
            self.value[q] - self.lower[q]
        };

        // Pass one: largest step keeping every basic within relaxed bounds.
        let mut theta_max = f64::INFINITY;
        for &pos in &self.nz {
            let a = alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[pos];
            let delta = -dir * a;
            let r = if delta < 0.0 {
                (self.value[j] - self.lower[j] + tol) / -delta
            } else {
                (self.upper[j] + tol - self.value[j]) / delta
            };
            if r < theta_max {
                theta_max = r;
            }
        }

        if flip <= theta_max {
            if flip.is_infinite() {
                return None;
            }
            return Some((flip, None));
        }

        // Pass two: among the blocking candidates pick the largest pivot.
        let mut chosen: Option<(usize, bool, f64, f64)> = None;
        for &pos in &self.nz {
            let a = alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[pos];
            let delta = -dir * a;
            let (r, to_upper) = if delta < 0.0 {
                ((self.value[j] - self.lower[j]) / -delta, false)
            } else {
                ((self.upper[j] - self.value[j]) / delta, true)
            };
            if r > theta_max {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cpos, _, cr, ca)) => {
                    if bland {
                        r < cr || (r == cr && self.basis[pos] < self.basis[cpos])
                    } else {
                        a.abs() > ca
                    }
                }
            };
            if better {
                chosen = Some((pos, to_upper, r, a.abs()));
            }
        }
        let (pos, to_upper, r, _) = chosen?;
        Some((r.max(0.0), Some((pos, to_upper))))
    }
}

//! Sparse LU factorization of simplex bases.
//!
//! Right-looking Gaussian elimination with Markowitz pivot selection and
//! threshold partial pivoting. Singletons are taken first, which makes the
//! slack-heavy bases of network LPs nearly free to factor. Between
//! refactorizations the basis inverse is updated in product form: one eta
//! column per pivot.

const DROP_TOL: f64 = 1e-14;
const PIVOT_ABS_TOL: f64 = 1e-11;
const PIVOT_REL_TOL: f64 = 0.01;
const SEARCH_LIMIT: usize = 4;

/// Columns of the basis that could not be pivoted, paired with rows left
/// without a pivot. Callers repair the basis with the logicals of `rows`.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Intrusive doubly-linked lists of items bucketed by an integer count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    linked: Vec<bool>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(n_items: usize, max_count: usize) -> Self {
        Self {
            head: vec![NIL; max_count + 2],
            next: vec![NIL; n_items],
            prev: vec![NIL; n_items],
            count: vec![0; n_items],
            linked: vec![false; n_items],
        }
    }

    fn insert(&mut self, item: usize, count: usize) {
        if count >= self.head.len() {
            self.head.resize(count + 1, NIL);
        }
        self.count[item] = count;
        self.prev[item] = NIL;
        self.next[item] = self.head[count];
        if self.head[count] != NIL {
            self.prev[self.head[count]] = item;
        }
        self.head[count] = item;
        self.linked[item] = true;
    }

    fn remove(&mut self, item: usize) {
        if !self.linked[item] {
            return;
        }
        let (p, n) = (self.prev[item], self.next[item]);
        if p != NIL {
            self.next[p] = n;
        } else {
            self.head[self.count[item]] = n;
        }
        if n != NIL {
            self.prev[n] = p;
        }
        self.linked[item] = false;
    }

    fn set(&mut self, item: usize, count: usize) {
        self.remove(item);
        self.insert(item, count);
    }

    fn first(&self, count: usize) -> Option<usize> {
        self.head.get(count).copied().filter(|&h| h != NIL)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Transposed copies so both solves can skip zero components: for step k,
    // the earlier steps whose U row holds column `piv_col[k]` and the earlier
    // steps whose L column holds row `piv_row[k]`.
    ut_start: Vec<usize>,
    ut_step: Vec<usize>,
    ut_val: Vec<f64>,
    lt_start: Vec<usize>,
    lt_step: Vec<usize>,
    lt_val: Vec<f64>,
    // Steps with a nonempty L column, U row, transposed U row and
    // transposed L column. The solves only loop over these; every other
    // step is a plain division.
    l_steps: Vec<usize>,
    u_steps: Vec<usize>,
    ut_steps: Vec<usize>,
    lt_steps: Vec<usize>,
}

impl LuFactors {
    /// Factor the square matrix held column-wise: column `j` has rows
    /// `row_idx[col_ptr[j]..col_ptr[j + 1]]` with values from `vals`.
    pub fn factorize(
        m: usize,
        col_ptr: &[usize],
        row_idx: &[usize],
        vals: &[f64],
    ) -> Result<Self, Singular> {
        debug_assert_eq!(col_ptr.len(), m + 1);
        let mut f = LuFactors {
            m,
            u_start: vec![0],
            l_start: vec![0],
            ..Default::default()
        };
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        peel_triangular(m, col_ptr, row_idx, vals, &mut f, &mut row_done, &mut col_done);

        // What is left is the nucleus; eliminate it with Markowitz pivoting.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for j in (0..m).filter(|&j| !col_done[j]) {
            for e in col_ptr[j]..col_ptr[j + 1] {
                let (i, v) = (row_idx[e], vals[e]);
                if !row_done[i] && v.abs() > DROP_TOL {
                    rows[i].push((j, v));
                    col_rows[j].push(i);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut col_b = Buckets::new(m, m);
        let mut row_b = Buckets::new(m, m);
        for j in (0..m).filter(|&j| !col_done[j]) {
            col_b.insert(j, col_count[j]);
        }
        for i in (0..m).filter(|&i| !row_done[i]) {
            row_b.insert(i, rows[i].len());
        }
        let mut pos = vec![usize::MAX; m];

        while f.piv_row.len() < m {
            let Some((p, c)) = select_pivot(&rows, &mut col_rows, &col_count, &col_b, &row_b, &row_done, m)
            else {
                break;
            };
            let piv = entry(&rows[p], c).expect("pivot entry exists");

            // U row.
            for &(j, v) in &rows[p] {
                if j != c {
                    f.u_idx.push(j);
                    f.u_val.push(v);
                }
            }
            f.u_start.push(f.u_idx.len());
            f.piv_row.push(p);
            f.piv_col.push(c);
            f.piv_val.push(piv);

            row_done[p] = true;
            col_done[c] = true;
            row_b.remove(p);
            col_b.remove(c);
            let pivot_row = std::mem::take(&mut rows[p]);
            for &(j, _) in &pivot_row {
                if j != c {
                    col_count[j] -= 1;
                    col_b.set(j, col_count[j]);
                }
            }

            // Eliminate column c from the remaining active rows.
            let targets = std::mem::take(&mut col_rows[c]);
            for &i in &targets {
                if row_done[i] {
                    continue;
                }
                let Some(k) = rows[i].iter().position(|&(j, _)| j == c) else {
                    continue;
                };
                let (_, a_ic) = rows[i].swap_remove(k);

                let mult = a_ic / piv;
                f.l_idx.push(i);
                f.l_val.push(mult);
                if pivot_row.len() > 1 {
                    for (k, &(j, _)) in rows[i].iter().enumerate() {
                        pos[j] = k;
                    }
                    for &(j, v) in &pivot_row {
                        if j == c {
                            continue;
                        }
                        if pos[j] != usize::MAX {
                            rows[i][pos[j]].1 -= mult * v;
                        } else {
                            rows[i].push((j, -mult * v));
                            col_rows[j].push(i);
                            col_count[j] += 1;
                            col_b.set(j, col_count[j]);
                        }
                    }
                    for &(j, _) in rows[i].iter() {
                        pos[j] = usize::MAX;
                    }
                    let mut k = 0;
                    while k < rows[i].len() {
                        if rows[i][k].1.abs() <= DROP_TOL {
                            let (j, _) = rows[i].swap_remove(k);
                            col_count[j] -= 1;
                            col_b.set(j, col_count[j]);
                        } else {
                            k += 1;
                        }
                    }
                }
                row_b.set(i, rows[i].len());
            }
            f.l_start.push(f.l_idx.len());
        }

        if f.piv_row.len() == m {
            f.build_transposes();
            Ok(f)
        } else {
            let singular = Singular {
                cols: (0..m).filter(|&j| !col_done[j]).collect(),
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
            };
            Err(singular)
        }
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_spread(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in &self.piv_val {
            lo = lo.min(v.abs());
            hi = hi.max(v.abs());
        }
        if self.piv_val.is_empty() {
            1.0
        } else {
            hi / lo
        }
    }

    /// Close the step whose U and L entries were just pushed.
    fn push_pivot(&mut self, row: usize, col: usize, piv: f64) {
        self.piv_row.push(row);
        self.piv_col.push(col);
        self.piv_val.push(piv);
        self.u_start.push(self.u_idx.len());
        self.l_start.push(self.l_idx.len());
    }

    fn build_transposes(&mut self) {
        let steps = self.piv_row.len();
        let mut step_of_col = vec![usize::MAX; self.m];
        let mut step_of_row = vec![usize::MAX; self.m];
        for k in 0..steps {
            step_of_col[self.piv_col[k]] = k;
            step_of_row[self.piv_row[k]] = k;
        }
        let (start, step, val) = transpose(steps, &self.u_start, &self.u_idx, &self.u_val, &step_of_col);
        self.ut_start = start;
        self.ut_step = step;
        self.ut_val = val;
        let (start, step, val) = transpose(steps, &self.l_start, &self.l_idx, &self.l_val, &step_of_row);
        self.lt_start = start;
        self.lt_step = step;
        self.lt_val = val;
        let nonempty = |start: &[usize]| (0..steps).filter(|&k| start[k + 1] > start[k]).collect::<Vec<_>>();
        self.l_steps = nonempty(&self.l_start);
        self.u_steps = nonempty(&self.u_start);
        self.ut_steps = nonempty(&self.ut_start);
        self.lt_steps = nonempty(&self.lt_start);
    }

    /// Solve `B x = b`; `b` is indexed by row and overwritten, the result is
    /// indexed by basis position.
    pub fn ftran(&self, b: &mut [f64], x: &mut [f64]) {
        for &k in &self.l_steps {
            let v = b[self.piv_row[k]];
            if v != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        for &k in self.ut_steps.iter().rev() {
            let s = b[self.piv_row[k]];
            if s != 0.0 {
                let xk = s / self.piv_val[k];
                for e in self.ut_start[k]..self.ut_start[k + 1] {
                    b[self.piv_row[self.ut_step[e]]] -= self.ut_val[e] * xk;
                }
            }
        }
        for k in 0..self.piv_row.len() {
            let s = b[self.piv_row[k]];
            x[self.piv_col[k]] = if s != 0.0 { s / self.piv_val[k] } else { 0.0 };
        }
    }

    /// Solve `Bᵀ y = c`; `c` is indexed by basis position and overwritten,
    /// the result is indexed by row.
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for &k in &self.u_steps {
            let w = c[self.piv_col[k]];
            if w != 0.0 {
                let w = w / self.piv_val[k];
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * w;
                }
            }
        }
        for k in 0..self.piv_row.len() {
            let w = c[self.piv_col[k]];
            y[self.piv_row[k]] = if w != 0.0 { w / self.piv_val[k] } else { 0.0 };
        }
        for &k in self.lt_steps.iter().rev() {
            let v = y[self.piv_row[k]];
            if v != 0.0 {
                for e in self.lt_start[k]..self.lt_start[k + 1] {
                    y[self.piv_row[self.lt_step[e]]] -= self.lt_val[e] * v;
                }
            }
        }
    }

}

/// Regroup per-step entries `(index, value)` by the step that pivots on
/// `index`, keeping the originating step.
fn transpose(
    steps: usize,
    start: &[usize],
    idx: &[usize],
    val: &[f64],
    step_of: &[usize],
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut counts = vec![0usize; steps + 1];
    for &i in idx {
        counts[step_of[i] + 1] += 1;
    }
    for k in 0..steps {
        counts[k + 1] += counts[k];
    }
    let mut fill = counts[..steps].to_vec();
    let mut t_step = vec![0; idx.len()];
    let mut t_val = vec![0.0; idx.len()];
    for k in 0..steps {
        for e in start[k]..start[k + 1] {
            let target = step_of[idx[e]];
            t_step[fill[target]] = k;
            t_val[fill[target]] = val[e];
            fill[target] += 1;
        }
    }
    (counts, t_step, t_val)
}

/// Pivot on column and row singletons of the active submatrix for as long
/// as there are any. Neither kind changes the values of the remaining
/// entries, so this runs on the input arrays without elimination.
fn peel_triangular(
    m: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    vals: &[f64],
    f: &mut LuFactors,
    row_done: &mut [bool],
    col_done: &mut [bool],
) {
    let nnz = col_ptr[m];
    let mut row_ptr = vec![0usize; m + 1];
    for &i in &row_idx[..nnz] {
        row_ptr[i + 1] += 1;
    }
    for i in 0..m {
        row_ptr[i + 1] += row_ptr[i];
    }
    let mut fill = row_ptr[..m].to_vec();
    let mut row_col = vec![0usize; nnz];
    let mut row_val = vec![0.0; nnz];
    for j in 0..m {
        for e in col_ptr[j]..col_ptr[j + 1] {
            let i = row_idx[e];
            row_col[fill[i]] = j;
            row_val[fill[i]] = vals[e];
            fill[i] += 1;
        }
    }
    let mut col_cnt: Vec<usize> = (0..m).map(|j| col_ptr[j + 1] - col_ptr[j]).collect();
    let mut row_cnt: Vec<usize> = (0..m).map(|i| row_ptr[i + 1] - row_ptr[i]).collect();
    let mut col_stack: Vec<usize> = (0..m).filter(|&j| col_cnt[j] == 1).collect();
    let mut row_stack: Vec<usize> = (0..m).filter(|&i| row_cnt[i] == 1).collect();

    loop {
        if let Some(c) = col_stack.pop() {
            if col_done[c] || col_cnt[c] != 1 {
                continue;
            }
            let Some(e) = (col_ptr[c]..col_ptr[c + 1]).find(|&e| !row_done[row_idx[e]]) else {
                continue;
            };
            let (p, piv) = (row_idx[e], vals[e]);
            if piv.abs() <= PIVOT_ABS_TOL {
                continue;
            }
            for e in row_ptr[p]..row_ptr[p + 1] {
                let j = row_col[e];
                if j == c || col_done[j] {
                    continue;
                }
                f.u_idx.push(j);
                f.u_val.push(row_val[e]);
                col_cnt[j] -= 1;
                if col_cnt[j] == 1 {
                    col_stack.push(j);
                }
            }
            row_done[p] = true;
            col_done[c] = true;
            f.push_pivot(p, c, piv);
            continue;
        }
        if let Some(p) = row_stack.pop() {
            if row_done[p] || row_cnt[p] != 1 {
                continue;
            }
            let Some(e) = (row_ptr[p]..row_ptr[p + 1]).find(|&e| !col_done[row_col[e]]) else {
                continue;
            };
            let (c, piv) = (row_col[e], row_val[e]);
            if piv.abs() <= PIVOT_ABS_TOL {
                continue;
            }
            for e in col_ptr[c]..col_ptr[c + 1] {
                let i = row_idx[e];
                if i == p || row_done[i] {
                    continue;
                }
                f.l_idx.push(i);
                f.l_val.push(vals[e] / piv);
                row_cnt[i] -= 1;
                if row_cnt[i] == 1 {
                    row_stack.push(i);
                }
            }
            row_done[p] = true;
            col_done[c] = true;
            f.push_pivot(p, c, piv);
            continue;
        }
        break;
    }
}

fn entry(row: &[(usize, f64)], col: usize) -> Option<f64> {
    row.iter().find(|&&(j, _)| j == col).map(|&(_, v)| v)
}

/// Largest magnitude in column `c` over the rows listed for it.
fn col_max(rows: &[Vec<(usize, f64)>], col_rows: &[usize], c: usize) -> f64 {
    col_rows
        .iter()
        .filter_map(|&i| entry(&rows[i], c))
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn select_pivot(
    rows: &[Vec<(usize, f64)>],
    col_rows: &mut [Vec<usize>],
    col_count: &[usize],
    col_b: &Buckets,
    row_b: &Buckets,
    row_done: &[bool],
    m: usize,
) -> Option<(usize, usize)> {
    // Column singletons: nothing below the pivot to eliminate, so no
    // growth and no threshold test.
    let mut probe = col_b.first(1);
    while let Some(c) = probe {
        col_rows[c].retain(|&i| !row_done[i]);
        for &i in &col_rows[c] {
            if row_done[i] {
                continue;
            }
            if let Some(v) = entry(&rows[i], c) {
                if v.abs() > PIVOT_ABS_TOL {
                    return Some((i, c));
                }
            }
        }
        probe = Some(col_b.next[c]).filter(|&x| x != NIL);
    }
    // Row singletons.
    let mut probe = row_b.first(1);
    while let Some(i) = probe {
        let (c, v) = rows[i][0];
        if v.abs() > PIVOT_ABS_TOL {
            return Some((i, c));
        }
        probe = Some(row_b.next[i]).filter(|&x| x != NIL);
    }

    let mut best: Option<(usize, usize)> = None;
    let mut best_cost = usize::MAX;
    let mut searched = 0;
    for k in 1..=m {
        if best.is_some() && best_cost <= (k - 1) * (k - 1) {
            return best;
        }
        // Columns with k entries.
        let mut probe = col_b.first(k);
        while let Some(c) = probe {
            col_rows[c].retain(|&i| !row_done[i]);
            let cmax = col_max(rows, &col_rows[c], c);
            for &i in &col_rows[c] {
                if let Some(v) = entry(&rows[i], c) {
                    if v.abs() > PIVOT_ABS_TOL && v.abs() >= PIVOT_REL_TOL * cmax {
                        let cost = (rows[i].len() - 1) * (col_count[c] - 1);
                        if cost < best_cost {
                            best_cost = cost;
                            best = Some((i, c));
                        }
                    }
                }
            }
            searched += 1;
            if best.is_some() && (searched >= SEARCH_LIMIT || best_cost <= (k - 1) * (k - 1)) {
                return best;
            }
            probe = Some(col_b.next[c]).filter(|&x| x != NIL);
        }
        // Rows with k entries.
        let mut probe = row_b.first(k);
        while let Some(i) = probe {
            for &(c, v) in &rows[i] {
                if v.abs() > PIVOT_ABS_TOL && v.abs() >= PIVOT_REL_TOL * col_max(rows, &col_rows[c], c) {
                    let cost = (rows[i].len() - 1) * (col_count[c] - 1);
                    if cost < best_cost {
                        best_cost = cost;
                        best = Some((i, c));
                    }
                }
            }
            searched += 1;
            if best.is_some() && (searched >= SEARCH_LIMIT || best_cost <= k * (k - 1)) {
                return best;
            }
            probe = Some(row_b.next[i]).filter(|&x| x != NIL);
        }
    }
    best
}

/// One product-form update: basis position `pos` replaced by a column whose
/// FTRAN image had `piv` at `pos` and `body` elsewhere.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    piv: f64,
    body: EtaBody,
}

/// Dense images are common once the basis couples many blocks; a full
/// vector then beats index/value pairs.
#[derive(Debug, Clone)]
enum EtaBody {
    Sparse(Vec<(usize, f64)>),
    /// Zero at `pos`.
    Dense(Vec<f64>),
}

const DENSE_ETA_FRACTION: f64 = 0.1;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// LU factors of a reference basis plus the eta file of later pivots.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub fn new(lu: LuFactors) -> Self {
        Self { lu, etas: Vec::new() }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// `rhs` indexed by row; returns the solution indexed by basis position
    /// in `out`. `rhs` is clobbered.
    pub fn ftran(&mut self, rhs: &mut [f64], out: &mut [f64]) {
        self.lu.ftran(rhs, out);
        for eta in &self.etas {
            let xp = out[eta.pos] / eta.piv;
            out[eta.pos] = xp;
            if xp == 0.0 {
                continue;
            }
            match &eta.body {
                EtaBody::Sparse(entries) => {
                    for &(i, a) in entries {
                        out[i] -= a * xp;
                    }
                }
                EtaBody::Dense(col) => {
                    for (o, &a) in out.iter_mut().zip(col) {
                        *o -= a * xp;
                    }
                    // The dense body is zero at `pos`, so `out[pos]` is intact.
                }
            }
        }
    }

    /// `rhs` indexed by basis position; returns the solution indexed by row
    /// in `out`. `rhs` is clobbered.
    pub fn btran(&mut self, rhs: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let s = match &eta.body {
                EtaBody::Sparse(entries) => {
                    let mut s = rhs[eta.pos];
                    for &(i, a) in entries {
                        s -= a * rhs[i];
                    }
                    s
                }
                EtaBody::Dense(col) => rhs[eta.pos] - dot(col, rhs),
            };
            rhs[eta.pos] = s / eta.piv;
        }
        self.lu.btran(rhs, out);
    }

    /// Record the replacement of basis position `pos`; `alpha` is the FTRAN
    /// image of the entering column with nonzeros at `nz`.
    pub fn update(&mut self, pos: usize, alpha: &[f64], nz: &[usize]) {
        let m = alpha.len();
        let body = if nz.len() as f64 > DENSE_ETA_FRACTION * m as f64 {
            let mut col = alpha.to_vec();
            col[pos] = 0.0;
            EtaBody::Dense(col)
        } else {
            EtaBody::Sparse(
                nz.iter()
                    .filter(|&&i| i != pos && alpha[i].abs() > DROP_TOL)
                    .map(|&i| (i, alpha[i]))
                    .collect(),
            )
        };
        self.etas.push(Eta {
            pos,
            piv: alpha[pos],
            body,
        });
    }
}

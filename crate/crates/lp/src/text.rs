//! Plain-text LP dump for diffing and replaying instances.
//!
//! ```text
//! LP v1
//! OFFSET <value>
//! COLUMNS <n>
//! <index> <name> <lower> <upper> <cost>
//! ROWS <m>
//! <index> <name> <L|E|G> <rhs> <nnz> <col>:<coef> ...
//! END
//! ```
//!
//! Numbers use 17 significant digits (`{:.16e}`), infinities are written
//! `inf` / `-inf`. Names must not contain whitespace; other characters are
//! kept verbatim. Columns and rows appear in index order.

use std::fmt::Write;

use crate::{LpError, LpProblem, Sense};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn name(s: &str) -> String {
    if s.is_empty() {
        "_".into()
    } else {
        s.replace(char::is_whitespace, "_")
    }
}

pub fn to_text(problem: &LpProblem) -> String {
    let mut out = String::new();
    writeln!(out, "LP v1").unwrap();
    writeln!(out, "OFFSET {}", num(problem.objective_offset())).unwrap();
    writeln!(out, "COLUMNS {}", problem.num_vars()).unwrap();
    for j in 0..problem.num_vars() {
        writeln!(
            out,
            "{j} {} {} {} {}",
            name(problem.var_name(j)),
            num(problem.lower()[j]),
            num(problem.upper()[j]),
            num(problem.objective()[j])
        )
        .unwrap();
    }
    writeln!(out, "ROWS {}", problem.num_rows()).unwrap();
    for (i, row) in problem.rows().iter().enumerate() {
        write!(
            out,
            "{i} {} {} {} {}",
            name(&row.name),
            row.sense.symbol(),
            num(row.rhs),
            row.coeffs.len()
        )
        .unwrap();
        for &(j, a) in &row.coeffs {
            write!(out, " {j}:{}", num(a)).unwrap();
        }
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

fn parse_num(tok: &str, line: usize) -> Result<f64, LpError> {
    match tok {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| LpError::Parse {
            line,
            detail: format!("bad number `{tok}`"),
        }),
    }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, LpError> {
    tok.parse().map_err(|_| LpError::Parse {
        line,
        detail: format!("bad integer `{tok}`"),
    })
}

pub fn from_text(text: &str) -> Result<LpProblem, LpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines.next().ok_or(LpError::Parse {
            line: 0,
            detail: format!("unexpected end of input, expected {what}"),
        })
    };
    let err = |line: usize, detail: &str| LpError::Parse {
        line,
        detail: detail.to_string(),
    };

    let (ln, header) = next("header")?;
    if header != "LP v1" {
        return Err(err(ln, "missing `LP v1` header"));
    }
    let mut lp = LpProblem::new();

    let (ln, l) = next("OFFSET")?;
    let off = l.strip_prefix("OFFSET ").ok_or_else(|| err(ln, "expected OFFSET"))?;
    lp.set_objective_offset(parse_num(off, ln)?);

    let (ln, l) = next("COLUMNS")?;
    let n = parse_usize(
        l.strip_prefix("COLUMNS ").ok_or_else(|| err(ln, "expected COLUMNS"))?,
        ln,
    )?;
    for j in 0..n {
        let (ln, l) = next("column")?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 5 || parse_usize(t[0], ln)? != j {
            return Err(err(ln, "malformed column line"));
        }
        lp.add_var(t[1], parse_num(t[2], ln)?, parse_num(t[3], ln)?, parse_num(t[4], ln)?);
    }

    let (ln, l) = next("ROWS")?;
    let m = parse_usize(
        l.strip_prefix("ROWS ").ok_or_else(|| err(ln, "expected ROWS"))?,
        ln,
    )?;
    for i in 0..m {
        let (ln, l) = next("row")?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 5 || parse_usize(t[0], ln)? != i {
            return Err(err(ln, "malformed row line"));
        }
        let sense = match t[2] {
            "L" => Sense::Le,
            "E" => Sense::Eq,
            "G" => Sense::Ge,
            other => return Err(err(ln, &format!("unknown sense `{other}`"))),
        };
        let rhs = parse_num(t[3], ln)?;
        let nnz = parse_usize(t[4], ln)?;
        if t.len() != 5 + nnz {
            return Err(err(ln, "coefficient count mismatch"));
        }
        let mut coeffs = Vec::with_capacity(nnz);
        for tok in &t[5..] {
            let (j, a) = tok.split_once(':').ok_or_else(|| err(ln, "expected col:coef"))?;
            coeffs.push((parse_usize(j, ln)?, parse_num(a, ln)?));
        }
        lp.add_row(t[1], coeffs, sense, rhs);
    }
    let (ln, l) = next("END")?;
    if l != "END" {
        return Err(err(ln, "expected END"));
    }
    Ok(lp)
}

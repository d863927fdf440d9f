//! Sparse linear programming with a bounded-variable revised simplex.
//!
//! ```
//! use stormgrid_lp::{solve, LpProblem, Sense, SolveOptions};
//!
//! let mut lp = LpProblem::new();
//! let x = lp.add_var("x", 0.0, 10.0, 1.0);
//! lp.add_row("floor", vec![(x, 1.0)], Sense::Ge, 3.0);
//! let sol = solve(&lp, &SolveOptions::default()).unwrap();
//! assert!((sol.objective - 3.0).abs() < 1e-9);
//! ```

mod check;
mod error;
mod lu;
mod problem;
mod simplex;
mod text;

pub use check::{check_solution, SolutionReport};
pub use error::LpError;
pub use problem::{Constraint, LpProblem, Sense};
pub use simplex::{solve, LpSolution, LpStatus, SolveOptions};
pub use text::{from_text, to_text};

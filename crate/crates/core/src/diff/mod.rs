//! Reverse-mode automatic differentiation over vector-valued nodes.
//!
//! A [`Tape`] records an append-only DAG of operations. Every node carries
//! its primal value (a vector; scalars are vectors of length one), and
//! [`Tape::gradient`] walks the DAG backwards from a scalar output.
//!
//! The primitive set is closed: it covers exactly what the portfolio losses
//! and the trainable allocators need. Binary elementwise operations
//! broadcast a length-one operand against a vector.
//!
//! ```
//! use folio_core::diff::Tape;
//!
//! let mut tape = Tape::new();
//! let w = tape.input(&[1.0, 2.0]);
//! let sq = tape.mul(w, w).unwrap();
//! let y = tape.sum(sq).unwrap();
//! let g = tape.gradient(y, &[w]).unwrap();
//! assert_eq!(g[0], vec![2.0, 4.0]);
//! ```

mod check;
mod tape;

pub use check::{compare_gradients, finite_difference_gradient, GradientComparison};
pub use tape::{Tape, Var};

//! Quantitative group testing laboratory.
//!
//! Items carry a hidden 0/1 defect indicator; each test pools a random subset
//! of items and reports the exact number of defectives it contains. This
//! crate bundles everything needed to study score-based recovery of the
//! defective set from such counts:
//!
//! - [`model`]: reproducible instance generation and the JSON wire format;
//! - [`exactla`]: exact linear algebra (prime-field and arbitrary-precision
//!   rational elimination) used for rank diagnostics and solving;
//! - [`select`]: score-based subset selection (threshold, iterative, and
//!   row-split variants);
//! - [`recover`]: defective-set recovery from a selected submatrix, plus a
//!   brute-force reference solver;
//! - [`bounds`]: closed-form probability bounds with an exact big-integer
//!   domination suite;
//! - [`harness`]: seeded experiment sweeps, Monte Carlo validators, and CSV
//!   reporting behind the `qgt` command-line tool.

pub mod bounds;
pub mod exactla;
pub mod model;
pub mod recover;
pub mod select;

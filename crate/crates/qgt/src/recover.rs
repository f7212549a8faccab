//! Recovery of the defective indicator from a selected column subset: exact
//! RREF of the subsystem, enumeration of binary pin assignments to the free
//! columns, and integer re-verification of every accepted candidate; plus
//! the end-to-end subset-select-then-recover solver and a brute-force
//! oracle for small instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactla::{self, FieldMode, IntMat, LinAlgError};
use crate::model::{outcome_of, BitMatrix, Instance, ItemSet};
use crate::select::SelectError;

/// Largest candidate-set count `brute_force_qgt` will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Maximum free-column count the enumeration accepts, capping the
    /// search at 2^free_var_budget pin assignments. Values above 63 behave
    /// as 63: a longer enumeration could never finish anyway.
    pub free_var_budget: u32,
    /// Field the elimination runs in; candidates are re-verified over the
    /// integers regardless, so a modular false positive cannot be returned.
    pub field_mode: FieldMode,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig { free_var_budget: 20, field_mode: FieldMode::default() }
    }
}

/// What one recovery attempt did and found. Carried by both the success
/// path and the two enumeration failures, so diagnostics (rank deficit,
/// free-column count) survive unsolved trials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Global indices of the accepted weight-k candidate, if one was found.
    pub solution: Option<ItemSet>,
    pub free_var_count: usize,
    /// |S| - rank(A restricted to S), in the configured field.
    pub rank_deficit: usize,
    /// Pin assignments actually solved; assignments skipped because their
    /// pinned ones already exceed k are not counted.
    pub enumerated: u64,
    /// Whether the linear system has any solution at all in the field.
    pub consistent: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecoverError {
    #[error("{} free columns exceed the enumeration budget {budget}", .report.free_var_count)]
    FreeVariableBudgetExceeded { report: RecoveryReport, budget: u32 },
    #[error("no binary weight-k solution among {} solved assignments", .report.enumerated)]
    NoBinarySolution { report: RecoveryReport },
    #[error("{combinations} candidate sets exceed the brute-force guard {limit}")]
    TooLarge { combinations: u128, limit: u128 },
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

impl RecoverError {
    /// The diagnostics report, when this error variant carries one.
    pub fn report(&self) -> Option<&RecoveryReport> {
        match self {
            RecoverError::FreeVariableBudgetExceeded { report, .. }
            | RecoverError::NoBinarySolution { report } => Some(report),
            _ => None,
        }
    }
}

/// Dense integer copy of the columns of `a` selected by `s`, in ascending
/// index order.
pub fn column_submatrix(a: &BitMatrix, s: &ItemSet) -> IntMat {
    let idx = s.as_slice();
    IntMat::from_fn(a.rows(), idx.len(), |r, c| a.get(r, idx[c]) as i64)
}

/// Solves `A|_S z = y` for a binary weight-k `z` supported on `s`.
///
/// The subsystem is brought to reduced row echelon form once; every free
/// column is then pinned to 0 or 1 and the resulting unique solutions are
/// tested. Counter bit `b` pins the b-th smallest free column to 1, the
/// all-zero assignment comes first, and the first candidate that is binary,
/// has weight k, and passes exact integer verification wins — so the result
/// is a deterministic function of the inputs even when the subsystem has
/// several binary solutions.
///
/// `s` must be nonempty; subsets larger than the row count are accepted
/// (the elimination handles wide-or-tall alike) though selection normally
/// guarantees |S| <= m.
pub fn recover_from_submatrix(
    a: &BitMatrix,
    y: &[i64],
    k: usize,
    s: &ItemSet,
    cfg: &RecoveryConfig,
) -> Result<RecoveryReport, RecoverError> {
    assert!(!s.is_empty(), "selected subset must be nonempty");
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    let sub = column_submatrix(a, s);
    let r = exactla::rref(&sub, y, &cfg.field_mode)?;
    let free = r.free_cols().to_vec();
    let mut report = RecoveryReport {
        solution: None,
        free_var_count: free.len(),
        rank_deficit: s.len() - r.rank(),
        enumerated: 0,
        consistent: r.consistent(),
    };
    if !report.consistent {
        return Err(RecoverError::NoBinarySolution { report });
    }
    if free.len() > cfg.free_var_budget.min(63) as usize {
        return Err(RecoverError::FreeVariableBudgetExceeded {
            report,
            budget: cfg.free_var_budget,
        });
    }
    for counter in 0u64..(1u64 << free.len()) {
        if counter.count_ones() as usize > k {
            continue;
        }
        let pins: BTreeMap<usize, i64> = free
            .iter()
            .enumerate()
            .map(|(b, &col)| (col, ((counter >> b) & 1) as i64))
            .collect();
        report.enumerated += 1;
        let z = exactla::solve_pinned(&r, &pins)?;
        let Some(bits) = z.as_binary() else { continue };
        if bits.iter().filter(|&&b| b).count() != k {
            continue;
        }
        let zi: Vec<i64> = bits.iter().map(|&b| b as i64).collect();
        if !exactla::verify_integer(&sub, &zi, y) {
            continue;
        }
        let items: Vec<usize> =
            s.as_slice().iter().zip(&bits).filter_map(|(&item, &b)| b.then_some(item)).collect();
        report.solution = Some(ItemSet::from_sorted(items).expect("subset order is ascending"));
        return Ok(report);
    }
    Err(RecoverError::NoBinarySolution { report })
}

/// Everything the end-to-end solver knows after running: the selected
/// subset, whether it covered the planted defectives, and the recovery
/// report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveReport {
    pub subset: ItemSet,
    pub covers_defectives: bool,
    pub recovery: RecoveryReport,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("recovery on {} selected items failed: {source}", .subset.len())]
    Recover {
        subset: ItemSet,
        covers_defectives: bool,
        #[source]
        source: RecoverError,
    },
}

/// End-to-end solve: run a subset-selection algorithm, then recover the
/// indicator from the selected columns. Recovery failures keep the subset
/// and coverage flag alongside the underlying error.
pub fn solve_qgt<F>(
    inst: &Instance,
    subset_alg: F,
    cfg: &RecoveryConfig,
) -> Result<SolveReport, SolveError>
where
    F: FnOnce(&BitMatrix, &[i64], usize) -> Result<ItemSet, SelectError>,
{
    let subset = subset_alg(&inst.matrix, &inst.outcome, inst.k)?;
    let covers_defectives = inst.defectives.is_subset_of(&subset);
    match recover_from_submatrix(&inst.matrix, &inst.outcome, inst.k, &subset, cfg) {
        Ok(recovery) => Ok(SolveReport { subset, covers_defectives, recovery }),
        Err(source) => Err(SolveError::Recover { subset, covers_defectives, source }),
    }
}

/// C(n, k), saturating at u128::MAX. The running product is kept exact by
/// multiplying before dividing, so every intermediate is an integer.
fn binomial_saturating(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        match c.checked_mul((n - k + i) as u128) {
            Some(v) => c = v / i as u128,
            None => return u128::MAX,
        }
    }
    c
}

/// Every weight-k set whose exact pool counts reproduce `y`, in
/// lexicographic order. Guarded: refuses instances with more than
/// `BRUTE_FORCE_LIMIT` candidate sets.
pub fn brute_force_qgt(a: &BitMatrix, y: &[i64], k: usize) -> Result<Vec<ItemSet>, RecoverError> {
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    let n = a.cols();
    let combinations = binomial_saturating(n, k);
    if combinations > BRUTE_FORCE_LIMIT {
        return Err(RecoverError::TooLarge { combinations, limit: BRUTE_FORCE_LIMIT });
    }
    let mut found = Vec::new();
    if k > n {
        return Ok(found);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let candidate = ItemSet::from_sorted(idx.clone()).expect("combination is ascending");
        if outcome_of(a, &candidate) == y {
            found.push(candidate);
        }
        // Advance to the next combination in lexicographic order.
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(found);
            }
        }
        if k == 0 {
            return Ok(found);
        }
    }
}

//! Exact rational elimination.
//!
//! The forward pass is fraction-free (Bareiss): every intermediate entry is a
//! minor of the input matrix, each division is exact over the integers, and
//! nothing ever rounds. The reduced form is then finished with exact rational
//! back-substitution. Intended for modest dimensions; the facade enforces a
//! dimension cap.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Row-reduced augmented system over the rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct RatRref {
    pub cols: usize,
    /// `rows[i]` has `cols + 1` entries; the last one is the right-hand side.
    pub rows: Vec<Vec<BigRational>>,
    pub pivot_cols: Vec<usize>,
    pub consistent: bool,
}

/// Fraction-free forward elimination. Returns the integer echelon rows and
/// the pivot columns; pivot choice is the same first-nonzero-top-down rule as
/// the prime-field path.
fn echelon_bareiss(mut rows: Vec<Vec<BigInt>>, cols: usize) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let nrows = rows.len();
    let width = cols + 1;
    debug_assert!(rows.iter().all(|r| r.len() == width));
    let mut pivot_cols = Vec::new();
    let mut prev = BigInt::one();

    let mut r = 0;
    for c in 0..cols {
        if r == nrows {
            break;
        }
        let Some(i) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, i);
        let (top, below) = rows.split_at_mut(r + 1);
        let piv_row = &top[r];
        let piv = piv_row[c].clone();
        for row in below.iter_mut() {
            // Two-term update with exact division by the previous pivot; the
            // scaling applies to every row below, even those already zero in
            // column c, to keep later divisions exact.
            let f = row[c].clone();
            for j in c..width {
                let num = &piv * &row[j] - &f * &piv_row[j];
                debug_assert!((&num % &prev).is_zero(), "fraction-free division not exact");
                row[j] = num / &prev;
            }
        }
        prev = piv;
        pivot_cols.push(c);
        r += 1;
    }
    (rows, pivot_cols)
}

/// Rank over the rationals: pivots of the fraction-free forward pass.
pub fn rank_rational(rows: Vec<Vec<BigInt>>, cols: usize) -> usize {
    echelon_bareiss(rows, cols).1.len()
}

/// Full reduced row-echelon form with exact rational entries.
pub fn rref_rational(rows_int: Vec<Vec<BigInt>>, cols: usize) -> RatRref {
    let nrows = rows_int.len();
    let width = cols + 1;
    let (ech, pivot_cols) = echelon_bareiss(rows_int, cols);
    let rank = pivot_cols.len();

    let mut rows: Vec<Vec<BigRational>> = ech
        .into_iter()
        .map(|row| row.into_iter().map(BigRational::from_integer).collect())
        .collect();

    // Normalize pivot rows and eliminate above; below-pivot entries are
    // already zero from the forward pass.
    for (ri, &c) in pivot_cols.iter().enumerate().rev() {
        let piv = rows[ri][c].clone();
        for j in c..width {
            let v = &rows[ri][j] / &piv;
            rows[ri][j] = v;
        }
        let (above, rest) = rows.split_at_mut(ri);
        let piv_row = &rest[0];
        for row in above.iter_mut() {
            if !row[c].is_zero() {
                let f = row[c].clone();
                for j in c..width {
                    let v = &row[j] - &f * &piv_row[j];
                    row[j] = v;
                }
            }
        }
    }

    let consistent = rows[rank..nrows].iter().all(|row| row[cols].is_zero());
    RatRref { cols, rows, pivot_cols, consistent }
}

/// Unique solution once every free column is pinned.
pub fn solve_pinned_rational(
    r: &RatRref,
    free_cols: &[usize],
    pin: &BTreeMap<usize, i64>,
) -> Vec<BigRational> {
    let mut x = vec![BigRational::zero(); r.cols];
    for &f in free_cols {
        x[f] = BigRational::from_integer(BigInt::from(pin[&f]));
    }
    for (q, &pc) in r.pivot_cols.iter().enumerate() {
        let row = &r.rows[q];
        let mut acc = row[r.cols].clone();
        for &f in free_cols {
            if !x[f].is_zero() && !row[f].is_zero() {
                acc -= &row[f] * &x[f];
            }
        }
        x[pc] = acc;
    }
    x
}

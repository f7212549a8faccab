//! Exact linear algebra over two interchangeable scalar fields.
//!
//! Rank decisions drive everything downstream (free-variable enumeration,
//! singularity estimates, subspace experiments), so elimination never touches
//! floating point. The workhorse field is GF(p) for a configurable odd prime
//! (default 2^31 - 1), giving ranks that are always lower bounds on the
//! rational rank and candidate solutions that are re-verified over the
//! integers before anyone trusts them. A fraction-free rational mode provides
//! the ground truth at small dimensions and is capped because its entries are
//! minors that grow quickly.

mod fp;
mod rational;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PRIME: u64 = 2_147_483_647; // 2^31 - 1
pub const DEFAULT_EXACT_CAP: usize = 64;

fn default_exact_cap() -> usize {
    DEFAULT_EXACT_CAP
}

/// Scalar field used by elimination.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldMode {
    /// GF(prime) for an odd prime below 2^62.
    ModP { prime: u64 },
    /// Arbitrary-precision rationals, fraction-free elimination, permitted
    /// only while `max(rows, cols) <= cap`.
    ExactRational {
        #[serde(default = "default_exact_cap")]
        cap: usize,
    },
}

impl Default for FieldMode {
    fn default() -> Self {
        FieldMode::ModP { prime: DEFAULT_PRIME }
    }
}

impl FieldMode {
    pub fn exact_rational() -> Self {
        FieldMode::ExactRational { cap: DEFAULT_EXACT_CAP }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinAlgError {
    #[error("modulus {0} is not an odd prime")]
    NotPrime(u64),
    #[error("modulus {0} too large (must be below 2^62)")]
    ModulusTooLarge(u64),
    #[error("exact rational mode allows dimension at most {cap}, got {dim}")]
    ExactCapExceeded { dim: usize, cap: usize },
    #[error("right-hand side has {rhs} entries but the matrix has {rows} rows")]
    DimensionMismatch { rows: usize, rhs: usize },
    #[error("system is inconsistent; no solution exists")]
    Inconsistent,
    #[error("free column {0} has no pinned value")]
    MissingPin(usize),
    #[error("column {0} is not free; only free columns may be pinned")]
    PinNotFree(usize),
}

/// Dense row-major integer matrix (elimination input).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let nrows = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        IntMat { rows: nrows, cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        IntMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// One scalar read back out of a reduced system.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldScalar {
    Fp { prime: u64, value: u64 },
    Rat(BigRational),
}

impl FieldScalar {
    /// Does this scalar equal the integer `v` (as a field element)?
    pub fn eq_int(&self, v: i64) -> bool {
        match self {
            FieldScalar::Fp { prime, value } => *value == fp::residue(v, *prime),
            FieldScalar::Rat(r) => *r == BigRational::from_integer(BigInt::from(v)),
        }
    }

    pub fn eq_ratio(&self, num: i64, den: i64) -> bool {
        assert!(den != 0);
        match self {
            FieldScalar::Fp { prime, value } => {
                let d = fp::residue(den, *prime);
                d != 0 && *value == fp::mul_mod(fp::residue(num, *prime), fp::inv_mod(d, *prime), *prime)
            }
            FieldScalar::Rat(r) => *r == BigRational::new(BigInt::from(num), BigInt::from(den)),
        }
    }
}

/// Solution vector from [`solve_pinned`], in the mode of its system.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldVec {
    Fp { prime: u64, values: Vec<u64> },
    Rat(Vec<BigRational>),
}

impl FieldVec {
    pub fn len(&self) -> usize {
        match self {
            FieldVec::Fp { values, .. } => values.len(),
            FieldVec::Rat(values) => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Some(bits)` iff every entry is the field element 0 or 1.
    pub fn as_binary(&self) -> Option<Vec<bool>> {
        match self {
            FieldVec::Fp { values, .. } => values
                .iter()
                .map(|&v| match v {
                    0 => Some(false),
                    1 => Some(true),
                    _ => None,
                })
                .collect(),
            FieldVec::Rat(values) => values
                .iter()
                .map(|v| {
                    if v.is_zero() {
                        Some(false)
                    } else if v.is_one() {
                        Some(true)
                    } else {
                        None
                    }
                })
                .collect(),
        }
    }

    pub fn entry(&self, idx: usize) -> FieldScalar {
        match self {
            FieldVec::Fp { prime, values } => FieldScalar::Fp { prime: *prime, value: values[idx] },
            FieldVec::Rat(values) => FieldScalar::Rat(values[idx].clone()),
        }
    }
}

#[derive(Debug)]
enum Inner {
    Fp(fp::FpRref),
    Rat(rational::RatRref),
}

/// Reduced row-echelon form of an augmented system `[M | v]`.
///
/// Pivot columns carry a single 1 each, pivot columns are strictly
/// increasing, zero rows sit at the bottom, and `consistent` is false exactly
/// when a zero coefficient row has a nonzero right-hand side.
#[derive(Debug)]
pub struct RrefResult {
    mode: FieldMode,
    cols: usize,
    free_cols: Vec<usize>,
    inner: Inner,
}

impl RrefResult {
    pub fn mode(&self) -> &FieldMode {
        &self.mode
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pivot_cols(&self) -> &[usize] {
        match &self.inner {
            Inner::Fp(r) => &r.pivot_cols,
            Inner::Rat(r) => &r.pivot_cols,
        }
    }

    pub fn free_cols(&self) -> &[usize] {
        &self.free_cols
    }

    pub fn rank(&self) -> usize {
        self.pivot_cols().len()
    }

    pub fn consistent(&self) -> bool {
        match &self.inner {
            Inner::Fp(r) => r.consistent,
            Inner::Rat(r) => r.consistent,
        }
    }

    pub fn reduced_entry(&self, row: usize, col: usize) -> FieldScalar {
        assert!(col < self.cols);
        match &self.inner {
            Inner::Fp(r) => FieldScalar::Fp { prime: r.prime, value: r.rows[row][col] },
            Inner::Rat(r) => FieldScalar::Rat(r.rows[row][col].clone()),
        }
    }

    pub fn rhs_entry(&self, row: usize) -> FieldScalar {
        match &self.inner {
            Inner::Fp(r) => FieldScalar::Fp { prime: r.prime, value: r.rows[row][self.cols] },
            Inner::Rat(r) => FieldScalar::Rat(r.rows[row][self.cols].clone()),
        }
    }

    /// Reduced coefficient rows and right-hand side as plain integers, usable
    /// as elimination input again. In rational mode rows are rescaled to a
    /// common denominator (row scaling does not change the reduced form).
    pub fn to_integer_rows(&self) -> (Vec<Vec<i64>>, Vec<i64>) {
        match &self.inner {
            Inner::Fp(r) => {
                let mut rows = Vec::with_capacity(r.rows.len());
                let mut rhs = Vec::with_capacity(r.rows.len());
                for row in &r.rows {
                    rows.push(row[..self.cols].iter().map(|&v| v as i64).collect());
                    rhs.push(row[self.cols] as i64);
                }
                (rows, rhs)
            }
            Inner::Rat(r) => {
                let mut rows = Vec::with_capacity(r.rows.len());
                let mut rhs = Vec::with_capacity(r.rows.len());
                for row in &r.rows {
                    let mut lcm = BigInt::one();
                    for v in row {
                        lcm = num_integer::lcm(lcm, v.denom().clone());
                    }
                    let ints: Vec<BigInt> =
                        row.iter().map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer()).collect();
                    rows.push(
                        ints[..self.cols]
                            .iter()
                            .map(|v| i64::try_from(v).expect("entry fits i64"))
                            .collect(),
                    );
                    rhs.push(i64::try_from(&ints[self.cols]).expect("entry fits i64"));
                }
                (rows, rhs)
            }
        }
    }
}

/// Deterministic Miller-Rabin, exact for all u64 inputs.
fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = fp::pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = fp::mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn check_mode(mode: &FieldMode, rows: usize, cols: usize) -> Result<(), LinAlgError> {
    match mode {
        FieldMode::ModP { prime } => {
            if *prime >= 1 << 62 {
                return Err(LinAlgError::ModulusTooLarge(*prime));
            }
            if *prime != DEFAULT_PRIME && (*prime == 2 || !is_prime_u64(*prime)) {
                return Err(LinAlgError::NotPrime(*prime));
            }
            Ok(())
        }
        FieldMode::ExactRational { cap } => {
            let dim = rows.max(cols);
            if dim > *cap {
                return Err(LinAlgError::ExactCapExceeded { dim, cap: *cap });
            }
            Ok(())
        }
    }
}

fn fp_augmented_rows(mat: &IntMat, rhs: &[i64], p: u64) -> Vec<Vec<u64>> {
    (0..mat.rows())
        .map(|r| {
            let mut row: Vec<u64> = mat.row(r).iter().map(|&v| fp::residue(v, p)).collect();
            row.push(fp::residue(rhs[r], p));
            row
        })
        .collect()
}

fn rat_augmented_rows(mat: &IntMat, rhs: &[i64]) -> Vec<Vec<BigInt>> {
    (0..mat.rows())
        .map(|r| {
            let mut row: Vec<BigInt> = mat.row(r).iter().map(|&v| BigInt::from(v)).collect();
            row.push(BigInt::from(rhs[r]));
            row
        })
        .collect()
}

fn free_columns(cols: usize, pivots: &[usize]) -> Vec<usize> {
    let mut is_pivot = vec![false; cols];
    for &c in pivots {
        is_pivot[c] = true;
    }
    (0..cols).filter(|&c| !is_pivot[c]).collect()
}

/// Reduced row-echelon form of `[mat | rhs]` in the requested field.
pub fn rref(mat: &IntMat, rhs: &[i64], mode: &FieldMode) -> Result<RrefResult, LinAlgError> {
    if rhs.len() != mat.rows() {
        return Err(LinAlgError::DimensionMismatch { rows: mat.rows(), rhs: rhs.len() });
    }
    check_mode(mode, mat.rows(), mat.cols())?;
    let cols = mat.cols();
    let inner = match mode {
        FieldMode::ModP { prime } => {
            Inner::Fp(fp::rref_fp(fp_augmented_rows(mat, rhs, *prime), cols, *prime, true))
        }
        FieldMode::ExactRational { .. } => {
            Inner::Rat(rational::rref_rational(rat_augmented_rows(mat, rhs), cols))
        }
    };
    let pivots = match &inner {
        Inner::Fp(r) => r.pivot_cols.clone(),
        Inner::Rat(r) => r.pivot_cols.clone(),
    };
    Ok(RrefResult { mode: mode.clone(), cols, free_cols: free_columns(cols, &pivots), inner })
}

/// Rank of `mat` in the requested field; forward elimination only. In ModP
/// mode this is a lower bound on (and typically equal to) the rational rank.
pub fn rank(mat: &IntMat, mode: &FieldMode) -> Result<usize, LinAlgError> {
    check_mode(mode, mat.rows(), mat.cols())?;
    Ok(match mode {
        FieldMode::ModP { prime } if *prime == DEFAULT_PRIME => {
            let rows: Vec<Vec<u32>> = (0..mat.rows())
                .map(|r| mat.row(r).iter().map(|&v| fp::residue(v, DEFAULT_PRIME) as u32).collect())
                .collect();
            fp::rank_m31_dense(rows, mat.cols())
        }
        FieldMode::ModP { prime } => {
            let rhs = vec![0i64; mat.rows()];
            fp::rref_fp(fp_augmented_rows(mat, &rhs, *prime), mat.cols(), *prime, false)
                .pivot_cols
                .len()
        }
        FieldMode::ExactRational { .. } => {
            let rhs = vec![0i64; mat.rows()];
            rational::rank_rational(rat_augmented_rows(mat, &rhs), mat.cols())
        }
    })
}

/// Unique solution of a consistent reduced system once every free column is
/// pinned to an integer (embedded into the field):
/// `x[pivot q] = rhs_q - sum_f reduced[q][f] * pin(f)`.
pub fn solve_pinned(r: &RrefResult, pin: &BTreeMap<usize, i64>) -> Result<FieldVec, LinAlgError> {
    if !r.consistent() {
        return Err(LinAlgError::Inconsistent);
    }
    for &c in pin.keys() {
        if !r.free_cols.contains(&c) {
            return Err(LinAlgError::PinNotFree(c));
        }
    }
    for &f in &r.free_cols {
        if !pin.contains_key(&f) {
            return Err(LinAlgError::MissingPin(f));
        }
    }
    Ok(match &r.inner {
        Inner::Fp(sys) => FieldVec::Fp {
            prime: sys.prime,
            values: fp::solve_pinned_fp(sys, &r.free_cols, pin),
        },
        Inner::Rat(sys) => FieldVec::Rat(rational::solve_pinned_rational(sys, &r.free_cols, pin)),
    })
}

/// Exact check of `M z = v` over the integers. Accumulates in i128 when a
/// worst-case bound proves that cannot overflow, otherwise in big integers;
/// either way no wraparound is possible.
pub fn verify_integer(mat: &IntMat, z: &[i64], v: &[i64]) -> bool {
    if z.len() != mat.cols() || v.len() != mat.rows() {
        return false;
    }
    let max_m = mat.data.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0) as u128;
    let max_z = z.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0) as u128;
    let fits_i128 = (mat.cols() as u128)
        .checked_mul(max_m)
        .and_then(|t| t.checked_mul(max_z))
        .is_some_and(|t| t <= i128::MAX as u128 / 2);

    if fits_i128 {
        for r in 0..mat.rows() {
            let acc: i128 = mat.row(r).iter().zip(z).map(|(&a, &b)| a as i128 * b as i128).sum();
            if acc != v[r] as i128 {
                return false;
            }
        }
    } else {
        for r in 0..mat.rows() {
            let mut acc = BigInt::zero();
            for (&a, &b) in mat.row(r).iter().zip(z) {
                acc += BigInt::from(a) * BigInt::from(b);
            }
            if acc != BigInt::from(v[r]) {
                return false;
            }
        }
    }
    true
}

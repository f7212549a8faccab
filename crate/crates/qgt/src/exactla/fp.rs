//! Prime-field elimination.
//!
//! Rows are stored as `u64` residues with the right-hand side appended as a
//! final augmented column. The default modulus 2^31 - 1 gets a branch-free
//! Mersenne reduction kernel; any other odd prime below 2^62 goes through a
//! u128 fallback.

use std::collections::BTreeMap;

pub const M31: u64 = (1 << 31) - 1;

/// `x mod (2^31 - 1)` for `x < 2^63`.
#[inline(always)]
fn reduce_m31(x: u64) -> u64 {
    let t = (x & M31) + (x >> 31); // < 2^32 + 2^31
    let t = (t & M31) + (t >> 31); // <= 2^31
    if t >= M31 {
        t - M31
    } else {
        t
    }
}

/// `dst[i] += coef * src[i] (mod 2^31-1)`. All values below the modulus, so
/// the accumulator stays under 2^63. The u32 casts are value-preserving and
/// let the compiler use widening 32x32 multiplies.
fn axpy_m31(dst: &mut [u64], src: &[u64], coef: u64) {
    let c = (coef as u32) as u64;
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = reduce_m31(*d + c * ((s as u32) as u64));
    }
}

fn scale_m31(row: &mut [u64], by: u64) {
    let c = (by as u32) as u64;
    for d in row.iter_mut() {
        *d = reduce_m31(c * ((*d as u32) as u64));
    }
}

fn axpy_gen(dst: &mut [u64], src: &[u64], coef: u64, p: u64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = ((*d as u128 + coef as u128 * s as u128) % p as u128) as u64;
    }
}

fn scale_gen(row: &mut [u64], by: u64, p: u64) {
    for d in row.iter_mut() {
        *d = ((*d as u128 * by as u128) % p as u128) as u64;
    }
}

#[inline]
fn axpy(dst: &mut [u64], src: &[u64], coef: u64, p: u64) {
    if p == M31 {
        axpy_m31(dst, src, coef);
    } else {
        axpy_gen(dst, src, coef, p);
    }
}

#[inline]
fn scale(row: &mut [u64], by: u64, p: u64) {
    if p == M31 {
        scale_m31(row, by);
    } else {
        scale_gen(row, by, p);
    }
}

/// Pivots handled per streaming pass in [`rank_m31_dense`].
const PANEL: usize = 8;

/// One Mersenne fold: `x < 2^63` comes back congruent and below `2^33`.
#[inline(always)]
fn fold1(x: u64) -> u64 {
    (x & M31) + (x >> 31)
}

/// Final reduction from the lazy domain; requires `x < 2^36`.
#[inline(always)]
fn settle(x: u64) -> u64 {
    debug_assert!(x < 1 << 36);
    let t = (x & M31) + (x >> 31);
    if t >= M31 {
        t - M31
    } else {
        t
    }
}

/// `dst[k] += sum_s gs[s] * srcs[s][k] (mod 2^31-1)` for exactly 8 sources.
/// Entries are reduced residues; `gs` values may be at most the modulus
/// itself. Pairwise sums of 62-bit products stay under 2^63, and four folded
/// pair sums plus `dst` stay under the `settle` domain. The u32 round-trips
/// on the multipliers are value-preserving and tell the compiler every
/// product is a widening 32x32 multiply.
#[inline(always)]
fn madd8_body(dst: &mut [u32], srcs: [&[u32]; 8], gs: [u64; 8]) {
    let n = dst.len();
    let [s0, s1, s2, s3, s4, s5, s6, s7] = srcs.map(|s| &s[..n]);
    let g = gs.map(|g| g as u32 as u64);
    let dst = &mut dst[..n];
    for k in 0..n {
        let q0 = g[0] * s0[k] as u64 + g[1] * s1[k] as u64;
        let q1 = g[2] * s2[k] as u64 + g[3] * s3[k] as u64;
        let q2 = g[4] * s4[k] as u64 + g[5] * s5[k] as u64;
        let q3 = g[6] * s6[k] as u64 + g[7] * s7[k] as u64;
        let acc = dst[k] as u64 + fold1(q0) + fold1(q1) + fold1(q2) + fold1(q3);
        dst[k] = settle(acc) as u32;
    }
}

/// Hand-vectorized [`madd8_body`]: four u64 lanes per step, widening 32x32
/// multiplies, the same fold/settle arithmetic. The value ranges that keep
/// every lane below 2^63 are identical to the scalar body's. Deliberately
/// flat: nested fns or closures would not inherit the target feature and
/// would be compiled without AVX2.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn madd8_avx2(dst: &mut [u32], srcs: [&[u32]; 8], gs: [u64; 8]) {
    use std::arch::x86_64::*;

    // 4 x u32 memory -> 4 x u64 lanes
    macro_rules! widen4 {
        ($p:expr) => {
            _mm256_cvtepu32_epi64(_mm_loadu_si128($p as *const __m128i))
        };
    }
    macro_rules! fold {
        ($q:expr, $m31:expr) => {{
            let q = $q;
            _mm256_add_epi64(_mm256_and_si256(q, $m31), _mm256_srli_epi64(q, 31))
        }};
    }

    let n = dst.len();
    let s: [*const u32; 8] = std::array::from_fn(|i| srcs[i][..n].as_ptr());
    let d = dst.as_mut_ptr();
    unsafe {
        let m31 = _mm256_set1_epi64x(M31 as i64);
        let m31_minus_1 = _mm256_set1_epi64x((M31 - 1) as i64);
        // The mask keeps the broadcast's high dwords provably zero so every
        // product lowers to a single widening multiply.
        let g: [__m256i; 8] =
            std::array::from_fn(|i| _mm256_set1_epi64x((gs[i] & 0xffff_ffff) as i64));
        let mut k = 0;
        while k + 4 <= n {
            let q0 = _mm256_add_epi64(
                _mm256_mul_epu32(widen4!(s[0].add(k)), g[0]),
                _mm256_mul_epu32(widen4!(s[1].add(k)), g[1]),
            );
            let q1 = _mm256_add_epi64(
                _mm256_mul_epu32(widen4!(s[2].add(k)), g[2]),
                _mm256_mul_epu32(widen4!(s[3].add(k)), g[3]),
            );
            let q2 = _mm256_add_epi64(
                _mm256_mul_epu32(widen4!(s[4].add(k)), g[4]),
                _mm256_mul_epu32(widen4!(s[5].add(k)), g[5]),
            );
            let q3 = _mm256_add_epi64(
                _mm256_mul_epu32(widen4!(s[6].add(k)), g[6]),
                _mm256_mul_epu32(widen4!(s[7].add(k)), g[7]),
            );
            let mut acc = widen4!(d.add(k));
            acc = _mm256_add_epi64(acc, fold!(q0, m31));
            acc = _mm256_add_epi64(acc, fold!(q1, m31));
            acc = _mm256_add_epi64(acc, fold!(q2, m31));
            acc = _mm256_add_epi64(acc, fold!(q3, m31));
            // settle: one more fold, then a conditional subtract. Lanes are
            // far below 2^63, so the signed compare is an unsigned compare.
            let t = fold!(acc, m31);
            let ge = _mm256_cmpgt_epi64(t, m31_minus_1);
            let t = _mm256_sub_epi64(t, _mm256_and_si256(ge, m31));
            // low dwords of the 4 lanes -> 4 contiguous u32
            let shuf = _mm256_shuffle_epi32(t, 0b10_00_10_00);
            let lo = _mm256_castsi256_si128(shuf);
            let hi = _mm256_extracti128_si256(shuf, 1);
            _mm_storeu_si128(d.add(k) as *mut __m128i, _mm_unpacklo_epi64(lo, hi));
            k += 4;
        }
        while k < n {
            let mut acc = *d.add(k) as u64;
            for i in 0..8 {
                acc = fold1(acc + gs[i] * *s[i].add(k) as u64);
            }
            *d.add(k) = settle(acc) as u32;
            k += 1;
        }
    }
}

fn madd8(dst: &mut [u32], srcs: [&[u32]; 8], gs: [u64; 8]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        return unsafe { madd8_avx2(dst, srcs, gs) };
    }
    madd8_body(dst, srcs, gs)
}

/// As [`madd8`] for 1..=7 sources (panel tails).
fn madd_small(dst: &mut [u32], srcs: &[&[u32]], gs: &[u64]) {
    let n = dst.len();
    for k in 0..n {
        let mut acc = dst[k] as u64;
        for (s, &g) in srcs.iter().zip(gs) {
            acc = fold1(acc + g * s[k] as u64);
        }
        dst[k] = settle(acc) as u32;
    }
}

/// Rank over GF(2^31 - 1) by blocked forward elimination on u32 residues.
///
/// Rank is invariant under pivot choice and row scaling, so unlike
/// [`rref_fp`] this routine picks pivots in plain scan order and batches
/// PANEL of them per streaming pass over the trailing rows; the big Monte
/// Carlo sweeps are rank-query bound and this path is several times faster
/// than eliminating one pivot per pass. Entries must be reduced residues.
pub fn rank_m31_dense(mut rows: Vec<Vec<u32>>, cols: usize) -> usize {
    let nrows = rows.len();
    debug_assert!(rows.iter().all(|r| r.len() == cols));
    debug_assert!(rows.iter().flatten().all(|&v| (v as u64) < M31));

    // gbuf[(i - r) * PANEL + s] is the negated multiplier of active row i
    // against panel pivot s; uvals holds a column of updated values.
    let mut gbuf = vec![0u64; nrows * PANEL];
    let mut uvals = vec![0u64; nrows];

    let mut r = 0;
    let mut c = 0;
    while r < nrows && c < cols {
        let mut t = 0;
        while t < PANEL && c < cols && r + t < nrows {
            let mut prow_c = [0u64; PANEL];
            for s in 0..t {
                prow_c[s] = rows[r + s][c] as u64;
            }
            // Updated value of each active row at column c:
            // rows[i][c] + sum_s g[i][s] * pivot_s[c].
            let mut pivot = None;
            for i in (r + t)..nrows {
                let g = &gbuf[(i - r) * PANEL..];
                let mut acc = rows[i][c] as u64;
                for s in 0..t {
                    acc = fold1(acc + g[s] * prow_c[s]);
                }
                let u = settle(acc);
                if pivot.is_none() && u != 0 {
                    pivot = Some(i);
                }
                uvals[i - (r + t)] = u;
            }
            let Some(j) = pivot else {
                c += 1; // column is zero below the panel; no pivot here
                continue;
            };
            rows.swap(j, r + t);
            for s in 0..PANEL {
                gbuf.swap((j - r) * PANEL + s, t * PANEL + s);
            }
            uvals.swap(j - (r + t), 0);

            // Materialize the pivot row from column c on and normalize it.
            {
                let (head, tail) = rows.split_at_mut(r + t);
                let srcs: Vec<&[u32]> = head[r..].iter().map(|p| &p[c..]).collect();
                let gs = &gbuf[t * PANEL..t * PANEL + t];
                madd_small(&mut tail[0][c..], &srcs, gs);
                debug_assert_eq!(tail[0][c] as u64, uvals[0]);
            }
            let inv = inv_mod(uvals[0], M31);
            scale_m31_u32(&mut rows[r + t][c..], inv);

            for i in (r + t + 1)..nrows {
                gbuf[(i - r) * PANEL + t] = M31 - uvals[i - (r + t)];
            }
            t += 1;
            c += 1;
        }
        if t == 0 {
            break; // no pivot in any remaining column
        }
        if c < cols && r + t < nrows {
            let (head, tail) = rows.split_at_mut(r + t);
            let prows: Vec<&[u32]> = head[r..].iter().map(|p| &p[c..]).collect();
            for (off, row) in tail.iter_mut().enumerate() {
                let g = &gbuf[(t + off) * PANEL..(t + off) * PANEL + t];
                if t == PANEL {
                    madd8(
                        &mut row[c..],
                        [prows[0], prows[1], prows[2], prows[3], prows[4], prows[5], prows[6], prows[7]],
                        g.try_into().unwrap(),
                    );
                } else {
                    madd_small(&mut row[c..], &prows, g);
                }
            }
        }
        r += t;
        gbuf[..(nrows - r) * PANEL].fill(0);
    }
    r
}

fn scale_m31_u32(row: &mut [u32], by: u64) {
    for d in row.iter_mut() {
        *d = reduce_m31(by * *d as u64) as u32;
    }
}

pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse by Fermat; `a` must be nonzero mod prime `p`.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    pow_mod(a, p - 2, p)
}

pub fn residue(x: i64, p: u64) -> u64 {
    x.rem_euclid(p as i64) as u64
}

/// Row-reduced augmented system over GF(p).
#[derive(Clone, Debug, PartialEq)]
pub struct FpRref {
    pub prime: u64,
    pub cols: usize,
    /// `rows[i]` has `cols + 1` entries; the last one is the right-hand side.
    pub rows: Vec<Vec<u64>>,
    pub pivot_cols: Vec<usize>,
    pub consistent: bool,
}

/// Gauss-Jordan elimination over GF(p). Pivot choice is pinned: first nonzero
/// entry scanning rows top-down in the current column, columns left to right.
/// With `full = false` only the forward (row-echelon) pass runs, which is
/// enough for rank, free columns, and consistency.
pub fn rref_fp(rows_in: Vec<Vec<u64>>, cols: usize, p: u64, full: bool) -> FpRref {
    let nrows = rows_in.len();
    let width = cols + 1;
    debug_assert!(rows_in.iter().all(|r| r.len() == width));
    let mut rows = rows_in;
    let mut pivot_cols = Vec::new();

    let mut r = 0;
    for c in 0..cols {
        if r == nrows {
            break;
        }
        let Some(i) = (r..nrows).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, i);
        let inv = inv_mod(rows[r][c], p);
        scale(&mut rows[r][c..], inv, p);
        let (top, below) = rows.split_at_mut(r + 1);
        let piv = &top[r];
        for row in below.iter_mut() {
            let f = row[c];
            if f != 0 {
                axpy(&mut row[c..], &piv[c..], p - f, p);
            }
        }
        pivot_cols.push(c);
        r += 1;
    }

    if full {
        for (ri, &c) in pivot_cols.iter().enumerate().rev() {
            let (above, rest) = rows.split_at_mut(ri);
            let piv = &rest[0];
            for row in above.iter_mut() {
                let f = row[c];
                if f != 0 {
                    axpy(&mut row[c..], &piv[c..], p - f, p);
                }
            }
        }
    }

    // Rows past the last pivot are zero in every coefficient column, so
    // consistency is exactly "their right-hand sides are zero".
    let consistent = rows[pivot_cols.len()..].iter().all(|row| row[cols] == 0);
    FpRref { prime: p, cols, rows, pivot_cols, consistent }
}

/// Unique solution once every free column is pinned:
/// `x[pivot q] = rhs_q - sum_f reduced[q][f] * pin(f)`.
pub fn solve_pinned_fp(r: &FpRref, free_cols: &[usize], pin: &BTreeMap<usize, i64>) -> Vec<u64> {
    let p = r.prime;
    let mut x = vec![0u64; r.cols];
    for &f in free_cols {
        x[f] = residue(pin[&f], p);
    }
    for (q, &pc) in r.pivot_cols.iter().enumerate() {
        let row = &r.rows[q];
        let mut acc = row[r.cols];
        for &f in free_cols {
            if x[f] != 0 && row[f] != 0 {
                acc = (acc + mul_mod(p - row[f], x[f], p)) % p;
            }
        }
        x[pc] = acc;
    }
    x
}

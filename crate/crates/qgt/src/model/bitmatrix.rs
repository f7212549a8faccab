//! Bit-packed binary test matrices.

use super::rng::SplitMix64;

const WORD_BITS: usize = 64;

/// Dense 0/1 matrix, bit-packed row-major: entry `(r, c)` lives in bit
/// `c mod 64` of word `r * words_per_row + c / 64`.
///
/// Unused tail bits of each row's final word are kept at zero, so the derived
/// equality on the packed words coincides with entry-wise equality.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitMatrix({}x{})", self.rows, self.cols)
    }
}

fn tail_mask(cols: usize) -> u64 {
    match cols % WORD_BITS {
        0 => u64::MAX,
        k => (1u64 << k) - 1,
    }
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(WORD_BITS);
        BitMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        let w = self.words[r * self.words_per_row + c / WORD_BITS];
        (w >> (c % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let idx = r * self.words_per_row + c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        if bit {
            self.words[idx] |= mask;
        } else {
            self.words[idx] &= !mask;
        }
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    /// Builds an `rows x cols` matrix from a flat bit stream: entry `(r, c)`
    /// is bit `t mod 64` of `stream[t / 64]` where `t = r * cols + c`.
    /// `stream` must hold at least `ceil(rows*cols/64)` words.
    pub fn from_stream_words(rows: usize, cols: usize, stream: &[u64]) -> Self {
        let total = rows * cols;
        assert!(stream.len() * WORD_BITS >= total, "bit stream too short");
        let mut m = BitMatrix::zeros(rows, cols);
        let mask = tail_mask(cols);
        for r in 0..rows {
            let start = r * cols;
            let dst_base = r * m.words_per_row;
            for w in 0..m.words_per_row {
                m.words[dst_base + w] = read_word(stream, start + w * WORD_BITS);
            }
            m.words[dst_base + m.words_per_row - 1] &= mask;
        }
        m
    }

    /// Entry-wise complement (0 <-> 1).
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        let mask = tail_mask(self.cols);
        for r in 0..self.rows {
            let base = r * self.words_per_row;
            for w in 0..self.words_per_row {
                out.words[base + w] = !self.words[base + w];
            }
            out.words[base + self.words_per_row - 1] &= mask;
        }
        out
    }

    /// Copy of the first `r` rows.
    pub fn top_rows(&self, r: usize) -> Self {
        assert!(r <= self.rows);
        BitMatrix {
            rows: r,
            cols: self.cols,
            words_per_row: self.words_per_row,
            words: self.words[..r * self.words_per_row].to_vec(),
        }
    }

    /// Copy with the listed columns refilled with fair bits. Replacement
    /// entries are drawn row-major over (row asc, listed column asc), one bit
    /// per stream bit, bits taken LSB-first from successive words of `rng`.
    pub fn resample_columns(&self, cols: &[usize], rng: &mut SplitMix64) -> Self {
        let mut out = self.clone();
        let mut bits = BitSource::new(rng);
        for r in 0..self.rows {
            for &c in cols {
                assert!(c < self.cols);
                out.set(r, c, bits.next_bit());
            }
        }
        out
    }

    /// Copy with rows `start..` refilled with fair bits, row-major, bits taken
    /// LSB-first from successive words of `rng`.
    pub fn resample_rows_from(&self, start: usize, rng: &mut SplitMix64) -> Self {
        assert!(start <= self.rows);
        let mut out = self.clone();
        let mut bits = BitSource::new(rng);
        for r in start..self.rows {
            for c in 0..self.cols {
                out.set(r, c, bits.next_bit());
            }
        }
        out
    }

    /// Positions of the 1-entries in row `r`, ascending.
    pub fn row_set_bits(&self, r: usize) -> SetBits<'_> {
        SetBits {
            words: self.row_words(r),
            word_idx: 0,
            current: self.row_words(r)[0],
        }
    }

    /// `popcount(row_r AND mask)`; `mask` uses this matrix's row layout.
    #[inline]
    pub fn masked_row_count(&self, r: usize, mask: &[u64]) -> u32 {
        debug_assert_eq!(mask.len(), self.words_per_row);
        self.row_words(r)
            .iter()
            .zip(mask)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Number of 1-entries in the whole matrix.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Reads the 64 bits starting at bit offset `start` from a word stream
/// (bit `t` of the stream = bit `t mod 64` of `stream[t / 64]`).
#[inline]
fn read_word(stream: &[u64], start: usize) -> u64 {
    let idx = start / WORD_BITS;
    let s = start % WORD_BITS;
    let lo = stream.get(idx).copied().unwrap_or(0);
    if s == 0 {
        lo
    } else {
        let hi = stream.get(idx + 1).copied().unwrap_or(0);
        (lo >> s) | (hi << (WORD_BITS - s))
    }
}

/// Hands out single fair bits, LSB-first within each stream word.
struct BitSource<'a> {
    rng: &'a mut SplitMix64,
    current: u64,
    left: u32,
}

impl<'a> BitSource<'a> {
    fn new(rng: &'a mut SplitMix64) -> Self {
        BitSource { rng, current: 0, left: 0 }
    }

    fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.current = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.current & 1 == 1;
        self.current >>= 1;
        self.left -= 1;
        bit
    }
}

pub struct SetBits<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for SetBits<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
        let bit = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.word_idx * WORD_BITS + bit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_roundtrip_and_canonical_equality() {
        let mut m = BitMatrix::zeros(3, 70);
        m.set(0, 0, true);
        m.set(1, 64, true);
        m.set(2, 69, true);
        assert!(m.get(0, 0) && m.get(1, 64) && m.get(2, 69));
        assert!(!m.get(0, 1));

        let mut n = BitMatrix::zeros(3, 70);
        n.set(0, 0, true);
        n.set(1, 64, true);
        n.set(2, 69, true);
        assert_eq!(m, n);
        n.set(2, 69, false);
        assert_ne!(m, n);
    }

    #[test]
    fn from_stream_words_crosses_row_boundaries() {
        // 2 rows x 5 cols: bits 0..10 of the stream word 0b1010110011,
        // LSB first: row0 = [1,1,0,0,1], row1 = [1,0,1,0,1].
        let m = BitMatrix::from_stream_words(2, 5, &[0b1010110011]);
        let row0: Vec<bool> = (0..5).map(|c| m.get(0, c)).collect();
        let row1: Vec<bool> = (0..5).map(|c| m.get(1, c)).collect();
        assert_eq!(row0, vec![true, true, false, false, true]);
        assert_eq!(row1, vec![true, false, true, false, true]);
    }

    #[test]
    fn complement_is_involution_and_masks_tail() {
        let stream: Vec<u64> = (0..40).map(|i| 0x9E37_79B9u64.wrapping_mul(i + 1)).collect();
        let m = BitMatrix::from_stream_words(7, 131, &stream);
        let c = m.complement();
        for r in 0..7 {
            for col in 0..131 {
                assert_eq!(m.get(r, col), !c.get(r, col));
            }
        }
        assert_eq!(c.complement(), m);
    }

    #[test]
    fn row_set_bits_matches_get() {
        let stream: Vec<u64> = (0..40).map(|i| 0xABCD_EF01u64.wrapping_mul(i * i + 3)).collect();
        let m = BitMatrix::from_stream_words(5, 200, &stream);
        for r in 0..5 {
            let via_iter: Vec<usize> = m.row_set_bits(r).collect();
            let via_get: Vec<usize> = (0..200).filter(|&c| m.get(r, c)).collect();
            assert_eq!(via_iter, via_get);
        }
    }

    #[test]
    fn top_rows_and_masked_count() {
        let stream: Vec<u64> = (0..10).map(|i| 0x1234_5678_9ABC_DEFu64 ^ (i << 40)).collect();
        let m = BitMatrix::from_stream_words(4, 100, &stream);
        let t = m.top_rows(2);
        assert_eq!(t.rows(), 2);
        for r in 0..2 {
            assert_eq!(t.row_words(r), m.row_words(r));
        }

        let mut mask = vec![0u64; m.words_per_row()];
        for c in [3usize, 64, 99] {
            mask[c / 64] |= 1 << (c % 64);
        }
        let expect: u32 = [3usize, 64, 99].iter().map(|&c| m.get(1, c) as u32).sum();
        assert_eq!(m.masked_row_count(1, &mask), expect);
    }

    #[test]
    fn resample_touches_only_requested_region() {
        let stream: Vec<u64> = (0..20).map(|i| 0xFEED_FACEu64.wrapping_mul(i + 11)).collect();
        let m = BitMatrix::from_stream_words(6, 90, &stream);

        let mut rng = SplitMix64::new(31);
        let rc = m.resample_columns(&[2, 40, 88], &mut rng);
        for r in 0..6 {
            for c in 0..90 {
                if ![2, 40, 88].contains(&c) {
                    assert_eq!(m.get(r, c), rc.get(r, c));
                }
            }
        }

        let mut rng = SplitMix64::new(32);
        let rr = m.resample_rows_from(4, &mut rng);
        for r in 0..4 {
            assert_eq!(m.row_words(r), rr.row_words(r));
        }
    }
}

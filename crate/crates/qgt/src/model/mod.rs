//! Problem instances: pooled measurement matrices, planted defective sets,
//! exact integer outcomes, and their deterministic generation and JSON wire
//! format.
//!
//! An instance is `y = A x` where `A` is an `m x n` fair-coin binary matrix,
//! `x` is the 0/1 indicator of `k` defective items, and every arithmetic step
//! is exact. Generation is pinned to a single SplitMix64 stream per seed:
//! matrix entries first (one bit per entry, row-major, bit `t` of the stream
//! being bit `t mod 64` of stream word `t / 64`), then the defective set by
//! partial Fisher-Yates over `[0, n)` using rejection-sampled uniform draws
//! from the same stream.

mod bitmatrix;
mod rng;

pub use bitmatrix::BitMatrix;
pub use rng::{mix, SplitMix64};

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid instance parameters n={n}, k={k}, m={m}: need 0 < k < n and m >= 1")]
    InvalidParams { n: usize, k: usize, m: usize },
    #[error("item set is not strictly increasing")]
    ItemSetNotSorted,
    #[error("item {item} out of bounds (universe size {bound})")]
    ItemOutOfBounds { item: usize, bound: usize },
}

/// Strictly increasing set of item indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemSet(Vec<usize>);

impl ItemSet {
    pub fn empty() -> Self {
        ItemSet(Vec::new())
    }

    /// Wraps an already strictly increasing index list.
    pub fn from_sorted(items: Vec<usize>) -> Result<Self, ModelError> {
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::ItemSetNotSorted);
        }
        Ok(ItemSet(items))
    }

    /// Sorts the indices; duplicates are rejected.
    pub fn from_unsorted(mut items: Vec<usize>) -> Result<Self, ModelError> {
        items.sort_unstable();
        Self::from_sorted(items)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn is_subset_of(&self, other: &ItemSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn union(&self, other: &ItemSet) -> ItemSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        ItemSet(v)
    }

    /// Packed indicator in `BitMatrix` row layout over a `cols`-item universe.
    pub fn to_mask(&self, cols: usize) -> Vec<u64> {
        let mut mask = vec![0u64; cols.div_ceil(64)];
        for i in self.iter() {
            assert!(i < cols, "item {i} out of bounds for universe {cols}");
            mask[i / 64] |= 1u64 << (i % 64);
        }
        mask
    }
}

impl Serialize for ItemSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        ItemSet::from_sorted(items).map_err(D::Error::custom)
    }
}

/// One planted QGT instance. `outcome[j]` is the exact number of defective
/// items in pool `j`, i.e. `popcount(row_j AND defectives)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub matrix: BitMatrix,
    pub defectives: ItemSet,
    pub outcome: Vec<i64>,
}

/// Draws an instance from the pinned SplitMix64 stream for `seed`.
pub fn generate_instance(n: usize, k: usize, m: usize, seed: u64) -> Result<Instance, ModelError> {
    if k == 0 || k >= n || m == 0 {
        return Err(ModelError::InvalidParams { n, k, m });
    }
    let mut rng = SplitMix64::new(seed);
    let total_bits = n * m;
    let words: Vec<u64> = (0..total_bits.div_ceil(64)).map(|_| rng.next_u64()).collect();
    let matrix = BitMatrix::from_stream_words(m, n, &words);

    // Partial Fisher-Yates: pool starts as the identity permutation; k swaps.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.uniform_below((n - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    let defectives = ItemSet(chosen);

    let outcome = outcome_of(&matrix, &defectives);
    Ok(Instance { n, k, m, seed, matrix, defectives, outcome })
}

/// Exact pool counts `A * 1_set` for every row.
pub fn outcome_of(matrix: &BitMatrix, set: &ItemSet) -> Vec<i64> {
    let mask = set.to_mask(matrix.cols());
    (0..matrix.rows())
        .map(|r| matrix.masked_row_count(r, &mask) as i64)
        .collect()
}

/// Complementary instance: matrix `1 - A`, outcome `k - y`. Applying it twice
/// returns the original. The complement keeps the original seed for
/// provenance even though its matrix is no longer that seed's direct output.
pub fn complementary(inst: &Instance) -> Instance {
    Instance {
        n: inst.n,
        k: inst.k,
        m: inst.m,
        seed: inst.seed,
        matrix: inst.matrix.complement(),
        defectives: inst.defectives.clone(),
        outcome: inst.outcome.iter().map(|y| inst.k as i64 - y).collect(),
    }
}

/// Method-of-moments defective-count estimate: `round(2 * mean(y))`, exact
/// integer arithmetic, ties rounded to even.
pub fn estimate_k(y: &[i64]) -> i64 {
    assert!(!y.is_empty(), "estimate_k needs at least one outcome");
    let q = y.len() as i128;
    let r: i128 = 2 * y.iter().map(|&v| v as i128).sum::<i128>();
    let d = r.div_euclid(q);
    let rem = r.rem_euclid(q);
    let rounded = match (2 * rem).cmp(&q) {
        std::cmp::Ordering::Less => d,
        std::cmp::Ordering::Greater => d + 1,
        std::cmp::Ordering::Equal => {
            if d % 2 == 0 {
                d
            } else {
                d + 1
            }
        }
    };
    rounded as i64
}

// ---------------------------------------------------------------------------
// JSON wire format
//
// {"n":..,"k":..,"m":..,"seed":..,"matrix":["<hex>",..],"defectives":[..],
//  "outcome":[..]}
//
// Each matrix row is a lowercase hex string of ceil(n/4) digits; entry i of
// the row is bit (i mod 4) of digit floor(i/4), rows padded to a full final
// digit with zero bits. Round-trips are bit-exact and loading re-validates
// every invariant, including outcome == A * 1_defectives.
// ---------------------------------------------------------------------------

const HEX_DIGITS: &[u8; 16] = b"0123456789abcdef";

pub(crate) fn encode_hex_row(matrix: &BitMatrix, r: usize) -> String {
    let n = matrix.cols();
    let words = matrix.row_words(r);
    let ndigits = n.div_ceil(4);
    let mut out = String::with_capacity(ndigits);
    for t in 0..ndigits {
        let bit = 4 * t;
        let nibble = (words[bit / 64] >> (bit % 64)) & 0xF;
        out.push(HEX_DIGITS[nibble as usize] as char);
    }
    out
}

pub(crate) fn decode_hex_row(s: &str, n: usize) -> Result<Vec<u64>, String> {
    let ndigits = n.div_ceil(4);
    if s.len() != ndigits {
        return Err(format!("row has {} hex digits, expected {ndigits}", s.len()));
    }
    let mut words = vec![0u64; n.div_ceil(64)];
    for (t, ch) in s.bytes().enumerate() {
        let nibble = match ch {
            b'0'..=b'9' => ch - b'0',
            b'a'..=b'f' => ch - b'a' + 10,
            _ => return Err(format!("invalid hex digit {:?} (lowercase required)", ch as char)),
        } as u64;
        let bit = 4 * t;
        words[bit / 64] |= nibble << (bit % 64);
    }
    // Padding bits beyond column n-1 must be zero for the canonical form.
    let extra = 4 * ndigits - n;
    if extra > 0 {
        let last = 4 * ndigits - 4;
        let nibble = (words[last / 64] >> (last % 64)) & 0xF;
        if nibble >> (4 - extra) != 0 {
            return Err("nonzero padding bits in final hex digit".into());
        }
    }
    Ok(words)
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Instance", 7)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("seed", &self.seed)?;
        let rows: Vec<String> = (0..self.m).map(|r| encode_hex_row(&self.matrix, r)).collect();
        st.serialize_field("matrix", &rows)?;
        st.serialize_field("defectives", &self.defectives)?;
        st.serialize_field("outcome", &self.outcome)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct InstanceWire {
    n: usize,
    k: usize,
    m: usize,
    seed: u64,
    matrix: Vec<String>,
    defectives: ItemSet,
    outcome: Vec<i64>,
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = InstanceWire::deserialize(d)?;
        if w.k == 0 || w.k >= w.n || w.m == 0 {
            return Err(D::Error::custom(format!(
                "invalid parameters n={}, k={}, m={}",
                w.n, w.k, w.m
            )));
        }
        if w.matrix.len() != w.m {
            return Err(D::Error::custom(format!(
                "matrix has {} rows, expected m={}",
                w.matrix.len(),
                w.m
            )));
        }
        let mut matrix = BitMatrix::zeros(w.m, w.n);
        for (r, row) in w.matrix.iter().enumerate() {
            let words = decode_hex_row(row, w.n)
                .map_err(|e| D::Error::custom(format!("matrix row {r}: {e}")))?;
            for (c, word) in words.iter().enumerate() {
                for b in 0..64 {
                    let col = c * 64 + b;
                    if col < w.n && (word >> b) & 1 == 1 {
                        matrix.set(r, col, true);
                    }
                }
            }
        }
        if w.defectives.len() != w.k {
            return Err(D::Error::custom(format!(
                "{} defectives listed, expected k={}",
                w.defectives.len(),
                w.k
            )));
        }
        if let Some(bad) = w.defectives.iter().find(|&i| i >= w.n) {
            return Err(D::Error::custom(format!("defective {bad} out of range (n={})", w.n)));
        }
        if w.outcome.len() != w.m {
            return Err(D::Error::custom(format!(
                "{} outcomes listed, expected m={}",
                w.outcome.len(),
                w.m
            )));
        }
        let recomputed = outcome_of(&matrix, &w.defectives);
        if recomputed != w.outcome {
            return Err(D::Error::custom(
                "outcome vector does not match matrix and defective set",
            ));
        }
        Ok(Instance {
            n: w.n,
            k: w.k,
            m: w.m,
            seed: w.seed,
            matrix,
            defectives: w.defectives,
            outcome: w.outcome,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_matches_pinned_oracle_small() {
        let inst = generate_instance(6, 2, 4, 42).unwrap();
        let rows: Vec<String> = (0..4).map(|r| encode_hex_row(&inst.matrix, r)).collect();
        assert_eq!(rows, vec!["51", "a3", "63", "a3"]);
        assert_eq!(inst.defectives.as_slice(), &[1, 4]);
        assert_eq!(inst.outcome, vec![1, 2, 2, 2]);
    }

    #[test]
    fn generation_matches_pinned_oracle_wider() {
        let inst = generate_instance(20, 3, 7, 7).unwrap();
        let rows: Vec<String> = (0..7).map(|r| encode_hex_row(&inst.matrix, r)).collect();
        assert_eq!(
            rows,
            vec!["7dd02", "3954e", "1ebc3", "6c166", "c34f7", "dc3c4", "4020a"]
        );
        assert_eq!(inst.defectives.as_slice(), &[3, 5, 7]);
        assert_eq!(inst.outcome, vec![1, 1, 2, 1, 2, 2, 0]);
    }

    #[test]
    fn generation_is_deterministic_and_param_checked() {
        let a = generate_instance(50, 5, 30, 123).unwrap();
        let b = generate_instance(50, 5, 30, 123).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(50, 5, 30, 124).unwrap();
        assert_ne!(a, c);

        assert!(matches!(
            generate_instance(10, 0, 5, 0),
            Err(ModelError::InvalidParams { .. })
        ));
        assert!(matches!(
            generate_instance(10, 10, 5, 0),
            Err(ModelError::InvalidParams { .. })
        ));
        assert!(matches!(
            generate_instance(10, 3, 0, 0),
            Err(ModelError::InvalidParams { .. })
        ));
    }

    #[test]
    fn outcome_is_exact_and_in_range() {
        let inst = generate_instance(80, 7, 40, 9).unwrap();
        assert_eq!(inst.outcome, outcome_of(&inst.matrix, &inst.defectives));
        assert!(inst.outcome.iter().all(|&y| (0..=7).contains(&y)));
    }

    #[test]
    fn complementary_is_involution_and_consistent() {
        let inst = generate_instance(33, 4, 21, 77).unwrap();
        let comp = complementary(&inst);
        assert_eq!(comp.outcome, outcome_of(&comp.matrix, &comp.defectives));
        for (a, b) in inst.outcome.iter().zip(&comp.outcome) {
            assert_eq!(a + b, 4);
        }
        assert_eq!(complementary(&comp), inst);
    }

    #[test]
    fn estimate_k_rounds_half_to_even() {
        assert_eq!(estimate_k(&[3, 5, 4]), 8);
        assert_eq!(estimate_k(&[1, 0, 0, 0]), 0); // 0.5 -> 0
        assert_eq!(estimate_k(&[1, 1, 1, 0]), 2); // 1.5 -> 2
        assert_eq!(estimate_k(&[2, 2, 2]), 4);
        assert_eq!(estimate_k(&[0]), 0);
    }

    #[test]
    fn estimate_k_tracks_true_k_on_generated_instances() {
        for seed in 0..20 {
            let inst = generate_instance(400, 12, 300, seed).unwrap();
            let est = estimate_k(&inst.outcome);
            assert!((est - 12).abs() <= 2, "estimate {est} far from 12 (seed {seed})");
        }
    }

    #[test]
    fn ones_fraction_is_fair() {
        // 10^4 entries; 4 sigma on the fraction is 4*sqrt(0.25/1e4) = 0.02.
        let inst = generate_instance(100, 3, 100, 1).unwrap();
        let frac = inst.matrix.count_ones() as f64 / 1e4;
        assert!((frac - 0.5).abs() <= 0.02, "ones fraction {frac}");
    }

    #[test]
    fn json_wire_format_is_pinned() {
        let inst = generate_instance(6, 2, 4, 42).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        assert_eq!(
            json,
            "{\"n\":6,\"k\":2,\"m\":4,\"seed\":42,\
             \"matrix\":[\"51\",\"a3\",\"63\",\"a3\"],\
             \"defectives\":[1,4],\"outcome\":[1,2,2,2]}"
                .replace(" ", "")
        );
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        for seed in [0u64, 5, 9999] {
            let inst = generate_instance(67, 6, 23, seed).unwrap();
            let json = serde_json::to_string(&inst).unwrap();
            let back: Instance = serde_json::from_str(&json).unwrap();
            assert_eq!(back, inst);
            assert_eq!(serde_json::to_string(&back).unwrap(), json);
        }
    }

    #[test]
    fn json_loader_rejects_corruption() {
        let inst = generate_instance(6, 2, 4, 42).unwrap();
        let good = serde_json::to_string(&inst).unwrap();

        let bad_outcome = good.replace("[1,2,2,2]", "[1,2,2,1]");
        assert!(serde_json::from_str::<Instance>(&bad_outcome).is_err());

        let bad_hex = good.replace("\"51\"", "\"5G\"");
        assert!(serde_json::from_str::<Instance>(&bad_hex).is_err());

        let bad_upper = good.replace("\"a3\",\"63\"", "\"A3\",\"63\"");
        assert!(serde_json::from_str::<Instance>(&bad_upper).is_err());

        let bad_defectives = good.replace("[1,4]", "[4,1]");
        assert!(serde_json::from_str::<Instance>(&bad_defectives).is_err());

        // Padding bits above column n-1 must be zero: n=6 uses 1.5 digits,
        // so the second digit of each row may only use its low two bits.
        let bad_pad = good.replace("\"51\"", "\"58\"");
        assert!(serde_json::from_str::<Instance>(&bad_pad).is_err());
    }

    #[test]
    fn item_set_invariants() {
        assert!(ItemSet::from_sorted(vec![0, 1, 5]).is_ok());
        assert_eq!(
            ItemSet::from_sorted(vec![1, 1, 2]),
            Err(ModelError::ItemSetNotSorted)
        );
        assert_eq!(ItemSet::from_unsorted(vec![5, 1, 0]).unwrap().as_slice(), &[0, 1, 5]);

        let a = ItemSet::from_sorted(vec![1, 3]).unwrap();
        let b = ItemSet::from_sorted(vec![2, 3, 9]).unwrap();
        assert_eq!(a.union(&b).as_slice(), &[1, 2, 3, 9]);
        assert!(a.is_subset_of(&a.union(&b)));
        assert!(!b.is_subset_of(&a));
        assert!(a.contains(3) && !a.contains(2));
    }
}

//! Item scoring and subset selection: psi and ratio scores, top-t
//! thresholding rules, greedy iterative selection, and the two wrappers
//! (residual padding, row splitting).
//!
//! Every score is an exact integer ratio and every comparison is exact, so
//! selection is a deterministic function of the instance; ties always break
//! toward the smaller item index.

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::{BitMatrix, ItemSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("outcome {value} at row {row} outside [0, {k}]")]
    OutcomeOutOfRange { row: usize, value: i64, k: usize },
    #[error("requested {requested} items but only {available} are selectable")]
    NotEnoughItems { requested: usize, available: usize },
    #[error("base selection returned {size} items, more than k = {k}")]
    BaseOutputTooLarge { size: usize, k: usize },
    #[error("row split keeps {m1} rows, fewer than k = {k}")]
    DegenerateSplit { m1: usize, k: usize },
}

/// Exact score ratio with a positive denominator.
///
/// Ratios are kept unreduced; equality and ordering compare the underlying
/// rationals by i128 cross-multiplication, which cannot overflow here: every
/// score produced in this module has |num| <= m*n*max|y| and den <= m, far
/// inside the 2^63 limbs of the product.
#[derive(Clone, Copy, Debug)]
pub struct Score {
    num: i64,
    den: i64,
}

impl Score {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den > 0, "score denominator must be positive, got {den}");
        Score { num, den }
    }

    pub fn integer(num: i64) -> Self {
        Score { num, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }
}

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

/// Per-column weighted sums and ones counts in one pass over the packed
/// rows: returns (sum_j A_ji w_j, ||A_i||_1) for every column i.
fn column_stats(a: &BitMatrix, weights: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let mut sums = vec![0i64; a.cols()];
    let mut counts = vec![0i64; a.cols()];
    for (j, &w) in weights.iter().enumerate() {
        for i in a.row_set_bits(j) {
            sums[i] += w;
            counts[i] += 1;
        }
    }
    (sums, counts)
}

/// Psi score of every item: the summed outcome of each test on the item's
/// side, psi_i = sum_j (A_ji y_j + (1 - A_ji)(k - y_j)).
///
/// Computed through the closed form 2*sum_j A_ji y_j - sum_j y_j
/// + k*(m - ||A_i||_1); `psi_scores_direct` evaluates the defining sum
/// term by term and the two must agree exactly (checked in tests).
pub fn psi_scores(a: &BitMatrix, y: &[i64], k: usize) -> Result<Vec<Score>, SelectError> {
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    for (row, &value) in y.iter().enumerate() {
        if value < 0 || value > k as i64 {
            return Err(SelectError::OutcomeOutOfRange { row, value, k });
        }
    }
    let (sums, counts) = column_stats(a, y);
    let m = a.rows() as i64;
    let total: i64 = y.iter().sum();
    let k = k as i64;
    Ok((0..a.cols())
        .map(|i| Score::integer(2 * sums[i] - total + k * (m - counts[i])))
        .collect())
}

/// Term-by-term evaluation of the psi sum, kept as an independent
/// cross-check of the closed form used by `psi_scores`.
pub(crate) fn psi_scores_direct(a: &BitMatrix, y: &[i64], k: usize) -> Vec<i64> {
    (0..a.cols())
        .map(|i| {
            (0..a.rows())
                .map(|j| if a.get(j, i) { y[j] } else { k as i64 - y[j] })
                .sum()
        })
        .collect()
}

/// Ratio score of every item against the raw outcome: (sum_j A_ji y_j,
/// ||A_i||_1). A column with no ones scores 0/1.
pub fn phi_basic_scores(a: &BitMatrix, y: &[i64]) -> Vec<Score> {
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    let (sums, counts) = column_stats(a, y);
    ratio_scores(sums, counts)
}

/// Ratio score of every item against the residual r = y - A*1_S:
/// (<A_i, r>, ||A_i||_1). A column with no ones scores 0/1; items already
/// in `s` are still scored (callers exclude them when selecting).
pub fn residual_scores(a: &BitMatrix, y: &[i64], s: &ItemSet) -> Vec<Score> {
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    let mask = s.to_mask(a.cols());
    let r: Vec<i64> = y
        .iter()
        .enumerate()
        .map(|(j, &yj)| yj - a.masked_row_count(j, &mask) as i64)
        .collect();
    let (sums, counts) = column_stats(a, &r);
    ratio_scores(sums, counts)
}

fn ratio_scores(sums: Vec<i64>, counts: Vec<i64>) -> Vec<Score> {
    sums.into_iter()
        .zip(counts)
        .map(|(num, den)| if den == 0 { Score::integer(0) } else { Score::new(num, den) })
        .collect()
}

/// The `t` items outside `exclude` with the largest scores; equal scores
/// keep the smaller index first.
pub fn top_t(scores: &[Score], t: usize, exclude: &ItemSet) -> Result<ItemSet, SelectError> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| !exclude.contains(i)).collect();
    if t > order.len() {
        return Err(SelectError::NotEnoughItems { requested: t, available: order.len() });
    }
    order.sort_unstable_by(|&i, &j| scores[j].cmp(&scores[i]).then_with(|| i.cmp(&j)));
    order.truncate(t);
    Ok(ItemSet::from_unsorted(order).expect("selected indices are distinct"))
}

/// How many items a thresholding rule keeps on an m x n instance with
/// defective count k.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    /// Keep k items.
    TopK,
    /// Keep min(2k, n) items.
    Top2K,
    /// Keep min(m, n) items.
    TopM,
    /// Keep min(t, n) items for an explicit t.
    TopT(usize),
}

impl SelectionRule {
    /// Resolved selection size. Sizes derived from the instance shape clamp
    /// to the universe; TopK deliberately does not, so that an impossible k
    /// surfaces as NotEnoughItems instead of a silently smaller answer.
    pub fn resolve(self, n: usize, m: usize, k: usize) -> usize {
        match self {
            SelectionRule::TopK => k,
            SelectionRule::Top2K => k.saturating_mul(2).min(n),
            SelectionRule::TopM => m.min(n),
            SelectionRule::TopT(t) => t.min(n),
        }
    }
}

/// Thresholding selection: rank every item by psi score and keep the rule's
/// resolved count.
pub fn threshold_select(
    a: &BitMatrix,
    y: &[i64],
    k: usize,
    rule: SelectionRule,
) -> Result<ItemSet, SelectError> {
    let scores = psi_scores(a, y, k)?;
    top_t(&scores, rule.resolve(a.cols(), a.rows(), k), &ItemSet::empty())
}

/// Greedy selection: k rounds, each recomputing residual scores against the
/// set so far and adding the best remaining item (ties toward the smaller
/// index). Always returns exactly k items.
pub fn iterative_thresholding(a: &BitMatrix, y: &[i64], k: usize) -> ItemSet {
    let n = a.cols();
    assert!(k <= n, "cannot select {k} items from a universe of {n}");
    let mut chosen = ItemSet::empty();
    for _ in 0..k {
        let scores = residual_scores(a, y, &chosen);
        let best = (0..n)
            .filter(|&i| !chosen.contains(i))
            .max_by(|&i, &j| scores[i].cmp(&scores[j]).then_with(|| j.cmp(&i)))
            .expect("k <= n leaves a candidate in every round");
        chosen = chosen.union(&ItemSet::from_sorted(vec![best]).expect("singleton"));
    }
    chosen
}

/// Padding wrapper: run `base` (which must return at most k items), then
/// append the best items by residual score against its output until m items
/// are reached or the universe runs out. With m <= k nothing is appended.
pub fn then_thresholding<F>(
    base: F,
    a: &BitMatrix,
    y: &[i64],
    k: usize,
) -> Result<ItemSet, SelectError>
where
    F: FnOnce(&BitMatrix, &[i64], usize) -> Result<ItemSet, SelectError>,
{
    let first = base(a, y, k)?;
    if first.len() > k {
        return Err(SelectError::BaseOutputTooLarge { size: first.len(), k });
    }
    let want = a.rows().saturating_sub(k).min(a.cols() - first.len());
    let scores = residual_scores(a, y, &first);
    let padding = top_t(&scores, want, &first)?;
    Ok(first.union(&padding))
}

/// Row count kept by the splitting wrapper: max(1, m - ceil(c' * sqrt(m ln n))).
pub fn split_point(m: usize, n: usize, c_prime: f64) -> usize {
    assert!(
        c_prime >= 0.0 && c_prime.is_finite(),
        "split constant must be finite and nonnegative, got {c_prime}"
    );
    let cut = (c_prime * ((m as f64) * (n as f64).ln()).sqrt()).ceil() as usize;
    m.saturating_sub(cut).max(1)
}

/// Splitting wrapper: run `base` on the instance truncated to its first
/// split_point(m, n, c_prime) rows. The result is by construction a pure
/// function of those rows; the remaining rows are never read.
pub fn split_rows<F>(
    base: F,
    a: &BitMatrix,
    y: &[i64],
    k: usize,
    c_prime: f64,
) -> Result<ItemSet, SelectError>
where
    F: FnOnce(&BitMatrix, &[i64], usize) -> Result<ItemSet, SelectError>,
{
    assert_eq!(y.len(), a.rows(), "outcome length must match the row count");
    let m1 = split_point(a.rows(), a.cols(), c_prime);
    if m1 < k {
        return Err(SelectError::DegenerateSplit { m1, k });
    }
    if m1 == a.rows() {
        return base(a, y, k);
    }
    let sub = a.top_rows(m1);
    base(&sub, &y[..m1], k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, outcome_of};

    /// 2x3 example used throughout: rows 101 and 011, outcome (1, 0), k=1,
    /// planted defective {0}.
    fn example() -> (BitMatrix, Vec<i64>) {
        let mut a = BitMatrix::zeros(2, 3);
        a.set(0, 0, true);
        a.set(0, 2, true);
        a.set(1, 1, true);
        a.set(1, 2, true);
        (a, vec![1, 0])
    }

    fn set(items: &[usize]) -> ItemSet {
        ItemSet::from_unsorted(items.to_vec()).unwrap()
    }

    fn nums(scores: &[Score]) -> Vec<i64> {
        scores.iter().map(|s| s.num()).collect()
    }

    #[test]
    fn score_comparison_is_exact_rational_order() {
        assert_eq!(Score::new(1, 2), Score::new(2, 4));
        assert!(Score::new(1, 3) < Score::new(1, 2));
        assert!(Score::new(-1, 2) > Score::new(-2, 3));
        assert!(Score::new(-1, 1) < Score::integer(0));
        // Magnitudes far beyond f64's 53-bit mantissa stay exact.
        let big = 1i64 << 60;
        assert!(Score::new(big + 1, big) > Score::new(big, big - 1).min(Score::integer(1)));
        assert!(Score::new(big, big) == Score::integer(1));
        assert!(Score::new(big + 1, big) > Score::integer(1));
    }

    #[test]
    #[should_panic(expected = "denominator")]
    fn nonpositive_denominator_is_rejected() {
        Score::new(1, 0);
    }

    #[test]
    fn psi_matches_hand_example() {
        let (a, y) = example();
        let psi = psi_scores(&a, &y, 1).unwrap();
        assert_eq!(nums(&psi), vec![2, 0, 1]);
        assert!(psi.iter().all(|s| s.den() == 1));
    }

    #[test]
    fn psi_closed_form_matches_direct_sum() {
        // Also exercises the deterministic bounds: psi in [0, mk] everywhere
        // and psi >= m on every planted defective.
        let mut checked = 0;
        for seed in 0..100u64 {
            let n = 5 + (seed as usize * 7) % 36;
            let k = 1 + (seed as usize) % (n - 1);
            let m = 1 + (seed as usize * 13) % 50;
            let inst = generate_instance(n, k, m, seed).unwrap();
            let psi = psi_scores(&inst.matrix, &inst.outcome, k).unwrap();
            let direct = psi_scores_direct(&inst.matrix, &inst.outcome, k);
            assert_eq!(nums(&psi), direct, "seed {seed}");
            for (i, s) in psi.iter().enumerate() {
                assert!(s.num() >= 0 && s.num() <= (m * k) as i64, "psi range, seed {seed}");
                if inst.defectives.contains(i) {
                    assert!(s.num() >= m as i64, "defective {i} psi {} < m={m}", s.num());
                }
            }
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn psi_checks_outcome_range() {
        let (a, _) = example();
        assert_eq!(
            psi_scores(&a, &[1, -1], 1),
            Err(SelectError::OutcomeOutOfRange { row: 1, value: -1, k: 1 })
        );
        assert_eq!(
            psi_scores(&a, &[2, 0], 1),
            Err(SelectError::OutcomeOutOfRange { row: 0, value: 2, k: 1 })
        );
        // k = 0 forces y = 0 and every psi to zero.
        assert_eq!(nums(&psi_scores(&a, &[0, 0], 0).unwrap()), vec![0, 0, 0]);
    }

    #[test]
    fn phi_matches_hand_example_and_zero_rules() {
        let (a, y) = example();
        let phi = phi_basic_scores(&a, &y);
        assert_eq!(phi, vec![Score::new(1, 1), Score::new(0, 1), Score::new(1, 2)]);

        // A column with no ones scores 0/1, and an all-zero outcome zeroes
        // every score.
        let mut b = BitMatrix::zeros(2, 2);
        b.set(0, 0, true);
        let scores = phi_basic_scores(&b, &[3, 5]);
        assert_eq!(scores[1], Score::integer(0));
        assert_eq!(scores[1].den(), 1);
        assert!(phi_basic_scores(&a, &[0, 0]).iter().all(|s| *s == Score::integer(0)));
    }

    #[test]
    fn residual_matches_hand_example_and_reductions() {
        let (a, y) = example();
        // Empty set: identical to the raw ratio scores.
        assert_eq!(residual_scores(&a, &y, &ItemSet::empty()), phi_basic_scores(&a, &y));
        // S = {2}: r = (0, -1), scores (0/1, -1/1, -1/2).
        let scores = residual_scores(&a, &y, &set(&[2]));
        assert_eq!(scores, vec![Score::new(0, 1), Score::new(-1, 1), Score::new(-1, 2)]);
        // S = planted defectives: residual vanishes, every score is zero.
        let inst = generate_instance(30, 4, 18, 5).unwrap();
        let scores = residual_scores(&inst.matrix, &inst.outcome, &inst.defectives);
        assert!(scores.iter().all(|s| *s == Score::integer(0)));
    }

    #[test]
    fn top_t_sorts_and_breaks_ties_low() {
        let scores: Vec<Score> = [2, 0, 1].map(Score::integer).to_vec();
        assert_eq!(top_t(&scores, 2, &ItemSet::empty()).unwrap(), set(&[0, 2]));
        assert_eq!(top_t(&scores, 0, &ItemSet::empty()).unwrap(), ItemSet::empty());

        let tied: Vec<Score> = [1, 1, 0].map(Score::integer).to_vec();
        assert_eq!(top_t(&tied, 1, &ItemSet::empty()).unwrap(), set(&[0]));
        // Excluded items are skipped both in ranking and in availability.
        assert_eq!(top_t(&tied, 1, &set(&[0])).unwrap(), set(&[1]));
        assert_eq!(
            top_t(&tied, 3, &set(&[0])),
            Err(SelectError::NotEnoughItems { requested: 3, available: 2 })
        );
    }

    #[test]
    fn threshold_rules_resolve_and_nest() {
        let (a, y) = example();
        assert_eq!(threshold_select(&a, &y, 1, SelectionRule::TopK).unwrap(), set(&[0]));
        // m = 2 < n keeps the two best items; with m >= n the rule clamps to
        // the whole universe.
        assert_eq!(threshold_select(&a, &y, 1, SelectionRule::TopM).unwrap(), set(&[0, 2]));
        let tall = generate_instance(3, 1, 5, 2).unwrap();
        assert_eq!(
            threshold_select(&tall.matrix, &tall.outcome, 1, SelectionRule::TopM).unwrap(),
            set(&[0, 1, 2])
        );
        assert_eq!(
            threshold_select(&a, &y, 1, SelectionRule::TopT(99)).unwrap(),
            set(&[0, 1, 2])
        );
        assert_eq!(SelectionRule::Top2K.resolve(10, 3, 4), 8);
        assert_eq!(SelectionRule::Top2K.resolve(10, 3, 7), 10);
        assert_eq!(SelectionRule::TopM.resolve(10, 3, 4), 3);

        // The three rules are prefixes of one ranking, so their outputs nest.
        for seed in 0..20u64 {
            let inst = generate_instance(60, 5, 25, seed).unwrap();
            let topk =
                threshold_select(&inst.matrix, &inst.outcome, 5, SelectionRule::TopK).unwrap();
            let top2k =
                threshold_select(&inst.matrix, &inst.outcome, 5, SelectionRule::Top2K).unwrap();
            let topm =
                threshold_select(&inst.matrix, &inst.outcome, 5, SelectionRule::TopM).unwrap();
            assert_eq!(topk.len(), 5);
            assert_eq!(top2k.len(), 10);
            assert_eq!(topm.len(), 25);
            assert!(topk.is_subset_of(&top2k), "seed {seed}");
            assert!(top2k.is_subset_of(&topm), "seed {seed}");
        }
    }

    #[test]
    fn iterative_matches_hand_example_and_edges() {
        let (a, y) = example();
        assert_eq!(iterative_thresholding(&a, &y, 1), set(&[0]));
        assert_eq!(iterative_thresholding(&a, &y, 0), ItemSet::empty());
        assert_eq!(iterative_thresholding(&a, &y, 3), set(&[0, 1, 2]));
    }

    #[test]
    fn then_thresholding_pads_with_residual_top() {
        let (a, y) = example();
        // Base TopK returns {0}; its residual is zero, so the tie rule
        // appends item 1.
        let out = then_thresholding(
            |a, y, k| threshold_select(a, y, k, SelectionRule::TopK),
            &a,
            &y,
            1,
        )
        .unwrap();
        assert_eq!(out, set(&[0, 1]));

        // m = k appends nothing beyond the base output.
        let out = then_thresholding(|_, _, _| Ok(set(&[0, 2])), &a, &y, 2).unwrap();
        assert_eq!(out, set(&[0, 2]));

        // Degenerate base: empty output means pad from the raw ratio scores.
        let out = then_thresholding(|_, _, _| Ok(ItemSet::empty()), &a, &y, 1).unwrap();
        assert_eq!(out, set(&[0]));

        assert_eq!(
            then_thresholding(|_, _, _| Ok(set(&[0, 1, 2])), &a, &y, 2),
            Err(SelectError::BaseOutputTooLarge { size: 3, k: 2 })
        );
    }

    #[test]
    fn split_point_formula() {
        // ln 4096 = 8.3178; ceil(sqrt(1200 * 8.3178)) = ceil(99.91) = 100.
        assert_eq!(split_point(1200, 4096, 1.0), 1100);
        assert_eq!(split_point(1200, 4096, 0.0), 1200);
        assert_eq!(split_point(3, 4096, 5.0), 1);
    }

    #[test]
    fn split_rows_runs_base_on_row_prefix() {
        let m_thresh =
            |a: &BitMatrix, y: &[i64], k: usize| threshold_select(a, y, k, SelectionRule::TopM);

        let inst = generate_instance(64, 4, 40, 11).unwrap();
        // c' = 0 keeps every row: identical to the base on the full instance.
        let full = split_rows(m_thresh, &inst.matrix, &inst.outcome, 4, 0.0).unwrap();
        assert_eq!(full, m_thresh(&inst.matrix, &inst.outcome, 4).unwrap());

        // Resampling the dropped rows (and their outcomes) never changes the
        // output.
        let m1 = split_point(40, 64, 1.0);
        assert!(m1 < 40);
        let out = split_rows(m_thresh, &inst.matrix, &inst.outcome, 4, 1.0).unwrap();
        assert_eq!(out.len(), m1.min(64));
        for salt in 0..10u64 {
            let mut rng = crate::model::SplitMix64::new(1000 + salt);
            let resampled = inst.matrix.resample_rows_from(m1, &mut rng);
            let y2 = outcome_of(&resampled, &inst.defectives);
            assert_eq!(y2[..m1], inst.outcome[..m1]);
            let out2 = split_rows(m_thresh, &resampled, &y2, 4, 1.0).unwrap();
            assert_eq!(out2, out, "salt {salt}");
        }

        // A split that keeps fewer than k rows is an error: m=8, c'=2 cuts
        // ceil(2*sqrt(8 ln 64)) = 12 rows, clamping m1 to 1 < k.
        assert_eq!(split_point(8, 64, 2.0), 1);
        assert_eq!(
            split_rows(m_thresh, &inst.matrix.top_rows(8), &inst.outcome[..8], 7, 2.0),
            Err(SelectError::DegenerateSplit { m1: 1, k: 7 })
        );
    }
}

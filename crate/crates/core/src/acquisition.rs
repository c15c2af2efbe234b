//! BALD acquisition over an unlabeled pool.
//!
//! `a(x) = H[mean_t p_t] - mean_t H[p_t]`, both terms estimated from the
//! same `T` MC-dropout passes.

use crate::error::{Error, Result};
use crate::nets::{Classifier, McSamples};
use crate::parallel::{map_indexed, Workers};
use crate::rng::{RngStream, StreamKey};

/// `-sum p ln p` with `0 ln 0 = 0`, without validation.
pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(&neg) = p.iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "probability component {neg} is invalid"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {s}, not 1")));
    }
    Ok(entropy_unchecked(p))
}

/// Mutual information between the label and the dropout mask.
pub fn bald_score(mc: &McSamples) -> f64 {
    let t = mc.passes() as f64;
    let mut mean = vec![0.0; mc.classes()];
    let mut mean_entropy = 0.0;
    for row in mc.rows() {
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
        mean_entropy += entropy_unchecked(row);
    }
    for m in mean.iter_mut() {
        *m /= t;
    }
    entropy_unchecked(&mean) - mean_entropy / t
}

/// `min(m, pool_len)` distinct positions, uniform without replacement,
/// returned in ascending order.
pub fn subsample_pool(pool_len: usize, m: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if pool_len == 0 {
        return Err(Error::PoolExhausted);
    }
    if m == 0 {
        return Err(Error::InvalidArgument("subsample size must be positive".into()));
    }
    if m >= pool_len {
        return Ok((0..pool_len).collect());
    }
    // Partial Fisher-Yates over the index range.
    let mut idx: Vec<usize> = (0..pool_len).collect();
    for i in 0..m {
        let j = i + rng.below(pool_len - i);
        idx.swap(i, j);
    }
    let mut out = idx[..m].to_vec();
    out.sort_unstable();
    Ok(out)
}

/// BALD score for each item. Item `i` uses the stream `key.index(ids[i])`,
/// so a score depends only on the item, never on its position or on the
/// worker schedule.
pub fn score_pool<'a, F>(
    classifier: &Classifier,
    sample: F,
    ids: &[u64],
    passes: usize,
    key: StreamKey,
    workers: Workers,
) -> Result<Vec<f64>>
where
    F: Fn(usize) -> &'a [f64] + Send + Sync,
{
    if passes == 0 {
        return Err(Error::InvalidArgument("MC dropout needs at least one pass".into()));
    }
    map_indexed(ids.len(), workers, |i| {
        let mc = classifier.mc_predict(sample(i), passes, key.index(ids[i]))?;
        Ok(bald_score(&mc))
    })
}

/// Positions of the `k` highest scores, best first; ties go to the lower
/// position. Returns every position when `k` exceeds the input.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores to select from".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Five-number-ish summary of subsample scores.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

impl ScoreStats {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut v = scores.to_vec();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return ScoreStats::default();
        }
        ScoreStats {
            min: v[0],
            median: quantile_sorted(&v, 0.5),
            max: v[v.len() - 1],
            iqr: quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25),
        }
    }
}

/// One acquisition round.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionReport {
    /// Positions into the pool.
    pub subsample_indices: Vec<usize>,
    /// Score per subsampled item, aligned with `subsample_indices`.
    pub scores: Vec<f64>,
    /// Chosen pool positions, best first.
    pub selected_indices: Vec<usize>,
    pub score_stats: ScoreStats,
}

impl AcquisitionReport {
    pub fn new(subsample_indices: Vec<usize>, scores: Vec<f64>, k: usize) -> Result<Self> {
        if subsample_indices.len() != scores.len() {
            return Err(Error::shape(
                "acquisition_report",
                "indices and scores differ in length",
            ));
        }
        let picked = select_top_k(&scores, k)?;
        let selected_indices = picked.iter().map(|&i| subsample_indices[i]).collect();
        let score_stats = ScoreStats::from_scores(&scores);
        Ok(AcquisitionReport {
            subsample_indices,
            scores,
            selected_indices,
            score_stats,
        })
    }

    /// Scores of the selected items, in selection order.
    pub fn selected_scores(&self) -> Vec<f64> {
        self.selected_indices
            .iter()
            .map(|s| {
                let i = self
                    .subsample_indices
                    .iter()
                    .position(|x| x == s)
                    .expect("selected from subsample");
                self.scores[i]
            })
            .collect()
    }
}

/// Acquisition values at `x_star` and `x_prime` evaluated with identical
/// dropout masks, and their absolute difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropositionGap {
    pub a_star: f64,
    pub a_prime: f64,
    pub gap: f64,
}

pub fn proposition1_gap(
    classifier: &Classifier,
    x_star: &[f64],
    x_prime: &[f64],
    passes: usize,
    shared: StreamKey,
) -> Result<PropositionGap> {
    if x_star.len() != x_prime.len() {
        return Err(Error::shape("proposition1_gap", "x_star and x_prime differ in size"));
    }
    let a_star = bald_score(&classifier.mc_predict(x_star, passes, shared)?);
    let a_prime = bald_score(&classifier.mc_predict(x_prime, passes, shared)?);
    Ok(PropositionGap {
        a_star,
        a_prime,
        gap: (a_star - a_prime).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetConfig;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((shannon_entropy(&[0.25; 4]).unwrap() - 1.386294).abs() < 1e-6);
        // -(0.75 ln 0.75 + 0.25 ln 0.25), evaluated by hand.
        assert!((shannon_entropy(&[0.75, 0.25]).unwrap() - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert!(shannon_entropy(&[-0.1, 1.1]).is_err());
        assert!(shannon_entropy(&[0.5, 0.4]).is_err());
    }

    #[test]
    fn bald_examples() {
        let same = McSamples::new(vec![0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3], 3, 3).unwrap();
        assert!(bald_score(&same).abs() < 1e-12);
        let single = McSamples::new(vec![0.1, 0.9], 1, 2).unwrap();
        assert_eq!(bald_score(&single), 0.0);
        let split = McSamples::new(vec![1.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        assert!((bald_score(&split) - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn subsample_examples() {
        let mut rng = StreamKey::root(1).stream();
        assert_eq!(subsample_pool(5, 10, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(subsample_pool(0, 3, &mut rng).is_err());
        let k = StreamKey::root(2);
        assert_eq!(
            subsample_pool(100, 10, &mut k.stream()).unwrap(),
            subsample_pool(100, 10, &mut k.stream()).unwrap()
        );
    }

    proptest! {
        #[test]
        fn subsample_distinct_in_bounds(len in 1usize..300, m in 1usize..400, seed in any::<u64>()) {
            let idx = subsample_pool(len, m, &mut StreamKey::root(seed).stream()).unwrap();
            prop_assert_eq!(idx.len(), m.min(len));
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| i < len));
        }

        #[test]
        fn top_k_invariant_to_positive_scaling(
            scores in proptest::collection::vec(0.0f64..2.0, 1..50),
            k in 1usize..10,
            c in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            prop_assert_eq!(select_top_k(&scores, k).unwrap(), select_top_k(&scaled, k).unwrap());
            // Natural log vs base 2 is a positive rescaling.
            let base2: Vec<f64> = scores.iter().map(|s| s / std::f64::consts::LN_2).collect();
            prop_assert_eq!(select_top_k(&scores, k).unwrap(), select_top_k(&base2, k).unwrap());
        }
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(select_top_k(&[0.1, 0.9, 0.5], 1).unwrap(), vec![1]);
        assert_eq!(select_top_k(&[0.3, 0.3, 0.3], 1).unwrap(), vec![0]);
        assert_eq!(select_top_k(&[0.1, 0.9, 0.5], 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(select_top_k(&[0.1, 0.9], 5).unwrap(), vec![1, 0]);
        assert!(select_top_k(&[], 1).is_err());
    }

    fn classifier(rate: f64) -> Classifier {
        let mut cfg = NetConfig::desk_default(5, 3);
        cfg.classifier_hidden = vec![16, 16];
        cfg.dropout_rate = rate;
        Classifier::new(&cfg, &mut StreamKey::root(9).stream()).unwrap()
    }

    fn pool(n: usize) -> Vec<Vec<f64>> {
        let mut rng = StreamKey::root(4).stream();
        (0..n)
            .map(|_| (0..5).map(|_| rng.uniform() * 4.0 - 2.0).collect())
            .collect()
    }

    #[test]
    fn zero_dropout_scores_are_zero() {
        let c = classifier(0.0);
        let p = pool(20);
        let ids: Vec<u64> = (0..20).collect();
        let s = score_pool(
            &c,
            |i| p[i].as_slice(),
            &ids,
            10,
            StreamKey::root(1),
            Workers::sequential(),
        )
        .unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn scores_follow_items_not_positions() {
        let c = classifier(0.5);
        let p = pool(30);
        let ids: Vec<u64> = (0..30).collect();
        let key = StreamKey::root(5);
        let s = score_pool(&c, |i| p[i].as_slice(), &ids, 8, key, Workers::sequential()).unwrap();
        let perm: Vec<usize> = (0..30).rev().collect();
        let perm_ids: Vec<u64> = perm.iter().map(|&i| i as u64).collect();
        let sp = score_pool(&c, |i| p[perm[i]].as_slice(), &perm_ids, 8, key, Workers::new(3)).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(sp[j].to_bits(), s[i].to_bits());
        }
        let ln_c = 3f64.ln();
        assert!(s.iter().all(|&v| (-1e-12..=ln_c + 1e-9).contains(&v)));
    }

    #[test]
    fn prop1_gap_examples() {
        let c = classifier(0.5);
        let x = pool(1).remove(0);
        let g = proposition1_gap(&c, &x, &x, 16, StreamKey::root(3)).unwrap();
        assert_eq!(g.gap, 0.0);
        let c0 = classifier(0.0);
        let y: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        let g0 = proposition1_gap(&c0, &x, &y, 16, StreamKey::root(3)).unwrap();
        assert!(g0.a_star.abs() < 1e-12 && g0.a_prime.abs() < 1e-12 && g0.gap < 1e-12);
        assert!(proposition1_gap(&c, &x, &x[..3], 4, StreamKey::root(3)).is_err());
    }

    #[test]
    fn report_selection_dominates() {
        let idx = vec![3, 8, 10, 15, 20];
        let scores = vec![0.2, 0.7, 0.7, 0.1, 0.4];
        let r = AcquisitionReport::new(idx, scores, 2).unwrap();
        assert_eq!(r.selected_indices, vec![8, 10]);
        assert_eq!(r.selected_scores(), vec![0.7, 0.7]);
        assert_eq!(r.score_stats.min, 0.1);
        assert_eq!(r.score_stats.max, 0.7);
        assert!((r.score_stats.median - 0.4).abs() < 1e-15);
        assert!((r.score_stats.iqr - 0.5).abs() < 1e-12);
    }
}

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Silhouette is computed on a seeded subsample above this many points.
pub const SILHOUETTE_MAX_SAMPLES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityIndices {
    pub ari: f64,
    pub ami: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub fowlkes_mallows: f64,
    pub silhouette: Option<f64>,
}

/// Contingency table between true classes (rows) and predicted clusters
/// (columns), with empty rows/columns dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub table: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    // Re-index in sorted label order so the table is stable.
    let sorted: std::collections::BTreeMap<usize, usize> = map.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    (labels.iter().map(|l| sorted[l]).collect(), sorted.len())
}

pub fn contingency(truth: &[usize], pred: &[usize]) -> Result<Contingency> {
    if truth.len() != pred.len() {
        return Err(Error::Size(format!("label lengths differ: {} vs {}", truth.len(), pred.len())));
    }
    if truth.is_empty() {
        return Err(Error::Validation("cannot score an empty labeling".into()));
    }
    let (t, rows) = compact(truth);
    let (p, cols) = compact(pred);
    let mut table = vec![vec![0u64; cols]; rows];
    for (a, b) in t.iter().zip(&p) {
        table[*a][*b] += 1;
    }
    let row_sums = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency { table, row_sums, col_sums, n: truth.len() as u64 })
}

fn comb2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

pub fn adjusted_rand_index(c: &Contingency) -> f64 {
    let sum_ij: f64 = c.table.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_a: f64 = c.row_sums.iter().map(|&v| comb2(v)).sum();
    let sum_b: f64 = c.col_sums.iter().map(|&v| comb2(v)).sum();
    let total = comb2(c.n);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (sum_ij - expected) / denom
}

pub fn fowlkes_mallows(c: &Contingency) -> f64 {
    let tp: f64 = c.table.iter().flatten().map(|&v| comb2(v)).sum();
    let pk: f64 = c.col_sums.iter().map(|&v| comb2(v)).sum();
    let qk: f64 = c.row_sums.iter().map(|&v| comb2(v)).sum();
    if tp == 0.0 || pk == 0.0 || qk == 0.0 {
        return 0.0;
    }
    tp / (pk * qk).sqrt()
}

/// Shannon entropy (natural log) of a count vector.
pub fn entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts.iter().filter(|&&c| c > 0).map(|&c| (c as f64 / n) * (c as f64 / n).ln()).sum::<f64>()
}

pub fn mutual_info(c: &Contingency) -> f64 {
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0 {
                let v = v as f64;
                mi += v / n * (n * v / (c.row_sums[i] as f64 * c.col_sums[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = vec![0.0; n as usize + 1];
    for i in 1..=n as usize {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Expected mutual information under the hypergeometric permutation model.
fn expected_mutual_info(c: &Contingency) -> f64 {
    let n = c.n;
    let lf = ln_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in &c.row_sums {
        for &b in &c.col_sums {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = lf[a as usize] + lf[b as usize] + lf[(n - a) as usize] + lf[(n - b) as usize] - lf[n as usize];
            for nij in lo..=hi {
                let term = (nij as f64 / nf) * (nf * nij as f64 / (a as f64 * b as f64)).ln();
                let lp = fixed
                    - lf[nij as usize]
                    - lf[(a - nij) as usize]
                    - lf[(b - nij) as usize]
                    - lf[(n + nij - a - b) as usize];
                emi += term * lp.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information normalized by the larger of the two entropies.
pub fn adjusted_mutual_info(c: &Contingency) -> f64 {
    let (r, k) = (c.row_sums.len(), c.col_sums.len());
    if (r == 1 && k == 1) || (r as u64 == c.n && k as u64 == c.n) {
        return 1.0;
    }
    let mi = mutual_info(c);
    let emi = expected_mutual_info(c);
    let norm = entropy(&c.row_sums).max(entropy(&c.col_sums));
    let mut denom = norm - emi;
    if denom.abs() < f64::EPSILON {
        denom = if denom < 0.0 { -f64::EPSILON } else { f64::EPSILON };
    }
    (mi - emi) / denom
}

/// Homogeneity (each cluster holds one class) and completeness (each class
/// lands in one cluster).
pub fn homogeneity_completeness(c: &Contingency) -> (f64, f64) {
    let mi = mutual_info(c);
    let hc = entropy(&c.row_sums);
    let hk = entropy(&c.col_sums);
    let h = if hc == 0.0 { 1.0 } else { (mi / hc).min(1.0) };
    let comp = if hk == 0.0 { 1.0 } else { (mi / hk).min(1.0) };
    (h, comp)
}

/// Mean silhouette with Euclidean distance; `None` when fewer than two
/// clusters or every point is its own cluster.
pub fn silhouette(x: &Matrix, assignments: &[usize], seed: u64) -> Result<Option<f64>> {
    let m = x.rows();
    if assignments.len() != m {
        return Err(Error::Size(format!("{} assignments for {m} rows", assignments.len())));
    }
    let (labels, k) = compact(assignments);
    if k < 2 || k >= m {
        return Ok(None);
    }
    let idx: Vec<usize> = if m > SILHOUETTE_MAX_SAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = sample(&mut rng, m, SILHOUETTE_MAX_SAMPLES).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..m).collect()
    };
    let mut sizes = vec![0usize; k];
    for &i in &idx {
        sizes[labels[i]] += 1;
    }
    let scores: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for &j in &idx {
                if j != i {
                    let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    sums[labels[j]] += d.sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let den = a.max(b);
            if den > 0.0 { (b - a) / den } else { 0.0 }
        })
        .collect();
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Ok(None);
    }
    Ok(Some(scores.iter().sum::<f64>() / scores.len() as f64))
}

/// All indices for `assignments` against `truth`; silhouette only when
/// features are given.
pub fn validity_indices(
    assignments: &[usize],
    truth: &[usize],
    features: Option<&Matrix>,
    seed: u64,
) -> Result<ValidityIndices> {
    let c = contingency(truth, assignments)?;
    let (homogeneity, completeness) = homogeneity_completeness(&c);
    let silhouette = match features {
        Some(x) => silhouette(x, assignments, seed)?,
        None => None,
    };
    Ok(ValidityIndices {
        ari: adjusted_rand_index(&c),
        ami: adjusted_mutual_info(&c),
        homogeneity,
        completeness,
        fowlkes_mallows: fowlkes_mallows(&c),
        silhouette,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let mut r: u128 = 1;
        for i in 0..k {
            r = r * (n - i) as u128 / (i + 1) as u128;
        }
        r
    }

    /// Pair counting by brute force over all pairs.
    fn pairs(truth: &[usize], pred: &[usize]) -> (f64, f64, f64, f64) {
        let (mut tp, mut fp, mut fneg, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..truth.len() {
            for j in i + 1..truth.len() {
                match (truth[i] == truth[j], pred[i] == pred[j]) {
                    (true, true) => tp += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fneg += 1.0,
                    (false, false) => tn += 1.0,
                }
            }
        }
        (tp, fp, fneg, tn)
    }

    fn brute_ari(truth: &[usize], pred: &[usize]) -> f64 {
        let (tp, fp, fneg, tn) = pairs(truth, pred);
        let total = tp + fp + fneg + tn;
        let expected = (tp + fneg) * (tp + fp) / total;
        let max = ((tp + fneg) + (tp + fp)) / 2.0;
        if max == expected { 1.0 } else { (tp - expected) / (max - expected) }
    }

    /// Expected MI with exact integer hypergeometric weights.
    fn exact_emi(c: &Contingency) -> f64 {
        let n = c.n;
        let mut emi = 0.0;
        for &a in &c.row_sums {
            for &b in &c.col_sums {
                let lo = (a + b).saturating_sub(n).max(1);
                for nij in lo..=a.min(b) {
                    let p = (binom(a, nij) * binom(n - a, b - nij)) as f64 / binom(n, b) as f64;
                    emi += p * (nij as f64 / n as f64) * ((n * nij) as f64 / (a * b) as f64).ln();
                }
            }
        }
        emi
    }

    #[test]
    fn eight_point_example_matches_pair_counting() {
        let pred = [0, 0, 0, 1, 1, 1, 1, 1];
        let truth = [0, 0, 1, 1, 1, 1, 0, 0];
        let c = contingency(&truth, &pred).unwrap();
        assert!((adjusted_rand_index(&c) - brute_ari(&truth, &pred)).abs() < 1e-12);
        let (tp, fp, fneg, _) = pairs(&truth, &pred);
        assert!((fowlkes_mallows(&c) - tp / ((tp + fp) * (tp + fneg)).sqrt()).abs() < 1e-12);
        assert!((expected_mutual_info(&c) - exact_emi(&c)).abs() < 1e-12);
        let mi = mutual_info(&c);
        let emi = exact_emi(&c);
        let h = entropy(&c.row_sums).max(entropy(&c.col_sums));
        assert!((adjusted_mutual_info(&c) - (mi - emi) / (h - emi)).abs() < 1e-12);
    }

    #[test]
    fn identical_labelings_score_one() {
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [5, 5, 3, 3, 9, 9];
        let v = validity_indices(&pred, &truth, None, 0).unwrap();
        for s in [v.ari, v.ami, v.homogeneity, v.completeness, v.fowlkes_mallows] {
            assert!((s - 1.0).abs() < 1e-12, "{v:?}");
        }
        assert_eq!(v.silhouette, None);
    }

    #[test]
    fn homogeneity_and_completeness_are_asymmetric() {
        // Splitting each class in two keeps clusters pure but spreads classes.
        let truth = [0, 0, 0, 0, 1, 1, 1, 1];
        let pred = [0, 0, 1, 1, 2, 2, 3, 3];
        let (h, c) = homogeneity_completeness(&contingency(&truth, &pred).unwrap());
        assert!((h - 1.0).abs() < 1e-12);
        assert!((c - 0.5).abs() < 1e-12);
    }

    #[test]
    fn silhouette_examples() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [1.0], [1.1]]).unwrap();
        let s = silhouette(&x, &[0, 0, 1, 1], 0).unwrap().unwrap();
        let a = 0.1;
        let b_inner = (0.9 + 1.0) / 2.0;
        let b_outer = (1.0 + 1.1) / 2.0;
        let expected = ((b_inner - a) / b_inner + (b_outer - a) / b_outer) / 2.0;
        assert!((s - expected).abs() < 1e-12);
        assert_eq!(silhouette(&x, &[0, 0, 0, 0], 0).unwrap(), None);
        assert_eq!(silhouette(&x, &[0, 1, 2, 3], 0).unwrap(), None);
    }

    #[test]
    fn random_assignments_score_near_zero_ari() {
        use rand::Rng;
        let truth: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let mut total = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
            total += adjusted_rand_index(&contingency(&truth, &pred).unwrap());
        }
        assert!((total / 100.0).abs() < 0.05);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(contingency(&[0, 1], &[0]), Err(Error::Size(_))));
    }

    proptest! {
        #[test]
        fn ari_and_fmi_match_brute_force(
            pairs_in in proptest::collection::vec((0usize..4, 0usize..4), 2..40)
        ) {
            let truth: Vec<usize> = pairs_in.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs_in.iter().map(|p| p.1).collect();
            let c = contingency(&truth, &pred).unwrap();
            prop_assert!((adjusted_rand_index(&c) - brute_ari(&truth, &pred)).abs() < 1e-9);
            let (tp, fp, fneg, _) = pairs(&truth, &pred);
            let fmi = if tp == 0.0 { 0.0 } else { tp / ((tp + fp) * (tp + fneg)).sqrt() };
            prop_assert!((fowlkes_mallows(&c) - fmi).abs() < 1e-9);
            prop_assert!((expected_mutual_info(&c) - exact_emi(&c)).abs() < 1e-9);
        }

        #[test]
        fn indices_are_label_permutation_invariant(
            pairs_in in proptest::collection::vec((0usize..3, 0usize..3), 2..30)
        ) {
            let truth: Vec<usize> = pairs_in.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs_in.iter().map(|p| p.1).collect();
            let relabeled: Vec<usize> = pred.iter().map(|p| 10 - p).collect();
            let a = validity_indices(&pred, &truth, None, 0).unwrap();
            let b = validity_indices(&relabeled, &truth, None, 0).unwrap();
            prop_assert!((a.ari - b.ari).abs() < 1e-12);
            prop_assert!((a.ami - b.ami).abs() < 1e-12);
            prop_assert!((a.homogeneity - b.homogeneity).abs() < 1e-12);
        }
    }
}

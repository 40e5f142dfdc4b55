use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PairKey;
use crate::model::ElementId;

/// One participant's comparison of a pair, oriented so that positive
/// intensity favours `PairKey::a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub intensity: i8,
    pub weight: f64,
}

/// Saaty ratio for a level of the bidirectional 9-level scale.
pub fn intensity_ratio(intensity: i8) -> f64 {
    let level = intensity.clamp(-4, 4);
    let odd = (2 * level.unsigned_abs() + 1) as f64;
    if level >= 0 {
        odd
    } else {
        1.0 / odd
    }
}

pub const RECIPROCITY_TOLERANCE: f64 = 1e-12;

/// Positive reciprocal matrix for one sibling group.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl PairwiseMatrix {
    /// All-ones matrix: no preference between any pair.
    pub fn uniform(n: usize) -> Self {
        PairwiseMatrix {
            n,
            entries: vec![1.0; n * n],
        }
    }

    /// Takes the upper triangle of `rows` and completes it by reciprocity.
    pub fn from_upper(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = PairwiseMatrix::uniform(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    /// Consistent matrix `a[i][j] = w_i / w_j`.
    pub fn from_weights(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j { 1.0 } else { weights[i] / weights[j] });
            }
        }
        PairwiseMatrix { n, entries }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets `a[i][j]` and its reciprocal.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(value > 0.0, "pairwise ratios must be positive");
        if i == j {
            return;
        }
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = 1.0 / value;
    }

    pub fn is_reciprocal(&self, tolerance: f64) -> bool {
        (0..self.n).all(|i| {
            (self.get(i, i) - 1.0).abs() <= tolerance
                && (0..self.n).all(|j| (self.get(i, j) * self.get(j, i) - 1.0).abs() <= tolerance)
        })
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }
}

/// Aggregates judgments per pair by weighted geometric mean of their ratios
/// and fills unjudged pairs with 1.
pub fn build_pairwise_matrix(
    judgments: &BTreeMap<PairKey, Vec<Judgment>>,
    siblings: &[ElementId],
) -> PairwiseMatrix {
    let n = siblings.len();
    let mut m = PairwiseMatrix::uniform(n);
    for i in 0..n {
        for j in i + 1..n {
            let key = PairKey::new(siblings[i], siblings[j]);
            let Some(list) = judgments.get(&key) else {
                continue;
            };
            let total: f64 = list.iter().map(|j| j.weight).sum();
            if !(total > 0.0) {
                continue;
            }
            // Unanimous judgments skip the log round trip so scale values stay exact.
            let unanimous = list.iter().all(|j| j.intensity == list[0].intensity);
            let toward_a = if unanimous {
                intensity_ratio(list[0].intensity)
            } else {
                let log_mean = list
                    .iter()
                    .map(|j| j.weight * intensity_ratio(j.intensity).ln())
                    .sum::<f64>()
                    / total;
                log_mean.exp()
            };
            // Judgments favour `key.a`; flip when siblings[i] is `key.b`.
            let ratio = if key.a == siblings[i] {
                toward_a
            } else {
                1.0 / toward_a
            };
            m.set(i, j, ratio);
        }
    }
    m
}

/// Row geometric-mean priorities, normalized to sum to 1.
pub fn derive_weights(matrix: &PairwiseMatrix) -> Vec<f64> {
    let n = matrix.size();
    if n == 0 {
        return Vec::new();
    }
    // Mean of logs keeps long products away from overflow.
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            ((0..n).map(|j| matrix.get(i, j).ln()).sum::<f64>() / n as f64).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

pub const POWER_ITERATION_TOLERANCE: f64 = 1e-10;
const POWER_ITERATION_MAX_STEPS: usize = 100_000;

/// Principal eigenvalue and eigenvector (sum-normalized) by power iteration.
pub fn principal_eigenvalue(matrix: &PairwiseMatrix) -> (f64, Vec<f64>) {
    let n = matrix.size();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATION_MAX_STEPS {
        let y = matrix.mul_vec(&x);
        // x sums to 1, so the sum of A x estimates the eigenvalue.
        let next_lambda: f64 = y.iter().sum();
        let next_x: Vec<f64> = y.iter().map(|v| v / next_lambda).collect();
        let delta = next_x
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next_x;
        let settled = (next_lambda - lambda).abs() < POWER_ITERATION_TOLERANCE;
        lambda = next_lambda;
        if delta < POWER_ITERATION_TOLERANCE && settled {
            break;
        }
    }
    (lambda, x)
}

/// Saaty's random consistency index for matrices of size `n`.
pub fn random_index(n: usize) -> f64 {
    const RI: [f64; 16] = [
        0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57,
        1.59,
    ];
    RI[n.min(RI.len() - 1)]
}

/// `((lambda_max - n) / (n - 1)) / RI(n)`; zero for n <= 2.
pub fn consistency_ratio(matrix: &PairwiseMatrix) -> f64 {
    let n = matrix.size();
    if n <= 2 {
        return 0.0;
    }
    let (lambda, _) = principal_eigenvalue(matrix);
    let ci = (lambda - n as f64) / (n as f64 - 1.0);
    (ci / random_index(n)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_scale() {
        let ratios: Vec<f64> = (-4..=4).map(intensity_ratio).collect();
        let expected = [1.0 / 9.0, 1.0 / 7.0, 1.0 / 5.0, 1.0 / 3.0, 1.0, 3.0, 5.0, 7.0, 9.0];
        assert_eq!(ratios, expected);
    }

    fn one_pair(list: Vec<Judgment>) -> PairwiseMatrix {
        let key = PairKey::new(ElementId(1), ElementId(2));
        let judgments = [(key, list)].into_iter().collect();
        build_pairwise_matrix(&judgments, &[ElementId(1), ElementId(2)])
    }

    #[test]
    fn single_judgment_identity() {
        let m = one_pair(vec![Judgment { intensity: 1, weight: 1.0 }]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 1.0 / 3.0);
    }

    #[test]
    fn geometric_mean_symmetry() {
        let m = one_pair(vec![
            Judgment { intensity: 1, weight: 1.0 },
            Judgment { intensity: -1, weight: 1.0 },
        ]);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_mean_of_nine_and_one() {
        let m = one_pair(vec![
            Judgment { intensity: 4, weight: 1.0 },
            Judgment { intensity: 0, weight: 1.0 },
        ]);
        assert!((m.get(0, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_sibling_order_flips_ratio() {
        let key = PairKey::new(ElementId(1), ElementId(2));
        let judgments = [(key, vec![Judgment { intensity: 2, weight: 1.0 }])]
            .into_iter()
            .collect();
        let m = build_pairwise_matrix(&judgments, &[ElementId(2), ElementId(1)]);
        assert_eq!(m.get(0, 1), 1.0 / 5.0);
    }

    #[test]
    fn unjudged_pairs_default_to_one() {
        let m = build_pairwise_matrix(&BTreeMap::new(), &[ElementId(1), ElementId(2), ElementId(3)]);
        assert_eq!(derive_weights(&m), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn small_weight_examples() {
        assert_eq!(derive_weights(&PairwiseMatrix::uniform(1)), vec![1.0]);
        let w = derive_weights(&PairwiseMatrix::from_upper(&[vec![1.0, 2.0], vec![0.5, 1.0]]));
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
        let truth = [0.5, 0.3, 0.2];
        let w = derive_weights(&PairwiseMatrix::from_weights(&truth));
        for (a, b) in w.iter().zip(truth) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn consistency_of_small_and_consistent_matrices() {
        let two = PairwiseMatrix::from_upper(&[vec![1.0, 7.0], vec![1.0 / 7.0, 1.0]]);
        assert_eq!(consistency_ratio(&two), 0.0);
        let consistent = PairwiseMatrix::from_weights(&[0.4, 0.3, 0.2, 0.1]);
        assert!(consistency_ratio(&consistent) < 1e-9);
    }

    /// Largest real root of det(A - lambda I) for a 3x3 matrix, by bisection on
    /// the characteristic polynomial. Shares nothing with power iteration.
    fn lambda_max_3x3(a: [[f64; 3]; 3]) -> f64 {
        let det = |l: f64| {
            let m = [
                [a[0][0] - l, a[0][1], a[0][2]],
                [a[1][0], a[1][1] - l, a[1][2]],
                [a[2][0], a[2][1], a[2][2] - l],
            ];
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        // det(A - l I) -> -inf as l -> inf, and lambda_max >= n for positive
        // reciprocal matrices.
        let (mut lo, mut hi) = (3.0 - 1e-9, 10.0);
        assert!(det(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if det(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn consistency_ratio_matches_characteristic_polynomial() {
        let a = [[1.0, 2.0, 6.0], [0.5, 1.0, 2.0], [1.0 / 6.0, 0.5, 1.0]];
        let lambda = lambda_max_3x3(a);
        let expected = ((lambda - 3.0) / 2.0) / 0.58;
        let m = PairwiseMatrix::from_upper(&a.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        let (power_lambda, _) = principal_eigenvalue(&m);
        assert!((power_lambda - lambda).abs() < 1e-9, "{power_lambda} vs {lambda}");
        assert!((consistency_ratio(&m) - expected).abs() < 1e-8);
        // Frozen from an external eigen-solver run on the same matrix.
        assert!((lambda - 3.018_294_707_289_63).abs() < 1e-9);
        assert!((expected - 0.015_771_299_387_61).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn recovers_consistent_weights(raw in proptest::collection::vec(0.01f64..10.0, 1..=6)) {
            let sum: f64 = raw.iter().sum();
            let truth: Vec<f64> = raw.iter().map(|w| w / sum).collect();
            let m = PairwiseMatrix::from_weights(&truth);
            prop_assert!(m.is_reciprocal(RECIPROCITY_TOLERANCE));
            for (got, want) in derive_weights(&m).iter().zip(&truth) {
                prop_assert!((got - want).abs() < 1e-9);
            }
            prop_assert!(consistency_ratio(&m) <= 1e-9);
        }

        #[test]
        fn aggregation_stays_reciprocal(
            levels in proptest::collection::vec((-4i8..=4, 0.25f64..1.5), 0..12),
            n in 2usize..6,
        ) {
            let ids: Vec<ElementId> = (1..=n as u64).map(ElementId).collect();
            let mut judgments: BTreeMap<PairKey, Vec<Judgment>> = BTreeMap::new();
            for (k, (intensity, weight)) in levels.into_iter().enumerate() {
                let i = k % n;
                let j = (k / n + i + 1) % n;
                if i != j {
                    judgments.entry(PairKey::new(ids[i], ids[j])).or_default().push(Judgment { intensity, weight });
                }
            }
            let m = build_pairwise_matrix(&judgments, &ids);
            prop_assert!(m.is_reciprocal(RECIPROCITY_TOLERANCE));
            let w = derive_weights(&m);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn geometric_mean_matches_eigenvector_on_consistent_groups(
            raw in proptest::collection::vec(1usize..5, 1..=3),
        ) {
            // Weights built from scale ratios keep at most 4 judgments per group
            // on the grid, so both methods must agree.
            let truth: Vec<f64> = raw.iter().map(|&k| (2 * k - 1) as f64).collect();
            let m = PairwiseMatrix::from_weights(&truth);
            let (_, eigen) = principal_eigenvalue(&m);
            for (a, b) in derive_weights(&m).iter().zip(&eigen) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}

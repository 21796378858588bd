//! Partition comparison losses (Binder, VI, one-minus-adjusted-Rand),
//! posterior expected partition loss, and the partition-first greedy
//! summarizer used as a baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::LabelVector;
use crate::para;

/// Joint label counts of two partitions over the same items.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(z1: &LabelVector, z2: &LabelVector) -> Result<Self> {
        if z1.len() != z2.len() {
            return Err(Error::DimensionMismatch(format!(
                "label vectors have lengths {} and {}",
                z1.len(),
                z2.len()
            )));
        }
        // dense remap in order of first appearance, deterministic
        let mut map1: BTreeMap<usize, usize> = BTreeMap::new();
        let mut map2: BTreeMap<usize, usize> = BTreeMap::new();
        for &z in z1.labels() {
            let next = map1.len();
            map1.entry(z).or_insert(next);
        }
        for &z in z2.labels() {
            let next = map2.len();
            map2.entry(z).or_insert(next);
        }
        let (k1, k2) = (map1.len(), map2.len());
        let mut counts = vec![vec![0u64; k2]; k1];
        for (&a, &b) in z1.labels().iter().zip(z2.labels()) {
            counts[map1[&a]][map2[&b]] += 1;
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> =
            (0..k2).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self { counts, row_sums, col_sums, n: z1.len() as u64 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    fn pair_counts(&self) -> (f64, f64, f64) {
        fn choose2(x: u64) -> f64 {
            (x as f64) * (x as f64 - 1.0) / 2.0
        }
        let t1: f64 = self.row_sums.iter().map(|&a| choose2(a)).sum();
        let t2: f64 = self.col_sums.iter().map(|&b| choose2(b)).sum();
        let t12: f64 = self.counts.iter().flatten().map(|&c| choose2(c)).sum();
        (t1, t2, t12)
    }
}

/// Normalized Binder loss: the fraction of item pairs clustered together in
/// exactly one of the two partitions (equal unit costs).
pub fn binder_loss(z1: &LabelVector, z2: &LabelVector) -> Result<f64> {
    if z1.len() < 2 {
        return Err(Error::InvalidArgument("need at least two items".to_string()));
    }
    let table = ContingencyTable::new(z1, z2)?;
    let (t1, t2, t12) = table.pair_counts();
    let total = (table.n as f64) * (table.n as f64 - 1.0) / 2.0;
    Ok((t1 + t2 - 2.0 * t12) / total)
}

/// Variation of information in nats: `H(z₁) + H(z₂) − 2 I(z₁, z₂)`,
/// computed as the sum of the two conditional entropies so each term is
/// nonnegative and equal partitions give exactly 0.
pub fn vi_loss(z1: &LabelVector, z2: &LabelVector) -> Result<f64> {
    let table = ContingencyTable::new(z1, z2)?;
    let n = table.n as f64;
    let mut total = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / n;
                total += p
                    * ((table.row_sums[i] as f64 / c as f64).ln()
                        + (table.col_sums[j] as f64 / c as f64).ln());
            }
        }
    }
    Ok(total)
}

/// One minus the adjusted Rand index (permutation-model correction). Can
/// exceed 1 since ARI may be negative.
pub fn omari_loss(z1: &LabelVector, z2: &LabelVector) -> Result<f64> {
    if z1.len() < 2 {
        return Err(Error::InvalidArgument("need at least two items".to_string()));
    }
    let table = ContingencyTable::new(z1, z2)?;
    let (t1, t2, t12) = table.pair_counts();
    let total = (table.n as f64) * (table.n as f64 - 1.0) / 2.0;
    let expected = t1 * t2 / total;
    let max_index = 0.5 * (t1 + t2);
    if (max_index - expected).abs() < 1e-12 {
        // both partitions trivial (all singletons or one block): equal
        return Ok(0.0);
    }
    let ari = (t12 - expected) / (max_index - expected);
    Ok(1.0 - ari)
}

/// Which partition loss to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionLoss {
    Binder,
    Vi,
    Omari,
}

impl PartitionLoss {
    pub fn name(&self) -> &'static str {
        match self {
            PartitionLoss::Binder => "binder",
            PartitionLoss::Vi => "vi",
            PartitionLoss::Omari => "omari",
        }
    }

    pub fn eval(&self, z1: &LabelVector, z2: &LabelVector) -> Result<f64> {
        match self {
            PartitionLoss::Binder => binder_loss(z1, z2),
            PartitionLoss::Vi => vi_loss(z1, z2),
            PartitionLoss::Omari => omari_loss(z1, z2),
        }
    }
}

impl std::str::FromStr for PartitionLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binder" => Ok(PartitionLoss::Binder),
            "vi" => Ok(PartitionLoss::Vi),
            "omari" => Ok(PartitionLoss::Omari),
            other => Err(Error::InvalidArgument(format!(
                "unknown partition loss {other:?} (expected binder|vi|omari)"
            ))),
        }
    }
}

/// Mean loss of `candidate` against posterior label samples.
pub fn expected_partition_loss(
    loss: PartitionLoss,
    candidate: &LabelVector,
    samples: &[LabelVector],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no posterior samples".to_string()));
    }
    let values = para::par_map_slice(samples, |z| loss.eval(z, candidate));
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(para::pairwise_mean(&values))
}

/// Full symmetric M×M loss matrix over posterior samples, row-major.
pub fn pairwise_loss_matrix(loss: PartitionLoss, samples: &[LabelVector]) -> Result<Vec<f64>> {
    let m = samples.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let values = para::par_map_slice(&pairs, |&(i, j)| loss.eval(&samples[i], &samples[j]));
    let mut matrix = vec![0.0; m * m];
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        matrix[i * m + j] = v;
        matrix[j * m + i] = v;
    }
    Ok(matrix)
}

/// Greedy partition point estimate: the visited sample minimizing the
/// average loss to all samples. Ties break to the lowest index.
pub fn greedy_partition_summary(
    loss: PartitionLoss,
    samples: &[LabelVector],
) -> Result<(usize, LabelVector)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no posterior samples".to_string()));
    }
    let m = samples.len();
    let matrix = pairwise_loss_matrix(loss, samples)?;
    let mut best = 0usize;
    let mut best_avg = f64::INFINITY;
    for i in 0..m {
        let avg = para::pairwise_mean(&matrix[i * m..(i + 1) * m]);
        if avg < best_avg {
            best = i;
            best_avg = avg;
        }
    }
    Ok((best, samples[best].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(labels: &[usize]) -> LabelVector {
        LabelVector::new(labels.to_vec(), None).unwrap()
    }

    /// Brute-force pair scan, independent of the contingency-table path.
    fn binder_by_pair_enumeration(z1: &LabelVector, z2: &LabelVector) -> f64 {
        let n = z1.len();
        let mut disagree = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let same1 = z1.labels()[i] == z1.labels()[j];
                let same2 = z2.labels()[i] == z2.labels()[j];
                if same1 != same2 {
                    disagree += 1;
                }
                pairs += 1;
            }
        }
        disagree as f64 / pairs as f64
    }

    #[test]
    fn losses_vanish_on_equal_partitions() {
        let a = z(&[1, 1, 2, 3, 3]);
        assert_eq!(binder_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(vi_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(omari_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn binder_crossed_pairs() {
        let a = z(&[1, 1, 2, 2]);
        let b = z(&[1, 2, 1, 2]);
        let got = binder_loss(&a, &b).unwrap();
        assert!((got - 4.0 / 6.0).abs() < 1e-15);
        assert!((got - binder_by_pair_enumeration(&a, &b)).abs() < 1e-15);
    }

    #[test]
    fn binder_one_cluster_vs_singletons() {
        let a = z(&[1, 1, 1]);
        let b = z(&[1, 2, 3]);
        assert!((binder_loss(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vi_two_points() {
        let a = z(&[1, 2]);
        let b = z(&[1, 1]);
        assert!((vi_loss(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn vi_matches_entropy_recomputation() {
        // plug-in entropies recomputed directly from raw counts
        let mut l1 = Vec::new();
        let mut l2 = Vec::new();
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..50 {
            l1.push((next() % 4 + 1) as usize);
            l2.push((next() % 3 + 1) as usize);
        }
        let a = z(&l1);
        let b = z(&l2);
        let n = 50.0;
        let count = |labels: &[usize], k: usize| labels.iter().filter(|&&x| x == k).count() as f64;
        let mut h1 = 0.0;
        for k in 1..=4 {
            let c = count(&l1, k);
            if c > 0.0 {
                h1 -= c / n * (c / n).ln();
            }
        }
        let mut h2 = 0.0;
        for k in 1..=3 {
            let c = count(&l2, k);
            if c > 0.0 {
                h2 -= c / n * (c / n).ln();
            }
        }
        let mut mi = 0.0;
        for k in 1..=4 {
            for l in 1..=3 {
                let joint = l1
                    .iter()
                    .zip(&l2)
                    .filter(|(&x, &y)| x == k && y == l)
                    .count() as f64;
                if joint > 0.0 {
                    let p = joint / n;
                    mi += p * (p / ((count(&l1, k) / n) * (count(&l2, l) / n))).ln();
                }
            }
        }
        let expect = h1 + h2 - 2.0 * mi;
        assert!((vi_loss(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn omari_crossed_pairs() {
        // Contingency table is all ones: Σ C(n_ij,2) = 0, T₁ = T₂ = 2,
        // expected = 2·2/6, max = 2, so ARI = −(2/3)/(4/3) = −1/2.
        let a = z(&[1, 1, 2, 2]);
        let b = z(&[1, 2, 1, 2]);
        let got = omari_loss(&a, &b).unwrap();
        assert!((got - 1.5).abs() < 1e-12, "omARI was {got}");
    }

    #[test]
    fn omari_near_one_under_independence() {
        let n = 10_000usize;
        let balanced: Vec<usize> = (0..n).map(|i| i % 4 + 1).collect();
        // deterministic shuffle via xorshift
        let mut shuffled = balanced.clone();
        let mut state = 0x2545F4914F6CDD1Du64;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let j = (state % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let got = omari_loss(&z(&balanced), &z(&shuffled)).unwrap();
        assert!((got - 1.0).abs() < 0.05, "omARI was {got}");
    }

    #[test]
    fn losses_invariant_under_relabeling() {
        let a = z(&[1, 1, 2, 3, 3, 2, 1]);
        let b = z(&[2, 2, 1, 1, 3, 3, 2]);
        // permute cluster ids: 1→7, 2→4, 3→9
        let perm = |labels: &[usize]| -> LabelVector {
            z(&labels.iter().map(|&x| [0, 7, 4, 9][x]).collect::<Vec<_>>())
        };
        let ap = perm(a.labels());
        let bp = perm(b.labels());
        for loss in [PartitionLoss::Binder, PartitionLoss::Vi, PartitionLoss::Omari] {
            let base = loss.eval(&a, &b).unwrap();
            assert!((loss.eval(&ap, &b).unwrap() - base).abs() < 1e-14);
            assert!((loss.eval(&a, &bp).unwrap() - base).abs() < 1e-14);
            assert!((loss.eval(&ap, &bp).unwrap() - base).abs() < 1e-14);
        }
    }

    #[test]
    fn expected_loss_is_arithmetic_mean() {
        let candidate = z(&[1, 1, 2, 2]);
        let s1 = z(&[1, 1, 2, 2]);
        let s2 = z(&[1, 2, 1, 2]);
        let got =
            expected_partition_loss(PartitionLoss::Binder, &candidate, &[s1.clone(), s2.clone()])
                .unwrap();
        let l2 = binder_loss(&s2, &candidate).unwrap();
        assert!((got - l2 / 2.0).abs() < 1e-15);
        assert_eq!(
            expected_partition_loss(PartitionLoss::Binder, &candidate, &[s1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn greedy_summary_prefers_low_average_and_breaks_ties_low() {
        let samples = vec![
            z(&[1, 2, 3, 4]), // singletons: far from the others
            z(&[1, 1, 2, 2]),
            z(&[1, 1, 2, 2]),
        ];
        let (idx, labels) = greedy_partition_summary(PartitionLoss::Binder, &samples).unwrap();
        assert_eq!(idx, 1); // tie between 1 and 2 breaks low
        assert_eq!(labels, samples[1]);

        let all_same = vec![z(&[1, 1]), z(&[1, 1]), z(&[1, 1])];
        let (idx, _) = greedy_partition_summary(PartitionLoss::Vi, &all_same).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = z(&[1, 2]);
        let b = z(&[1, 2, 3]);
        assert!(binder_loss(&a, &b).is_err());
        assert!(vi_loss(&a, &b).is_err());
        assert!(omari_loss(&a, &b).is_err());
    }
}

//! Posterior expected loss over mixing measures, the greedy minimizer over
//! visited samples, and the induced MAP partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DataMatrix, GaussianDensity, LabelVector, MixingMeasure};
use crate::para;
use crate::sliced::{
    distance_between_samples, distance_from_projections, project_measure, sample_directions,
    SlicedKind,
};

/// Whether every pair in the distance matrix shares one direction set
/// (exactly symmetric, exact finite-L triangle inequality) or draws fresh
/// directions per pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    Shared,
    FreshPerPair,
}

impl std::str::FromStr for DirectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(DirectionMode::Shared),
            "fresh" | "fresh_per_pair" => Ok(DirectionMode::FreshPerPair),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction mode {other:?} (expected shared|fresh)"
            ))),
        }
    }
}

/// Settings for one summarization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub kind: SlicedKind,
    /// Wasserstein order p.
    pub order: f64,
    /// Monte Carlo projection count L.
    pub projections: usize,
    pub seed: u64,
    /// Weight floor applied to each draw before distances; 0 disables.
    pub prune_floor: f64,
    pub direction_mode: DirectionMode,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            kind: SlicedKind::MixSw,
            order: 2.0,
            projections: 100,
            seed: 0,
            prune_floor: 1e-8,
            direction_mode: DirectionMode::Shared,
        }
    }
}

/// Symmetric M×M matrix of pairwise distances between posterior draws
/// (p-th power scale).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    m: usize,
    pub kind: SlicedKind,
    pub projections: usize,
    pub order: f64,
    pub seed: u64,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Mean of each row (the approximate posterior expected loss of each
    /// draw as a candidate summary).
    pub fn row_averages(&self) -> Vec<f64> {
        (0..self.m).map(|i| para::pairwise_mean(self.row(i))).collect()
    }
}

/// Pairwise sliced distances between the (pruned) posterior draws. Entries
/// are computed once per unordered pair; in shared mode every pair reuses
/// one direction set seeded by `cfg.seed`.
pub fn build_distance_matrix(
    draws: &[MixingMeasure],
    cfg: &SummaryConfig,
) -> Result<DistanceMatrix> {
    if draws.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two draws, got {}",
            draws.len()
        )));
    }
    let dim = draws[0].dim();
    if draws.iter().any(|g| g.dim() != dim) {
        return Err(Error::DimensionMismatch("draws have mixed dimensions".to_string()));
    }
    let pruned: Vec<MixingMeasure> = para::par_map_slice(draws, |g| g.prune(cfg.prune_floor))
        .into_iter()
        .collect::<Result<_>>()?;
    let m = pruned.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let entries: Vec<Result<f64>> = match cfg.direction_mode {
        DirectionMode::Shared => {
            let dirs = sample_directions(cfg.kind, dim, cfg.projections, cfg.seed);
            let projected = para::par_map_slice(&pruned, |g| project_measure(&dirs, g));
            let projected: Vec<_> = projected.into_iter().collect::<Result<_>>()?;
            para::par_map_slice(&pairs, |&(i, j)| {
                distance_from_projections(cfg.order, &projected[i], &projected[j])
            })
        }
        DirectionMode::FreshPerPair => para::par_map_slice(&pairs, |&(i, j)| {
            let pair_seed = para::derive_seed(cfg.seed, (i * m + j) as u64);
            let dirs = sample_directions(cfg.kind, dim, cfg.projections, pair_seed);
            distance_between_samples(cfg.order, &dirs, &pruned[i], &pruned[j])
        }),
    };
    let mut values = vec![0.0; m * m];
    for (&(i, j), entry) in pairs.iter().zip(entries) {
        let v = entry?;
        values[i * m + j] = v;
        values[j * m + i] = v;
    }
    Ok(DistanceMatrix {
        values,
        m,
        kind: cfg.kind,
        projections: cfg.projections,
        order: cfg.order,
        seed: cfg.seed,
    })
}

/// Index minimizing the average distance to all draws, with the row-average
/// vector for diagnostics. Ties break to the lowest index.
pub fn greedy_select(matrix: &DistanceMatrix) -> (usize, Vec<f64>) {
    let averages = matrix.row_averages();
    let mut best = 0;
    for (i, &avg) in averages.iter().enumerate() {
        if avg < averages[best] {
            best = i;
        }
    }
    (best, averages)
}

/// MAP cluster assignment under a fixed mixing measure: per point the
/// argmax of `log wₖ + log N(yᵢ|μₖ,Σₖ)`. Zero-weight components never win;
/// ties break to the lowest component index.
pub fn map_partition(g_hat: &MixingMeasure, data: &DataMatrix) -> Result<LabelVector> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no data to label".to_string()));
    }
    if data.dim() != g_hat.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {} vs measure dimension {}",
            data.dim(),
            g_hat.dim()
        )));
    }
    let evals: Vec<GaussianDensity> = g_hat.atoms().iter().map(GaussianDensity::new).collect();
    let log_weights: Vec<f64> = g_hat.weights().iter().map(|&w| w.ln()).collect();
    let labels = para::par_map_indexed(data.len(), |i| {
        let y = data.row(i);
        let mut best_k = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (k, (&lw, eval)) in log_weights.iter().zip(&evals).enumerate() {
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let score = lw + eval.log_density(y);
            if score > best_score {
                best_score = score;
                best_k = k;
            }
        }
        best_k + 1
    });
    LabelVector::new(labels, Some(g_hat.len()))
}

/// Result of summarizing a posterior sample of mixing measures.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub chosen_index: usize,
    /// The selected draw, unpruned.
    pub measure: MixingMeasure,
    /// MAP partition induced by the selected draw.
    pub labels: LabelVector,
    /// Expected loss at the optimum (p-th power scale).
    pub expected_loss: f64,
    /// Average distance of every draw to all draws (p-th power scale).
    pub row_averages: Vec<f64>,
}

impl PosteriorSummary {
    /// Density handle of the summary: `F̂ = f * Ĝ`.
    pub fn density(&self, x: &nalgebra::DVector<f64>) -> f64 {
        self.measure.density(x)
    }
}

/// Full pipeline: distance matrix → greedy selection → MAP partition.
pub fn summarize_posterior(
    draws: &[MixingMeasure],
    data: &DataMatrix,
    cfg: &SummaryConfig,
) -> Result<PosteriorSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no posterior draws".to_string()));
    }
    if draws.len() == 1 {
        let labels = map_partition(&draws[0], data)?;
        return Ok(PosteriorSummary {
            chosen_index: 0,
            measure: draws[0].clone(),
            labels,
            expected_loss: 0.0,
            row_averages: vec![0.0],
        });
    }
    let matrix = build_distance_matrix(draws, cfg)?;
    let (chosen, row_averages) = greedy_select(&matrix);
    let expected_loss = row_averages[chosen];
    debug_assert!(row_averages.iter().all(|&v| expected_loss <= v));
    let labels = map_partition(&draws[chosen], data)?;
    Ok(PosteriorSummary {
        chosen_index: chosen,
        measure: draws[chosen].clone(),
        labels,
        expected_loss,
        row_averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use crate::measures::GaussianAtom;
    use nalgebra::DVector;

    fn atom(mean: &[f64], diag: &[f64]) -> GaussianAtom {
        GaussianAtom::new(
            DVector::from_column_slice(mean),
            SpdMatrix::from_diagonal(diag).unwrap(),
        )
        .unwrap()
    }

    fn point_measure(mean: &[f64]) -> MixingMeasure {
        MixingMeasure::new(vec![1.0], vec![atom(mean, &vec![1.0; mean.len()])]).unwrap()
    }

    fn cfg() -> SummaryConfig {
        SummaryConfig { projections: 32, seed: 3, ..SummaryConfig::default() }
    }

    #[test]
    fn identical_draws_give_zero_matrix() {
        let g = point_measure(&[0.0, 0.0]);
        let matrix = build_distance_matrix(&[g.clone(), g], &cfg()).unwrap();
        assert_eq!(matrix.size(), 2);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(matrix.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn matrix_is_exactly_symmetric_with_zero_diagonal() {
        let draws = vec![
            point_measure(&[0.0, 0.0]),
            point_measure(&[1.0, 0.5]),
            point_measure(&[-1.0, 2.0]),
        ];
        for mode in [DirectionMode::Shared, DirectionMode::FreshPerPair] {
            let matrix = build_distance_matrix(
                &draws,
                &SummaryConfig { direction_mode: mode, ..cfg() },
            )
            .unwrap();
            for i in 0..3 {
                assert_eq!(matrix.get(i, i), 0.0);
                for j in 0..3 {
                    assert_eq!(matrix.get(i, j), matrix.get(j, i));
                }
            }
        }
    }

    #[test]
    fn matrix_entries_are_reproducible() {
        let draws = vec![
            point_measure(&[0.0, 0.0]),
            point_measure(&[1.0, 0.5]),
            point_measure(&[-1.0, 2.0]),
            point_measure(&[0.3, -0.7]),
            point_measure(&[2.0, 2.0]),
        ];
        let a = build_distance_matrix(&draws, &cfg()).unwrap();
        let b = build_distance_matrix(&draws, &cfg()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.get(i, j), b.get(i, j));
            }
        }
    }

    #[test]
    fn greedy_select_minimizes_row_average() {
        let draws = vec![
            point_measure(&[0.0, 0.0]),
            point_measure(&[1.0, 0.0]),
            point_measure(&[10.0, 0.0]), // outlier
        ];
        let matrix = build_distance_matrix(&draws, &cfg()).unwrap();
        let (best, averages) = greedy_select(&matrix);
        let brute = (0..3)
            .min_by(|&i, &j| averages[i].partial_cmp(&averages[j]).unwrap())
            .unwrap();
        assert_eq!(best, brute);
        assert_ne!(best, 2);
    }

    #[test]
    fn greedy_select_breaks_ties_low_and_ignores_scale() {
        let mk = |values: Vec<f64>, m: usize| DistanceMatrix {
            values,
            m,
            kind: SlicedKind::MixSw,
            projections: 1,
            order: 2.0,
            seed: 0,
        };
        let zero = mk(vec![0.0; 9], 3);
        assert_eq!(greedy_select(&zero).0, 0);
        // row sums (4, 3, 3): index 1 wins the tie with 2
        let values = vec![0.0, 2.0, 2.0, 2.0, 0.0, 1.0, 2.0, 1.0, 0.0];
        let m = mk(values.clone(), 3);
        assert_eq!(greedy_select(&m).0, 1);
        let scaled = mk(values.iter().map(|v| v * 7.5).collect(), 3);
        assert_eq!(greedy_select(&scaled).0, 1);
    }

    #[test]
    fn map_partition_examples() {
        let single = point_measure(&[0.0]);
        let data = DataMatrix::new(
            vec![DVector::from_column_slice(&[5.0]), DVector::from_column_slice(&[-3.0])],
            1,
        )
        .unwrap();
        let labels = map_partition(&single, &data).unwrap();
        assert_eq!(labels.labels(), &[1, 1]);

        let two = MixingMeasure::new(
            vec![0.5, 0.5],
            vec![atom(&[-2.0], &[1.0]), atom(&[2.0], &[1.0])],
        )
        .unwrap();
        let data = DataMatrix::new(vec![DVector::from_column_slice(&[2.0])], 1).unwrap();
        assert_eq!(map_partition(&two, &data).unwrap().labels(), &[2]);
    }

    #[test]
    fn map_partition_matches_exhaustive_argmax() {
        let g = MixingMeasure::new(
            vec![0.2, 0.5, 0.3],
            vec![atom(&[0.0], &[0.5]), atom(&[1.0], &[2.0]), atom(&[-1.5], &[1.0])],
        )
        .unwrap();
        let data = DataMatrix::new(
            (0..20).map(|i| DVector::from_column_slice(&[i as f64 * 0.3 - 3.0])).collect(),
            1,
        )
        .unwrap();
        let labels = map_partition(&g, &data).unwrap();
        for (i, &z) in labels.labels().iter().enumerate() {
            let y = data.row(i);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (k, (w, a)) in g.weights().iter().zip(g.atoms()).enumerate() {
                let p = w * GaussianDensity::new(a).log_density(y).exp();
                if p > best.1 {
                    best = (k, p);
                }
            }
            assert_eq!(z, best.0 + 1);
        }
    }

    #[test]
    fn zero_weight_components_never_win() {
        let g = MixingMeasure::new(
            vec![0.0, 1.0],
            vec![atom(&[0.0], &[1.0]), atom(&[10.0], &[1.0])],
        )
        .unwrap();
        let data = DataMatrix::new(vec![DVector::from_column_slice(&[0.0])], 1).unwrap();
        assert_eq!(map_partition(&g, &data).unwrap().labels(), &[2]);
    }

    #[test]
    fn single_draw_summary_is_trivial() {
        let g = point_measure(&[0.0, 0.0]);
        let data = DataMatrix::new(vec![DVector::from_column_slice(&[0.1, 0.1])], 2).unwrap();
        let summary = summarize_posterior(&[g.clone()], &data, &cfg()).unwrap();
        assert_eq!(summary.chosen_index, 0);
        assert_eq!(summary.expected_loss, 0.0);
        assert_eq!(summary.measure, g);
    }

    #[test]
    fn duplicate_pair_beats_outlier() {
        let dup = point_measure(&[0.0, 0.0]);
        let draws = vec![dup.clone(), dup.clone(), point_measure(&[8.0, 8.0])];
        let data = DataMatrix::new(vec![DVector::from_column_slice(&[0.0, 0.0])], 2).unwrap();
        let summary = summarize_posterior(&draws, &data, &cfg()).unwrap();
        assert!(summary.chosen_index < 2, "expected a duplicate, got the outlier");
        assert_eq!(summary.chosen_index, 0);
        assert!(summary.expected_loss <= summary.row_averages[2]);
    }
}

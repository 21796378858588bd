//! Grid-based density comparison (total variation and sliced Wasserstein on
//! rectangular grids), the loss tables over posterior draws, and the
//! four-component simulation used by the experiment drivers.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{sample_unit_sphere, SpdMatrix};
use crate::measures::{DataMatrix, GaussianAtom, LabelVector, MixingMeasure};
use crate::para;
use crate::partition::{expected_partition_loss, PartitionLoss};
use crate::sliced::{
    distance_from_projections, project_measure, sample_directions, SlicedKind,
};

/// Rectangular evaluation grid: per-axis bounds and resolution. Values are
/// attached to cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    bounds: Vec<(f64, f64)>,
    resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != resolution.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {} resolutions",
                bounds.len(),
                resolution.len()
            )));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must satisfy lo < hi".to_string()));
        }
        if resolution.iter().any(|&r| r == 0) {
            return Err(Error::InvalidArgument("grid resolution must be positive".to_string()));
        }
        Ok(Self { bounds, resolution })
    }

    /// Bounds `(min yᵢ − margin, max yᵢ + margin)` per axis with a common
    /// resolution.
    pub fn from_data(data: &DataMatrix, margin: f64, resolution: usize) -> Result<Self> {
        let bounds = data
            .bounds()
            .ok_or_else(|| Error::InvalidArgument("cannot build a grid from empty data".to_string()))?;
        Self::new(
            bounds.iter().map(|&(lo, hi)| (lo - margin, hi + margin)).collect(),
            vec![resolution; data.dim()],
        )
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.bounds
            .iter()
            .zip(&self.resolution)
            .map(|(&(lo, hi), &r)| (hi - lo) / r as f64)
            .product()
    }

    /// Center of the cell with flat index `idx` (last axis fastest).
    pub fn center(&self, idx: usize) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        let mut rem = idx;
        for axis in (0..d).rev() {
            let r = self.resolution[axis];
            let i = rem % r;
            rem /= r;
            let (lo, hi) = self.bounds[axis];
            let width = (hi - lo) / r as f64;
            out[axis] = lo + (i as f64 + 0.5) * width;
        }
        out
    }
}

/// Density values evaluated at the cell centers of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass under the midpoint rule.
    pub fn mass(&self) -> f64 {
        para::pairwise_sum(&self.values) * self.spec.cell_volume()
    }

    /// CSV of (coordinates, value) rows, one line per cell.
    pub fn to_csv(&self, provenance: &str) -> String {
        let d = self.spec.dim();
        let mut out = String::new();
        let _ = writeln!(out, "# {provenance}");
        let header: Vec<String> =
            (0..d).map(|a| format!("x{}", a + 1)).chain(["value".to_string()]).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for (idx, v) in self.values.iter().enumerate() {
            let c = self.spec.center(idx);
            let fields: Vec<String> =
                c.iter().map(|x| format!("{x:.16e}")).chain([format!("{v:.16e}")]).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Evaluates `f` at every cell center. No normalization is applied.
pub fn density_on_grid<F>(f: F, spec: &GridSpec) -> DensityGrid
where
    F: Fn(&DVector<f64>) -> f64 + Sync + Send,
{
    let values = para::par_map_indexed(spec.cells(), |idx| {
        let v = f(&spec.center(idx));
        debug_assert!(v >= 0.0 && v.is_finite());
        v
    });
    DensityGrid { spec: spec.clone(), values }
}

/// Grid of a mixture density.
pub fn measure_density_grid(g: &MixingMeasure, spec: &GridSpec) -> DensityGrid {
    let evals = g.density_evals();
    density_on_grid(move |x| evals.density(x), spec)
}

/// Grid of the average density of several measures (the partition-first
/// baselines' `E[F | ẑ]` over refreshed draws).
pub fn mean_density_grid(measures: &[MixingMeasure], spec: &GridSpec) -> Result<DensityGrid> {
    if measures.is_empty() {
        return Err(Error::InvalidArgument("no measures to average".to_string()));
    }
    let grids: Vec<DensityGrid> =
        para::par_map_slice(measures, |g| measure_density_grid(g, spec));
    let cells = spec.cells();
    let values = (0..cells)
        .map(|idx| {
            let column: Vec<f64> = grids.iter().map(|g| g.values[idx]).collect();
            para::pairwise_mean(&column)
        })
        .collect();
    Ok(DensityGrid { spec: spec.clone(), values })
}

fn check_same_grid(a: &DensityGrid, b: &DensityGrid) -> Result<()> {
    if a.spec != b.spec {
        return Err(Error::GridMismatch(
            "density grids have different bounds or resolution".to_string(),
        ));
    }
    Ok(())
}

/// Total variation on a shared grid: `0.5 Σ |a − b| · cellvol`. Values are
/// used as-is (no renormalization of grid mass).
pub fn tv_on_grid(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    check_same_grid(a, b)?;
    let diffs: Vec<f64> =
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(0.5 * para::pairwise_sum(&diffs) * a.spec.cell_volume())
}

/// Shared projection machinery for sliced Wasserstein between grids with a
/// common support: directions are sampled once and each direction stores
/// the sort permutation of the projected cell centers, so comparing two
/// grids is a single linear sweep per direction.
pub struct GridSwContext {
    spec: GridSpec,
    order: f64,
    sorted_values: Vec<Vec<f64>>,
    perms: Vec<Vec<u32>>,
}

impl GridSwContext {
    pub fn new(spec: &GridSpec, projections: usize, order: f64, seed: u64) -> Result<Self> {
        if projections == 0 {
            return Err(Error::InvalidArgument("need at least one projection".to_string()));
        }
        if order < 1.0 {
            return Err(Error::InvalidArgument(format!("order p={order} must be >= 1")));
        }
        let d = spec.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<DVector<f64>> = (0..projections)
            .map(|_| sample_unit_sphere(d, &mut rng).as_vector().clone())
            .collect();
        let cells = spec.cells();
        let projected = para::par_map_slice(&dirs, |v| {
            let mut values: Vec<f64> = (0..cells).map(|idx| v.dot(&spec.center(idx))).collect();
            let mut perm: Vec<u32> = (0..cells as u32).collect();
            perm.sort_by(|&i, &j| {
                values[i as usize].partial_cmp(&values[j as usize]).unwrap()
            });
            values.sort_by(|x, y| x.partial_cmp(y).unwrap());
            (values, perm)
        });
        let mut sorted_values = Vec::with_capacity(projections);
        let mut perms = Vec::with_capacity(projections);
        for (values, perm) in projected {
            sorted_values.push(values);
            perms.push(perm);
        }
        Ok(Self { spec: spec.clone(), order, sorted_values, perms })
    }

    /// Simplex weights of a grid (values × cell volume, renormalized).
    fn grid_weights(&self, g: &DensityGrid) -> Result<Vec<f64>> {
        if g.spec != self.spec {
            return Err(Error::GridMismatch("grid does not match the context".to_string()));
        }
        let total = para::pairwise_sum(&g.values);
        if total <= 0.0 {
            return Err(Error::InvalidArgument("grid carries no mass".to_string()));
        }
        Ok(g.values.iter().map(|v| v / total).collect())
    }

    /// One-dimensional `W_p^p` sweep over a shared sorted support, with the
    /// weights of both measures read through the sort permutation.
    fn directional(&self, l: usize, wa: &[f64], wb: &[f64]) -> f64 {
        let values = &self.sorted_values[l];
        let perm = &self.perms[l];
        let n = values.len();
        let (mut i, mut j) = (0usize, 0usize);
        let mut rem_a = wa[perm[0] as usize];
        let mut rem_b = wb[perm[0] as usize];
        let mut total = 0.0;
        while i < n && j < n {
            let mass = rem_a.min(rem_b);
            if mass > 0.0 {
                let d = (values[i] - values[j]).abs();
                total += if self.order == 2.0 {
                    mass * d * d
                } else if self.order == 1.0 {
                    mass * d
                } else {
                    mass * d.powf(self.order)
                };
            }
            rem_a -= mass;
            rem_b -= mass;
            if rem_a <= 0.0 {
                i += 1;
                if i < n {
                    rem_a = wa[perm[i] as usize];
                }
            }
            if rem_b <= 0.0 {
                j += 1;
                if j < n {
                    rem_b = wb[perm[j] as usize];
                }
            }
        }
        total
    }

    /// Sliced distance between two grids on the shared direction set,
    /// reported as the p-th root.
    pub fn distance(&self, a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
        let wa = self.grid_weights(a)?;
        let wb = self.grid_weights(b)?;
        let per_dir = para::par_map_indexed(self.sorted_values.len(), |l| {
            self.directional(l, &wa, &wb)
        });
        Ok(para::pairwise_mean(&per_dir).powf(1.0 / self.order))
    }
}

/// Sliced Wasserstein between two grids, treating each as a discrete
/// measure on cell centers (weights ∝ value × cell volume, renormalized).
/// Returns the p-th root of the Monte Carlo estimate.
pub fn sw_on_grid(
    a: &DensityGrid,
    b: &DensityGrid,
    projections: usize,
    order: f64,
    seed: u64,
) -> Result<f64> {
    check_same_grid(a, b)?;
    let ctx = GridSwContext::new(&a.spec, projections, order, seed)?;
    ctx.distance(a, b)
}

/// A rows-by-columns result table with one labeled row per method.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl Table {
    /// CSV with a leading provenance comment line. Numbers carry 17
    /// significant digits; absent cells are empty.
    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {provenance}");
        let _ = writeln!(out, "method,{}", self.columns.join(","));
        for (method, values) in &self.rows {
            let fields: Vec<String> = values
                .iter()
                .map(|v| v.map_or(String::new(), |x| format!("{x:.16e}")))
                .collect();
            let _ = writeln!(out, "{method},{}", fields.join(","));
        }
        out
    }

    pub fn cell(&self, method: &str, column: &str) -> Option<f64> {
        let col = self.columns.iter().position(|c| c == column)?;
        let row = self.rows.iter().find(|(m, _)| m == method)?;
        row.1[col]
    }
}

/// Clustering table: occupied clusters plus expected Binder/VI/omARI of
/// every method's labels against the posterior label draws, and losses to
/// the truth when given.
pub fn clustering_table(
    methods: &[(String, LabelVector)],
    draw_labels: &[LabelVector],
    truth: Option<&LabelVector>,
) -> Result<Table> {
    let mut columns = vec!["k_n".to_string()];
    for loss in ["binder", "vi", "omari"] {
        columns.push(format!("expected_{loss}"));
        if truth.is_some() {
            columns.push(format!("{loss}_vs_truth"));
        }
    }
    let losses = [PartitionLoss::Binder, PartitionLoss::Vi, PartitionLoss::Omari];
    let mut rows = Vec::new();
    for (name, labels) in methods {
        let mut values = vec![Some(labels.occupied_clusters() as f64)];
        for loss in losses {
            values.push(Some(expected_partition_loss(loss, labels, draw_labels)?));
            if let Some(truth) = truth {
                values.push(Some(loss.eval(labels, truth)?));
            }
        }
        rows.push((name.clone(), values));
    }
    Ok(Table { columns, rows })
}

/// Density table: expected TV and sliced distance of each method's density
/// grid against the per-draw density grids, plus losses to the truth grid
/// when given. TV uses raw grid values; the sliced distance renormalizes
/// each grid to a probability measure.
pub fn density_table(
    methods: &[(String, DensityGrid)],
    draw_grids: &[DensityGrid],
    truth: Option<&DensityGrid>,
    projections: usize,
    order: f64,
    seed: u64,
) -> Result<Table> {
    if methods.is_empty() || draw_grids.is_empty() {
        return Err(Error::InvalidArgument("need methods and draws".to_string()));
    }
    let spec = methods[0].1.spec().clone();
    let ctx = GridSwContext::new(&spec, projections, order, seed)?;
    let mut columns = vec!["expected_tv".to_string()];
    if truth.is_some() {
        columns.push("tv_vs_truth".to_string());
    }
    columns.push("expected_sw".to_string());
    if truth.is_some() {
        columns.push("sw_vs_truth".to_string());
    }
    let mut rows = Vec::new();
    for (name, grid) in methods {
        let tvs: Vec<f64> = para::par_map_slice(draw_grids, |d| tv_on_grid(grid, d))
            .into_iter()
            .collect::<Result<_>>()?;
        let sws: Vec<f64> = para::par_map_slice(draw_grids, |d| ctx.distance(grid, d))
            .into_iter()
            .collect::<Result<_>>()?;
        let mut values = vec![Some(para::pairwise_mean(&tvs))];
        if let Some(truth) = truth {
            values.push(Some(tv_on_grid(grid, truth)?));
        }
        values.push(Some(para::pairwise_mean(&sws)));
        if let Some(truth) = truth {
            values.push(Some(ctx.distance(grid, truth)?));
        }
        rows.push((name.clone(), values));
    }
    Ok(Table { columns, rows })
}

/// Mixing-measure table: for each method's summary measure and each sliced
/// metric, the expected distance to the posterior draws (and to the truth
/// measure when given). Distances are reported as p-th roots; each metric
/// shares one direction set across every pair.
#[allow(clippy::too_many_arguments)]
pub fn mixing_measure_table(
    methods: &[(String, MixingMeasure)],
    draws: &[MixingMeasure],
    truth: Option<&MixingMeasure>,
    metrics: &[SlicedKind],
    projections: usize,
    order: f64,
    seed: u64,
    prune_floor: f64,
) -> Result<Table> {
    if methods.is_empty() || draws.is_empty() {
        return Err(Error::InvalidArgument("need methods and draws".to_string()));
    }
    let dim = draws[0].dim();
    let pruned_draws: Vec<MixingMeasure> =
        para::par_map_slice(draws, |g| g.prune(prune_floor)).into_iter().collect::<Result<_>>()?;
    let mut columns = Vec::new();
    let mut per_metric: Vec<Vec<(f64, Option<f64>)>> = Vec::new();
    for (mi, &metric) in metrics.iter().enumerate() {
        columns.push(format!("expected_{}", metric.name()));
        if truth.is_some() {
            columns.push(format!("{}_vs_truth", metric.name()));
        }
        let dirs =
            sample_directions(metric, dim, projections, para::derive_seed(seed, mi as u64));
        let projected_draws = para::par_map_slice(&pruned_draws, |g| project_measure(&dirs, g));
        let projected_draws: Vec<_> = projected_draws.into_iter().collect::<Result<_>>()?;
        let projected_truth = match truth {
            Some(t) => Some(project_measure(&dirs, &t.prune(prune_floor)?)?),
            None => None,
        };
        let mut column = Vec::new();
        for (_, measure) in methods {
            let projected = project_measure(&dirs, &measure.prune(prune_floor)?)?;
            let rooted: Vec<f64> = para::par_map_slice(&projected_draws, |d| {
                distance_from_projections(order, &projected, d).map(|v| v.powf(1.0 / order))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let expected = para::pairwise_mean(&rooted);
            let vs_truth = match &projected_truth {
                Some(t) => Some(
                    distance_from_projections(order, &projected, t)?.powf(1.0 / order),
                ),
                None => None,
            };
            column.push((expected, vs_truth));
        }
        per_metric.push(column);
    }
    let mut rows = Vec::new();
    for (ri, (name, _)) in methods.iter().enumerate() {
        let mut values = Vec::new();
        for column in &per_metric {
            let (expected, vs_truth) = column[ri];
            values.push(Some(expected));
            if truth.is_some() {
                values.push(vs_truth);
            }
        }
        rows.push((name.clone(), values));
    }
    Ok(Table { columns, rows })
}

/// Draws `n` points from the equal-weight four-component Gaussian mixture
/// with means (±2, ±2) and covariance 1.5²·I₂. Returns the data, the true
/// mixing measure, and the component labels.
pub fn simulate_four_component(
    n: usize,
    seed: u64,
) -> Result<(DataMatrix, MixingMeasure, LabelVector)> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".to_string()));
    }
    let means = [[-2.0, -2.0], [2.0, -2.0], [-2.0, 2.0], [2.0, 2.0]];
    let sd = 1.5;
    let cov = SpdMatrix::from_diagonal(&[sd * sd, sd * sd])?;
    let atoms: Vec<GaussianAtom> = means
        .iter()
        .map(|m| GaussianAtom::new(DVector::from_column_slice(m), cov.clone()))
        .collect::<Result<_>>()?;
    let truth = MixingMeasure::new(vec![0.25; 4], atoms)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..4);
        labels.push(k + 1);
        let x = means[k][0] + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let y = means[k][1] + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        rows.push(DVector::from_column_slice(&[x, y]));
    }
    Ok((DataMatrix::new(rows, 2)?, truth, LabelVector::new(labels, Some(4))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_1d_grid(mean: f64, var: f64, spec: &GridSpec) -> DensityGrid {
        density_on_grid(
            |x| {
                (-0.5 * (x[0] - mean) * (x[0] - mean) / var).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt()
            },
            spec,
        )
    }

    #[test]
    fn grid_spec_from_data_applies_margin_rule() {
        let data = DataMatrix::new(
            vec![
                DVector::from_column_slice(&[0.0, 10.0]),
                DVector::from_column_slice(&[4.0, -2.0]),
            ],
            2,
        )
        .unwrap();
        let spec = GridSpec::from_data(&data, 1.0, 100).unwrap();
        assert_eq!(spec.bounds(), &[(-1.0, 5.0), (-3.0, 11.0)]);
        assert_eq!(spec.resolution(), &[100, 100]);
        assert_eq!(spec.cells(), 10_000);
    }

    #[test]
    fn standard_normal_mass_on_wide_grid() {
        let spec = GridSpec::new(vec![(-6.0, 6.0), (-6.0, 6.0)], vec![100, 100]).unwrap();
        let g = MixingMeasure::new(
            vec![1.0],
            vec![GaussianAtom::new(DVector::zeros(2), SpdMatrix::identity(2)).unwrap()],
        )
        .unwrap();
        let grid = measure_density_grid(&g, &spec);
        let mass = grid.mass();
        assert!((0.995..=1.0 + 1e-6).contains(&mass), "mass {mass}");
    }

    #[test]
    fn zero_density_grid_is_all_zeros() {
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![16]).unwrap();
        let grid = density_on_grid(|_| 0.0, &spec);
        assert!(grid.values().iter().all(|&v| v == 0.0));
        assert_eq!(grid.mass(), 0.0);
    }

    #[test]
    fn tv_identical_grids_is_zero() {
        let spec = GridSpec::new(vec![(-8.0, 8.0)], vec![200]).unwrap();
        let a = gaussian_1d_grid(0.0, 1.0, &spec);
        assert_eq!(tv_on_grid(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn tv_disjoint_supports_is_one() {
        let spec = GridSpec::new(vec![(-30.0, 30.0)], vec![2000]).unwrap();
        let a = gaussian_1d_grid(-15.0, 0.25, &spec);
        let b = gaussian_1d_grid(15.0, 0.25, &spec);
        let tv = tv_on_grid(&a, &b).unwrap();
        assert!((tv - 1.0).abs() < 1e-2, "tv {tv}");
    }

    #[test]
    fn tv_matches_fine_quadrature_of_shifted_normals() {
        // TV(N(0,1), N(0.1,1)) via a much finer independent quadrature
        let spec = GridSpec::new(vec![(-8.0, 8.1)], vec![400]).unwrap();
        let a = gaussian_1d_grid(0.0, 1.0, &spec);
        let b = gaussian_1d_grid(0.1, 1.0, &spec);
        let got = tv_on_grid(&a, &b).unwrap();
        let fine = 2_000_000usize;
        let width = 16.1 / fine as f64;
        let mut oracle = 0.0;
        for i in 0..fine {
            let x = -8.0 + (i as f64 + 0.5) * width;
            let pa = (-0.5 * x * x).exp();
            let pb = (-0.5 * (x - 0.1) * (x - 0.1)).exp();
            oracle += (pa - pb).abs();
        }
        oracle *= 0.5 * width / (2.0 * std::f64::consts::PI).sqrt();
        assert!((got - oracle).abs() < 1e-3, "grid {got} vs quadrature {oracle}");
    }

    #[test]
    fn tv_rejects_mismatched_grids() {
        let a = gaussian_1d_grid(0.0, 1.0, &GridSpec::new(vec![(-8.0, 8.0)], vec![100]).unwrap());
        let b = gaussian_1d_grid(0.0, 1.0, &GridSpec::new(vec![(-8.0, 8.0)], vec![200]).unwrap());
        assert!(tv_on_grid(&a, &b).is_err());
    }

    #[test]
    fn sw_on_grid_self_distance_and_symmetry() {
        let spec = GridSpec::new(vec![(-5.0, 5.0), (-5.0, 5.0)], vec![20, 20]).unwrap();
        let g = MixingMeasure::new(
            vec![1.0],
            vec![GaussianAtom::new(DVector::zeros(2), SpdMatrix::identity(2)).unwrap()],
        )
        .unwrap();
        let a = measure_density_grid(&g, &spec);
        assert_eq!(sw_on_grid(&a, &a, 64, 2.0, 5).unwrap(), 0.0);
        let h = MixingMeasure::new(
            vec![1.0],
            vec![GaussianAtom::new(
                DVector::from_column_slice(&[1.0, 0.0]),
                SpdMatrix::identity(2),
            )
            .unwrap()],
        )
        .unwrap();
        let b = measure_density_grid(&h, &spec);
        let ab = sw_on_grid(&a, &b, 64, 2.0, 5).unwrap();
        let ba = sw_on_grid(&b, &a, 64, 2.0, 5).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0);
    }

    #[test]
    fn sw_on_grid_point_masses_match_analytic_factor() {
        // Grids with one loaded cell each, displaced by u: the sliced
        // W₂ is ‖u‖·√(E⟨v,û⟩²) = ‖u‖/√d.
        let spec = GridSpec::new(vec![(0.0, 4.0), (0.0, 4.0)], vec![4, 4]).unwrap();
        let mut a_vals = vec![0.0; 16];
        let mut b_vals = vec![0.0; 16];
        a_vals[0] = 1.0; // center (0.5, 0.5)
        b_vals[15] = 1.0; // center (3.5, 3.5)
        let a = DensityGrid { spec: spec.clone(), values: a_vals };
        let b = DensityGrid { spec: spec.clone(), values: b_vals };
        let u = 3.0f64 * std::f64::consts::SQRT_2;
        let expect = u / 2.0f64.sqrt();
        let got = sw_on_grid(&a, &b, 100_000, 2.0, 9).unwrap();
        assert!((got - expect).abs() < 0.02 * expect, "got {got}, expected {expect}");
    }

    #[test]
    fn sw_on_grid_seed_stability() {
        let spec = GridSpec::new(vec![(-4.0, 4.0), (-4.0, 4.0)], vec![15, 15]).unwrap();
        let g1 = MixingMeasure::new(
            vec![1.0],
            vec![GaussianAtom::new(DVector::zeros(2), SpdMatrix::identity(2)).unwrap()],
        )
        .unwrap();
        let g2 = MixingMeasure::new(
            vec![1.0],
            vec![GaussianAtom::new(
                DVector::from_column_slice(&[0.7, -0.2]),
                SpdMatrix::from_diagonal(&[0.8, 1.3]).unwrap(),
            )
            .unwrap()],
        )
        .unwrap();
        let a = measure_density_grid(&g1, &spec);
        let b = measure_density_grid(&g2, &spec);
        let s1 = sw_on_grid(&a, &b, 1000, 2.0, 1).unwrap();
        let s2 = sw_on_grid(&a, &b, 1000, 2.0, 2).unwrap();
        assert!((s1 - s2).abs() / s1.max(s2) < 0.05);
    }

    #[test]
    fn sw_on_grid_rejects_zero_mass() {
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![8]).unwrap();
        let zero = density_on_grid(|_| 0.0, &spec);
        let one = density_on_grid(|_| 1.0, &spec);
        assert!(sw_on_grid(&zero, &one, 8, 2.0, 0).is_err());
    }

    #[test]
    fn simulation_matches_stated_mixture() {
        let (data, truth, labels) = simulate_four_component(200, 7).unwrap();
        assert_eq!(data.len(), 200);
        assert_eq!(data.dim(), 2);
        assert_eq!(labels.len(), 200);
        assert_eq!(truth.len(), 4);
        assert!(truth.weights().iter().all(|&w| w == 0.25));
        let expected_means = [[-2.0, -2.0], [2.0, -2.0], [-2.0, 2.0], [2.0, 2.0]];
        for (atom, m) in truth.atoms().iter().zip(expected_means) {
            assert_eq!(atom.mean().as_slice(), &m);
            assert_eq!(atom.cov().as_matrix()[(0, 0)], 2.25);
            assert_eq!(atom.cov().as_matrix()[(1, 1)], 2.25);
        }
        assert!(simulate_four_component(0, 7).is_err());
    }

    #[test]
    fn simulation_component_frequencies_are_uniform() {
        let (_, _, labels) = simulate_four_component(100_000, 12).unwrap();
        let n = labels.len() as f64;
        for k in 1..=4 {
            let freq = labels.labels().iter().filter(|&&z| z == k).count() as f64 / n;
            let sigma = (0.25 * 0.75 / n).sqrt();
            assert!((freq - 0.25).abs() < 3.0 * sigma, "component {k}: {freq}");
        }
    }

    #[test]
    fn table_csv_layout() {
        let table = Table {
            columns: vec!["a".to_string(), "b".to_string()],
            rows: vec![
                ("m1".to_string(), vec![Some(1.0), None]),
                ("m2".to_string(), vec![Some(0.5), Some(2.0)]),
            ],
        };
        let csv = table.to_csv("seed=1");
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# seed=1");
        assert_eq!(lines.next().unwrap(), "method,a,b");
        let row = lines.next().unwrap();
        assert!(row.starts_with("m1,") && row.ends_with(','));
        assert_eq!(table.cell("m2", "b"), Some(2.0));
        assert_eq!(table.cell("m1", "b"), None);
    }
}

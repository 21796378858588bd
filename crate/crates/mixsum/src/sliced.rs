//! The three sliced distances between Gaussian mixing measures: vectorized
//! sliced Wasserstein, mixed sliced Wasserstein (generalized geodesic
//! projection on ℝᵈ × SPD), and sliced mixture Wasserstein (single linear
//! direction shared by mean and covariance), with shared Monte Carlo
//! machinery.
//!
//! Estimates are averages over `L` projection directions of exact 1D
//! `W_p^p` distances between pushforwards. All estimators return the p-th
//! power; callers take the p-th root for display.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_log, sample_unit_sphere, sample_unit_symmetric, SymmetricMatrix, UnitVector};
use crate::measures::{Discrete1DMeasure, GaussianAtom, MixingMeasure};
use crate::ot::wasserstein_1d;
use crate::para;

/// Which sliced distance to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlicedKind {
    /// Linear projection of the stacked (mean, covariance rows) vector.
    Vectorized,
    /// Generalized geodesic projection `w₁⟨μ,v⟩ + w₂ Tr(A log Σ)`.
    MixSw,
    /// Shared-direction projection `w₁⟨v,μ⟩ + w₂ log √(vᵀΣv)`.
    SMixW,
}

impl SlicedKind {
    pub fn name(&self) -> &'static str {
        match self {
            SlicedKind::Vectorized => "sw",
            SlicedKind::MixSw => "mix_sw",
            SlicedKind::SMixW => "smix_w",
        }
    }
}

impl std::str::FromStr for SlicedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sw" | "vectorized" => Ok(SlicedKind::Vectorized),
            "mix_sw" => Ok(SlicedKind::MixSw),
            "smix_w" => Ok(SlicedKind::SMixW),
            other => Err(Error::InvalidArgument(format!(
                "unknown sliced kind {other:?} (expected sw|vectorized|mix_sw|smix_w)"
            ))),
        }
    }
}

/// Direction for the vectorized projection: a unit vector in ℝ^{d(d+1)}.
#[derive(Debug, Clone)]
pub struct VectorizedDirection {
    pub v: UnitVector,
}

/// Direction for Mix-SW: circle weights `w`, unit vector `v` in ℝᵈ and a
/// unit-Frobenius symmetric matrix `A`.
#[derive(Debug, Clone)]
pub struct MixSwDirection {
    pub w: [f64; 2],
    pub v: UnitVector,
    pub a: SymmetricMatrix,
}

/// Direction for SMix-W: circle weights and a single unit vector.
#[derive(Debug, Clone)]
pub struct SMixWDirection {
    pub w: [f64; 2],
    pub v: UnitVector,
}

/// A sampled projection direction for one of the three kinds.
#[derive(Debug, Clone)]
pub enum Direction {
    Vectorized(VectorizedDirection),
    MixSw(MixSwDirection),
    SMixW(SMixWDirection),
}

impl Direction {
    pub fn kind(&self) -> SlicedKind {
        match self {
            Direction::Vectorized(_) => SlicedKind::Vectorized,
            Direction::MixSw(_) => SlicedKind::MixSw,
            Direction::SMixW(_) => SlicedKind::SMixW,
        }
    }

    /// Dimension of the atoms this direction projects.
    pub fn atom_dim(&self) -> usize {
        match self {
            // v lives in ℝ^{d(d+1)} = d + d²; recover d from the length.
            Direction::Vectorized(dir) => {
                let len = dir.v.dim();
                let mut d = 1;
                while d * (d + 1) < len {
                    d += 1;
                }
                d
            }
            Direction::MixSw(dir) => dir.v.dim(),
            Direction::SMixW(dir) => dir.v.dim(),
        }
    }
}

fn sample_circle(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let w = sample_unit_sphere(2, rng);
    [w.as_vector()[0], w.as_vector()[1]]
}

/// Samples `l` i.i.d. directions for `kind` on atoms of dimension `d`,
/// deterministically from `seed`.
pub fn sample_directions(kind: SlicedKind, d: usize, l: usize, seed: u64) -> Vec<Direction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..l)
        .map(|_| match kind {
            SlicedKind::Vectorized => Direction::Vectorized(VectorizedDirection {
                v: sample_unit_sphere(d * (d + 1), &mut rng),
            }),
            SlicedKind::MixSw => Direction::MixSw(MixSwDirection {
                w: sample_circle(&mut rng),
                v: sample_unit_sphere(d, &mut rng),
                a: sample_unit_symmetric(d, &mut rng),
            }),
            SlicedKind::SMixW => Direction::SMixW(SMixWDirection {
                w: sample_circle(&mut rng),
                v: sample_unit_sphere(d, &mut rng),
            }),
        })
        .collect()
}

/// Stacks mean and covariance rows into a vector in ℝ^{d(d+1)}.
pub fn vec_embed(atom: &GaussianAtom) -> DVector<f64> {
    let d = atom.dim();
    let mut out = DVector::zeros(d * (d + 1));
    for i in 0..d {
        out[i] = atom.mean()[i];
    }
    for i in 0..d {
        for j in 0..d {
            out[d + i * d + j] = atom.cov().as_matrix()[(i, j)];
        }
    }
    out
}

/// Generalized geodesic projection `w₁⟨μ,v⟩ + w₂ Tr(A log Σ)`.
pub fn mix_sw_project(atom: &GaussianAtom, dir: &MixSwDirection) -> Result<f64> {
    if atom.dim() != dir.v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "atom dimension {} vs direction dimension {}",
            atom.dim(),
            dir.v.dim()
        )));
    }
    let log_cov = matrix_log(atom.cov())?;
    Ok(dir.w[0] * dir.v.dot(atom.mean()) + dir.w[1] * dir.a.frobenius_dot(&log_cov))
}

/// Projection `w₁⟨v,μ⟩ + w₂ log √(vᵀΣv)`.
pub fn smix_project(atom: &GaussianAtom, dir: &SMixWDirection) -> f64 {
    let v = dir.v.as_vector();
    let quad = (atom.cov().as_matrix() * v).dot(v);
    dir.w[0] * dir.v.dot(atom.mean()) + 0.5 * dir.w[1] * quad.ln()
}

/// Per-atom payload precomputed once per measure so that projecting onto
/// many directions does not repeat matrix logarithms or embeddings.
enum Prepared {
    Vectorized(Vec<DVector<f64>>),
    MixSw(Vec<(DVector<f64>, SymmetricMatrix)>),
    SMixW(Vec<GaussianAtom>),
}

/// All 1D pushforwards of one measure under a fixed direction set.
pub struct ProjectedMeasure {
    kind: SlicedKind,
    per_dir: Vec<Discrete1DMeasure>,
}

impl ProjectedMeasure {
    pub fn kind(&self) -> SlicedKind {
        self.kind
    }

    pub fn directions(&self) -> usize {
        self.per_dir.len()
    }

    pub fn pushforward(&self, l: usize) -> &Discrete1DMeasure {
        &self.per_dir[l]
    }
}

/// Projects `g` onto every direction, yielding sorted 1D pushforwards.
pub fn project_measure(dirs: &[Direction], g: &MixingMeasure) -> Result<ProjectedMeasure> {
    if dirs.is_empty() {
        return Err(Error::InvalidArgument("empty direction set".to_string()));
    }
    let kind = dirs[0].kind();
    if dirs.iter().any(|d| d.kind() != kind) {
        return Err(Error::InvalidArgument("mixed direction kinds".to_string()));
    }
    if dirs[0].atom_dim() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "directions are for dimension {}, measure has {}",
            dirs[0].atom_dim(),
            g.dim()
        )));
    }
    let prepared = match kind {
        SlicedKind::Vectorized => Prepared::Vectorized(g.atoms().iter().map(vec_embed).collect()),
        SlicedKind::MixSw => Prepared::MixSw(
            g.atoms()
                .iter()
                .map(|a| Ok((a.mean().clone(), matrix_log(a.cov())?)))
                .collect::<Result<Vec<_>>>()?,
        ),
        SlicedKind::SMixW => Prepared::SMixW(g.atoms().to_vec()),
    };
    let weights = g.weights();
    let per_dir = para::par_map_slice(dirs, |dir| {
        let support: Vec<f64> = match (&prepared, dir) {
            (Prepared::Vectorized(embeds), Direction::Vectorized(d)) => {
                embeds.iter().map(|e| d.v.dot(e)).collect()
            }
            (Prepared::MixSw(items), Direction::MixSw(d)) => items
                .iter()
                .map(|(mean, log_cov)| {
                    d.w[0] * d.v.dot(mean) + d.w[1] * d.a.frobenius_dot(log_cov)
                })
                .collect(),
            (Prepared::SMixW(atoms), Direction::SMixW(d)) => {
                atoms.iter().map(|a| smix_project(a, d)).collect()
            }
            _ => unreachable!("direction kinds verified above"),
        };
        Discrete1DMeasure::from_unsorted(support, weights.to_vec())
    });
    Ok(ProjectedMeasure { kind, per_dir })
}

/// `(1/L) Σ_l W_p^p` over pre-projected measures. Exactly symmetric in its
/// arguments and deterministic for a fixed direction set.
pub fn distance_from_projections(
    p: f64,
    a: &ProjectedMeasure,
    b: &ProjectedMeasure,
) -> Result<f64> {
    if a.kind != b.kind {
        return Err(Error::InvalidArgument("projection kinds differ".to_string()));
    }
    if a.per_dir.len() != b.per_dir.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} directions",
            a.per_dir.len(),
            b.per_dir.len()
        )));
    }
    let per_dir = para::par_map_indexed(a.per_dir.len(), |l| {
        wasserstein_1d(p, &a.per_dir[l], &b.per_dir[l])
    });
    Ok(para::pairwise_mean(&per_dir))
}

/// `(1/L) Σ_l W_p^p` over a fixed, shared direction set.
pub fn distance_between_samples(
    p: f64,
    dirs: &[Direction],
    g1: &MixingMeasure,
    g2: &MixingMeasure,
) -> Result<f64> {
    let a = project_measure(dirs, g1)?;
    let b = project_measure(dirs, g2)?;
    distance_from_projections(p, &a, &b)
}

/// A Monte Carlo sliced-distance estimate (p-th power scale).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlicedEstimate {
    pub value: f64,
    pub projections: usize,
    pub order: f64,
    pub seed: u64,
}

impl SlicedEstimate {
    /// The estimate on the distance scale (p-th root).
    pub fn rooted(&self) -> f64 {
        self.value.powf(1.0 / self.order)
    }
}

/// Monte Carlo estimate with `l` fresh directions drawn from `seed`.
pub fn sliced_distance(
    kind: SlicedKind,
    p: f64,
    l: usize,
    seed: u64,
    g1: &MixingMeasure,
    g2: &MixingMeasure,
) -> Result<SlicedEstimate> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            g1.dim(),
            g2.dim()
        )));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("need at least one projection".to_string()));
    }
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!("order p={p} must be >= 1")));
    }
    let dirs = sample_directions(kind, g1.dim(), l, seed);
    let value = distance_between_samples(p, &dirs, g1, g2)?;
    Ok(SlicedEstimate { value, projections: l, order: p, seed })
}

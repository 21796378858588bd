//! Probability-measure data types shared by the distances, the sampler and
//! the summarizer: Gaussian atoms, finite mixing measures, discrete 1D
//! pushforwards, label vectors and data matrices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

const SIMPLEX_TOL: f64 = 1e-10;

/// One mixture component θ = (μ, Σ).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAtom {
    mean: DVector<f64>,
    cov: SpdMatrix,
}

impl GaussianAtom {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean has dimension {}, covariance {}",
                mean.len(),
                cov.dim()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }
}

/// Precomputed form of one Gaussian for repeated density queries. Stores
/// the precision matrix so evaluation allocates nothing.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(atom: &GaussianAtom) -> Self {
        let chol = atom.cov.cholesky();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let d = atom.dim() as f64;
        let log_norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det);
        Self { mean: atom.mean.clone(), precision: chol.inverse(), log_norm }
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.mean.len();
        let mut quad = 0.0;
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                quad += self.precision[(i, j)] * di * (x[j] - self.mean[j]);
            }
        }
        self.log_norm - 0.5 * quad
    }
}

/// Finite discrete mixing measure Σₖ wₖ δ_{θₖ}.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMeasure {
    weights: Vec<f64>,
    atoms: Vec<GaussianAtom>,
}

impl MixingMeasure {
    pub fn new(weights: Vec<f64>, atoms: Vec<GaussianAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure("no atoms".to_string()));
        }
        if weights.len() != atoms.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} atoms",
                weights.len(),
                atoms.len()
            )));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative and finite".to_string(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let d = atoms[0].dim();
        if atoms.iter().any(|a| a.dim() != d) {
            return Err(Error::DimensionMismatch(
                "atoms have mixed dimensions".to_string(),
            ));
        }
        Ok(Self { weights, atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> &[GaussianAtom] {
        &self.atoms
    }

    /// Pushforward through a real-valued projection of the atoms. Weights
    /// are carried along unchanged, so total mass is preserved exactly.
    pub fn project_1d(&self, proj: impl Fn(&GaussianAtom) -> f64) -> Discrete1DMeasure {
        let support: Vec<f64> = self.atoms.iter().map(proj).collect();
        Discrete1DMeasure::from_unsorted(support, self.weights.clone())
    }

    /// Drops atoms with weight below `floor` and renormalizes. `floor = 0`
    /// is the identity.
    pub fn prune(&self, floor: f64) -> Result<MixingMeasure> {
        if !(0.0..1.0).contains(&floor) {
            return Err(Error::InvalidArgument(format!(
                "prune floor {floor} outside [0, 1)"
            )));
        }
        if floor == 0.0 {
            return Ok(self.clone());
        }
        let kept: Vec<usize> =
            (0..self.len()).filter(|&k| self.weights[k] >= floor).collect();
        if kept.is_empty() {
            return Err(Error::EmptyMeasure(format!(
                "all {} weights below prune floor {floor}",
                self.len()
            )));
        }
        let mass: f64 = kept.iter().map(|&k| self.weights[k]).sum();
        Ok(MixingMeasure {
            weights: kept.iter().map(|&k| self.weights[k] / mass).collect(),
            atoms: kept.iter().map(|&k| self.atoms[k].clone()).collect(),
        })
    }

    /// Mixture density Σₖ wₖ N(x | μₖ, Σₖ).
    pub fn density(&self, x: &DVector<f64>) -> f64 {
        self.density_evals().density(x)
    }

    /// Precomputes per-atom Cholesky factors for repeated evaluation.
    pub fn density_evals(&self) -> MixtureDensity {
        MixtureDensity {
            weights: self.weights.clone(),
            comps: self.atoms.iter().map(GaussianDensity::new).collect(),
        }
    }
}

/// Reusable evaluator for a mixture density.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    weights: Vec<f64>,
    comps: Vec<GaussianDensity>,
}

impl MixtureDensity {
    pub fn density(&self, x: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .zip(&self.comps)
            .map(|(&w, c)| if w > 0.0 { w * c.log_density(x).exp() } else { 0.0 })
            .sum()
    }
}

/// Discrete measure on the real line with sorted support.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete1DMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl Discrete1DMeasure {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "support length {} vs weight length {}",
                support.len(),
                weights.len()
            )));
        }
        if support.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("support not sorted".to_string()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be nonnegative".to_string()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { support, weights })
    }

    /// Sorts (support, weight) pairs by support value. Ties keep their
    /// original relative order; distinct atoms with equal projections
    /// coexist rather than being merged.
    pub fn from_unsorted(support: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(support.len(), weights.len());
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&i, &j| support[i].partial_cmp(&support[j]).unwrap());
        Self {
            support: order.iter().map(|&i| support[i]).collect(),
            weights: order.iter().map(|&i| weights[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }
}

/// Cluster labels c ∈ {1,…,K}ⁿ (1-based, matching the CSV interchange
/// format). Serializes as a plain integer array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(serializer)
    }
}

impl LabelVector {
    /// `max_label` bounds the admissible range when known (e.g. the
    /// truncation level); pass `None` to accept any positive labels. An
    /// empty vector is legal (prior simulation carries no observations).
    pub fn new(labels: Vec<usize>, max_label: Option<usize>) -> Result<Self> {
        let cap = max_label.unwrap_or(usize::MAX);
        for (i, &z) in labels.iter().enumerate() {
            if z == 0 || z > cap {
                return Err(Error::InvalidArgument(format!(
                    "label {z} at position {i} outside [1, {cap}]"
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of distinct labels in use.
    pub fn occupied_clusters(&self) -> usize {
        let mut seen = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Single-column CSV of 1-based integers, one label per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for z in &self.labels {
            let _ = writeln!(out, "{z}");
        }
        out
    }

    pub fn from_csv_str(text: &str, path: &str) -> Result<Self> {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let z: usize = line.parse().map_err(|_| Error::Csv {
                path: path.to_string(),
                line: i + 1,
                msg: format!("expected positive integer label, got {line:?}"),
            })?;
            if z == 0 {
                return Err(Error::Csv {
                    path: path.to_string(),
                    line: i + 1,
                    msg: "labels are 1-based; 0 is not allowed".to_string(),
                });
            }
            labels.push(z);
        }
        if labels.is_empty() {
            return Err(Error::Csv {
                path: path.to_string(),
                line: 0,
                msg: "no labels".to_string(),
            });
        }
        LabelVector::new(labels, None)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}

/// n observations in ℝᵈ. `n = 0` is allowed (prior simulation); CSV inputs
/// must contain at least one row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: Vec<DVector<f64>>,
    dim: usize,
}

impl DataMatrix {
    pub fn new(rows: Vec<DVector<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".to_string()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {i} has non-finite entries")));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(Vec::new(), dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &DVector<f64> {
        &self.rows[i]
    }

    /// Per-axis (min, max) over the rows.
    pub fn bounds(&self) -> Option<Vec<(f64, f64)>> {
        if self.rows.is_empty() {
            return None;
        }
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for r in &self.rows {
            for (axis, &x) in r.iter().enumerate() {
                out[axis].0 = out[axis].0.min(x);
                out[axis].1 = out[axis].1.max(x);
            }
        }
        Some(out)
    }

    /// Parses a numeric CSV with an optional header row and `#` comment
    /// lines. A row is treated as a header when any of its fields fails to
    /// parse as a number.
    pub fn from_csv_str(text: &str, path: &str) -> Result<Self> {
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut dim = None;
        let mut first_content = true;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let header_candidate = first_content;
            first_content = false;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Err(_) if header_candidate => continue, // header
                Err(e) => {
                    return Err(Error::Csv {
                        path: path.to_string(),
                        line: i + 1,
                        msg: format!("non-numeric field: {e}"),
                    })
                }
                Ok(values) => {
                    let d = *dim.get_or_insert(values.len());
                    if values.len() != d {
                        return Err(Error::Csv {
                            path: path.to_string(),
                            line: i + 1,
                            msg: format!("expected {d} columns, found {}", values.len()),
                        });
                    }
                    rows.push(DVector::from_vec(values));
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::Csv {
            path: path.to_string(),
            line: 0,
            msg: "no data rows".to_string(),
        })?;
        DataMatrix::new(rows, dim)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn to_csv(&self, header: Option<&[&str]>) -> String {
        let mut out = String::new();
        if let Some(h) = header {
            let _ = writeln!(out, "{}", h.join(","));
        }
        for r in &self.rows {
            let fields: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    weights: Vec<f64>,
    atoms: Vec<AtomJson>,
}

impl Serialize for MixingMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = MeasureJson {
            weights: self.weights.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomJson {
                    mean: a.mean.iter().copied().collect(),
                    cov: (0..a.dim())
                        .map(|i| (0..a.dim()).map(|j| a.cov.as_matrix()[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MixingMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = MeasureJson::deserialize(deserializer)?;
        let atoms = doc
            .atoms
            .into_iter()
            .map(|a| {
                let d = a.mean.len();
                if a.cov.len() != d || a.cov.iter().any(|row| row.len() != d) {
                    return Err(D::Error::custom("covariance shape does not match mean"));
                }
                let mat = DMatrix::from_fn(d, d, |i, j| a.cov[i][j]);
                let cov = SpdMatrix::new(mat).map_err(D::Error::custom)?;
                GaussianAtom::new(DVector::from_vec(a.mean), cov).map_err(D::Error::custom)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        MixingMeasure::new(doc.weights, atoms).map_err(D::Error::custom)
    }
}

//! Bundled data and fixtures: the Old Faithful geyser dataset (verbatim
//! copy of the canonical R distribution, checksum-pinned at bundling time)
//! and small generators for property tests.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measures::DataMatrix;

/// Old Faithful geyser records: eruption duration and waiting time in
/// minutes, 272 rows.
pub const OLD_FAITHFUL_CSV: &str = include_str!("../data/old_faithful.csv");

/// SHA-256 of the bundled CSV, recorded when the file was ingested.
pub const OLD_FAITHFUL_SHA256: &str =
    "a78cc186d2d1c2460cb5ab212c22ebfbc525ec919daa006452961802d2867037";

/// Loads the bundled Old Faithful dataset, verifying the checksum.
pub fn load_old_faithful() -> Result<DataMatrix> {
    let digest = hex_digest(OLD_FAITHFUL_CSV.as_bytes());
    if digest != OLD_FAITHFUL_SHA256 {
        return Err(Error::Corrupt(format!(
            "old_faithful.csv checksum {digest} does not match the recorded {OLD_FAITHFUL_SHA256}"
        )));
    }
    let data = DataMatrix::from_csv_str(OLD_FAITHFUL_CSV, "old_faithful.csv")?;
    if data.len() != 272 || data.dim() != 2 {
        return Err(Error::Corrupt(format!(
            "old_faithful.csv has shape {}x{}, expected 272x2",
            data.len(),
            data.dim()
        )));
    }
    Ok(data)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Random fixture generators shared by property tests across the crate.
pub mod fixtures {
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use crate::linalg::{sym_eig, SpdMatrix, SymmetricMatrix};
    use crate::measures::{GaussianAtom, MixingMeasure};

    /// Random SPD matrix with eigenvalues in `[lo, hi]`.
    pub fn random_spd(dim: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> SpdMatrix {
        let raw = DMatrix::from_fn(dim, dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let sym = SymmetricMatrix::new(0.5 * (&raw + raw.transpose())).unwrap();
        let (_, q) = sym_eig(&sym).unwrap();
        let diag = DVector::from_fn(dim, |_, _| lo + (hi - lo) * rng.random::<f64>());
        SpdMatrix::new(&q * DMatrix::from_diagonal(&diag) * q.transpose()).unwrap()
    }

    /// Random Gaussian atom with means in `[-scale, scale]` and moderate
    /// covariance conditioning.
    pub fn random_atom(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> GaussianAtom {
        let mean = DVector::from_fn(dim, |_, _| (2.0 * rng.random::<f64>() - 1.0) * scale);
        GaussianAtom::new(mean, random_spd(dim, 0.2, 2.5, rng)).unwrap()
    }

    /// Random mixing measure with `k` atoms and weights bounded away from
    /// zero.
    pub fn random_measure(dim: usize, k: usize, rng: &mut ChaCha8Rng) -> MixingMeasure {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let atoms = (0..k).map(|_| random_atom(dim, 3.0, rng)).collect();
        MixingMeasure::new(raw.iter().map(|w| w / total).collect(), atoms).unwrap()
    }

    /// Copy of `g` with every atom mean translated by `delta`.
    pub fn translate_measure(g: &MixingMeasure, delta: &DVector<f64>) -> MixingMeasure {
        let atoms = g
            .atoms()
            .iter()
            .map(|a| GaussianAtom::new(a.mean() + delta, a.cov().clone()).unwrap())
            .collect();
        MixingMeasure::new(g.weights().to_vec(), atoms).unwrap()
    }
}

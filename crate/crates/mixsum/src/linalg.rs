//! Dense symmetric linear algebra and manifold primitives: matrix log/sqrt
//! on the SPD cone, projection-parameter sampling, generalized eigenvalues.
//!
//! Covariances coming out of an MCMC run can be very close to singular, so
//! eigenvalues are clamped at [`EIG_FLOOR`] before `log`/`sqrt`; inputs are
//! symmetrized as `(S + Sᵀ)/2` on construction to absorb floating-point
//! drift.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_RTOL: f64 = 1e-10;
/// Floor applied to eigenvalues before `log`/`sqrt`.
pub const EIG_FLOOR: f64 = 1e-12;

fn check_square(mat: &DMatrix<f64>) -> Result<()> {
    if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected nonempty square matrix, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

fn check_symmetric(mat: &DMatrix<f64>) -> Result<()> {
    for i in 0..mat.nrows() {
        for j in (i + 1)..mat.ncols() {
            let a = mat[(i, j)];
            let b = mat[(j, i)];
            if (a - b).abs() > SYMMETRY_RTOL * (1.0 + a.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "matrix not symmetric at ({i},{j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (mat + mat.transpose())
}

/// A real symmetric matrix (the tangent space of the SPD cone).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    mat: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Validates near-symmetry and stores the exactly symmetrized matrix.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_square(&mat)?;
        check_symmetric(&mat)?;
        Ok(Self { mat: symmetrize(&mat) })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Frobenius inner product `⟨A,B⟩ = Tr(AB)` (equal for symmetric args).
    pub fn frobenius_dot(&self, other: &SymmetricMatrix) -> f64 {
        self.mat.dot(&other.mat)
    }

    /// Uniform sample from the unit Frobenius sphere of symmetric matrices:
    /// i.i.d. normal entries, symmetrized, then normalized. In the
    /// orthonormal basis of symmetric matrices the coefficients are i.i.d.
    /// normal, so the normalized draw is uniform on the sphere.
    pub fn sample_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let raw = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sym = symmetrize(&raw);
            let norm = sym.norm();
            if norm > 0.0 {
                return Self { mat: sym / norm };
            }
        }
    }
}

/// Eigendecomposition of a symmetric matrix. Returns eigenvalues in
/// descending order and the matching orthonormal eigenvector columns.
pub fn sym_eig(s: &SymmetricMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = nalgebra::SymmetricEigen::try_new(s.mat.clone(), f64::EPSILON, 0).ok_or_else(
        || Error::Numerical(format!("symmetric eigensolver did not converge on {:?}", s.mat)),
    )?;
    let dim = s.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = DVector::from_fn(dim, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness (Cholesky success).
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_square(&mat)?;
        check_symmetric(&mat)?;
        let sym = symmetrize(&mat);
        if nalgebra::Cholesky::new(sym.clone()).is_none() {
            return Err(Error::InvalidArgument(
                "matrix is not positive definite".to_string(),
            ));
        }
        Ok(Self { mat: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal entries must be positive and finite".to_string(),
            ));
        }
        Ok(Self {
            mat: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn as_symmetric(&self) -> SymmetricMatrix {
        SymmetricMatrix { mat: self.mat.clone() }
    }

    pub fn cholesky(&self) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        // Construction guarantees positive definiteness.
        nalgebra::Cholesky::new(self.mat.clone()).expect("SPD invariant violated")
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
        let (values, q) = sym_eig(&SymmetricMatrix { mat: self.mat.clone() })?;
        let mapped = DVector::from_fn(values.len(), |i, _| f(values[i].max(EIG_FLOOR)));
        let out = &q * DMatrix::from_diagonal(&mapped) * q.transpose();
        Ok(symmetrize(&out))
    }
}

/// Log-Euclidean matrix logarithm: `Q diag(log λᵢ) Qᵀ` with eigenvalues
/// clamped at [`EIG_FLOOR`].
pub fn matrix_log(sigma: &SpdMatrix) -> Result<SymmetricMatrix> {
    Ok(SymmetricMatrix { mat: sigma.spectral_map(f64::ln)? })
}

/// Principal matrix square root, `Q diag(√λᵢ) Qᵀ`.
pub fn matrix_sqrt(sigma: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(SpdMatrix { mat: sigma.spectral_map(f64::sqrt)? })
}

/// A unit-norm vector in ℝᵈ.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    v: DVector<f64>,
}

impl UnitVector {
    /// Accepts a vector already on the sphere (within 1e-12) and
    /// renormalizes exactly.
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::DimensionMismatch("empty vector".to_string()));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "vector norm {norm} is not 1"
            )));
        }
        Ok(Self { v: v / norm })
    }

    /// Uniform sample on the unit sphere: standard normal draw, normalized.
    /// A (measure-zero) zero draw is resampled.
    pub fn sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 0.0 {
                return Self { v: v / norm };
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.v.dot(x)
    }
}

/// Uniform sample on the unit hypersphere `S^{d-1}`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitVector {
    UnitVector::sample(dim, rng)
}

/// Uniform sample on the unit Frobenius sphere of symmetric `d×d` matrices.
pub fn sample_unit_symmetric<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymmetricMatrix {
    SymmetricMatrix::sample_unit(dim, rng)
}

/// Largest `λ` solving the symmetric-definite problem `Σ₁ v = λ Σ₂ v`,
/// computed via Cholesky whitening of `Σ₂`.
pub fn generalized_max_eigenvalue(sigma1: &SpdMatrix, sigma2: &SpdMatrix) -> Result<f64> {
    if sigma1.dim() != sigma2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            sigma1.dim(),
            sigma1.dim(),
            sigma2.dim(),
            sigma2.dim()
        )));
    }
    let chol = sigma2.cholesky();
    let l = chol.l();
    // M = L⁻¹ Σ₁ L⁻ᵀ shares eigenvalues with the generalized problem.
    let mut m = sigma1.mat.clone();
    l.solve_lower_triangular_mut(&mut m);
    let mut mt = m.transpose();
    l.solve_lower_triangular_mut(&mut mt);
    let whitened = SymmetricMatrix::new(symmetrize(&mt))?;
    let (values, _) = sym_eig(&whitened)?;
    Ok(values[0])
}

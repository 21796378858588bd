//! Blocked Gibbs sampler for the conjugate truncated Dirichlet-process
//! Gaussian mixture. One sweep updates labels, then sticks, then atoms from
//! their full conditionals:
//!
//! 1. `p(zᵢ = k | ·) ∝ wₖ N(yᵢ | μₖ, Σₖ)`
//! 2. `βₖ ~ Beta(1 + nₖ, α + Σ_{j>k} nⱼ)`, last stick fixed at 1
//! 3. `(μₖ, Σₖ) ~ NIW(posterior)` per cluster, prior draw when empty
//!
//! Label updates within a sweep are conditionally independent; each point
//! gets its own RNG substream derived from the sweep key, so chains are
//! reproducible regardless of thread count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::measures::{DataMatrix, GaussianAtom, GaussianDensity, LabelVector, MixingMeasure};
use crate::para;

/// Normal-inverse-Wishart parameters (μ₀, λ, Ψ, ν).
#[derive(Debug, Clone)]
pub struct NiwParams {
    pub mean: DVector<f64>,
    pub scale: f64,
    pub psi: SpdMatrix,
    pub dof: f64,
}

impl NiwParams {
    pub fn new(mean: DVector<f64>, scale: f64, psi: SpdMatrix, dof: f64) -> Result<Self> {
        let d = mean.len();
        if psi.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean has dimension {d}, scale matrix {}",
                psi.dim()
            )));
        }
        if scale <= 0.0 {
            return Err(Error::InvalidArgument(format!("scale λ={scale} must be positive")));
        }
        if dof <= d as f64 - 1.0 {
            return Err(Error::InvalidArgument(format!(
                "degrees of freedom ν={dof} must exceed d−1={}",
                d - 1
            )));
        }
        Ok(Self { mean, scale, psi, dof })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Truncated-DP mixture hyperparameters.
#[derive(Debug, Clone)]
pub struct DpmmConfig {
    pub niw: NiwParams,
    /// DP concentration α.
    pub concentration: f64,
    /// Truncation level K.
    pub truncation: usize,
}

impl DpmmConfig {
    pub fn new(niw: NiwParams, concentration: f64, truncation: usize) -> Result<Self> {
        if concentration <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "concentration α={concentration} must be positive"
            )));
        }
        if truncation == 0 {
            return Err(Error::InvalidArgument("truncation level must be at least 1".to_string()));
        }
        Ok(Self { niw, concentration, truncation })
    }
}

/// Conjugate NIW posterior update given the points of one cluster.
pub fn niw_posterior(prior: &NiwParams, points: &[&DVector<f64>]) -> NiwParams {
    let n = points.len();
    if n == 0 {
        return prior.clone();
    }
    let d = prior.dim();
    let nf = n as f64;
    let mut ybar = DVector::zeros(d);
    for y in points {
        ybar += *y;
    }
    ybar /= nf;
    let mut scatter = DMatrix::zeros(d, d);
    for y in points {
        let diff = *y - &ybar;
        scatter += &diff * diff.transpose();
    }
    let prior_diff = &ybar - &prior.mean;
    let shrink = prior.scale * nf / (prior.scale + nf);
    let psi_mat = prior.psi.as_matrix() + scatter + shrink * (&prior_diff * prior_diff.transpose());
    let psi = SpdMatrix::new(0.5 * (&psi_mat + psi_mat.transpose()))
        .expect("posterior scale matrix must stay positive definite");
    NiwParams {
        mean: (prior.scale * &prior.mean + nf * ybar) / (prior.scale + nf),
        scale: prior.scale + nf,
        psi,
        dof: prior.dof + nf,
    }
}

/// Draws Σ ~ InverseWishart(Ψ, ν) via the Bartlett decomposition, then
/// μ ~ N(μ₀, Σ/λ).
pub fn sample_niw<R: Rng + ?Sized>(params: &NiwParams, rng: &mut R) -> Result<GaussianAtom> {
    let d = params.dim();
    // Wishart(Ψ⁻¹, ν) via Bartlett, inverted to an inverse-Wishart draw.
    let psi_inv = {
        let inv = params.psi.cholesky().inverse();
        SpdMatrix::new(0.5 * (&inv + inv.transpose()))?
    };
    let l = psi_inv.cholesky().l();
    let mut bartlett = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(params.dof - i as f64).map_err(|e| {
            Error::InvalidArgument(format!("invalid chi-squared dof at row {i}: {e}"))
        })?;
        bartlett[(i, i)] = rng.sample::<f64, _>(chi).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let factor = &l * &bartlett;
    let wishart = &factor * factor.transpose();
    let wishart = SpdMatrix::new(0.5 * (&wishart + wishart.transpose()))?;
    let cov_mat = wishart.cholesky().inverse();
    let cov = SpdMatrix::new(0.5 * (&cov_mat + cov_mat.transpose()))?;

    let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mean = &params.mean + cov.cholesky().l() * noise / params.scale.sqrt();
    GaussianAtom::new(mean, cov)
}

/// Draws an index from unnormalized log-probabilities with max-subtraction.
pub(crate) fn sample_categorical_log<R: Rng + ?Sized>(logp: &[f64], rng: &mut R) -> Result<usize> {
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(
            "all categorical log-probabilities are -inf".to_string(),
        ));
    }
    let mut total = 0.0;
    let mut cumulative = Vec::with_capacity(logp.len());
    for &lp in logp {
        total += (lp - max).exp();
        cumulative.push(total);
    }
    let u = rng.random::<f64>() * total;
    for (k, &c) in cumulative.iter().enumerate() {
        if u < c {
            return Ok(k);
        }
    }
    Ok(logp.len() - 1)
}

/// Full state of the truncated-DP blocked Gibbs chain.
#[derive(Debug, Clone)]
pub struct GibbsState {
    sticks: Vec<f64>,
    weights: Vec<f64>,
    labels: Vec<usize>, // 1-based
    atoms: Vec<GaussianAtom>,
    config: DpmmConfig,
}

fn stick_break(sticks: &[f64]) -> Vec<f64> {
    let mut weights = Vec::with_capacity(sticks.len());
    let mut remaining = 1.0;
    for &beta in sticks {
        weights.push(beta * remaining);
        remaining *= 1.0 - beta;
    }
    weights
}

impl GibbsState {
    /// Prior initialization: uniform random labels, one prior draw of
    /// sticks and atoms.
    pub fn init(n: usize, config: &DpmmConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let k = config.truncation;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k) + 1).collect();
        let mut sticks = Vec::with_capacity(k);
        let prior_beta = Beta::new(1.0, config.concentration)
            .map_err(|e| Error::InvalidArgument(format!("invalid stick prior: {e}")))?;
        for _ in 0..k.saturating_sub(1) {
            sticks.push(rng.sample(prior_beta));
        }
        sticks.push(1.0);
        let weights = stick_break(&sticks);
        let atoms: Vec<GaussianAtom> =
            (0..k).map(|_| sample_niw(&config.niw, rng)).collect::<Result<_>>()?;
        Ok(Self { sticks, weights, labels, atoms, config: config.clone() })
    }

    pub fn sticks(&self) -> &[f64] {
        &self.sticks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn atoms(&self) -> &[GaussianAtom] {
        &self.atoms
    }

    pub fn measure(&self) -> Result<MixingMeasure> {
        MixingMeasure::new(self.weights.clone(), self.atoms.clone())
    }

    pub fn labels(&self) -> Result<LabelVector> {
        LabelVector::new(self.labels.clone(), Some(self.config.truncation))
    }

    fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.config.truncation];
        for &z in &self.labels {
            counts[z - 1] += 1;
        }
        counts
    }

    /// Conditional (1): every label drawn independently from the
    /// categorical `∝ wₖ N(yᵢ|μₖ,Σₖ)`, in log space.
    pub fn step_labels(&mut self, data: &DataMatrix, sweep_key: u64) -> Result<()> {
        if data.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} data rows vs {} labels",
                data.len(),
                self.labels.len()
            )));
        }
        if data.is_empty() {
            return Ok(());
        }
        let evals: Vec<GaussianDensity> = self.atoms.iter().map(GaussianDensity::new).collect();
        let log_weights: Vec<f64> = self.weights.iter().map(|&w| w.ln()).collect();
        let drawn = para::par_map_indexed(data.len(), |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(para::derive_seed(sweep_key, i as u64));
            let y = data.row(i);
            let logp: Vec<f64> = log_weights
                .iter()
                .zip(&evals)
                .map(|(&lw, eval)| lw + eval.log_density(y))
                .collect();
            sample_categorical_log(&logp, &mut rng).map(|k| k + 1)
        });
        let mut labels = Vec::with_capacity(data.len());
        for z in drawn {
            labels.push(z?);
        }
        self.labels = labels;
        Ok(())
    }

    /// Conditional (2): `βₖ ~ Beta(1 + nₖ, α + Σ_{j>k} nⱼ)` for k < K, then
    /// `β_K = 1` and weights recomputed by stick breaking.
    pub fn step_sticks(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let k = self.config.truncation;
        let counts = self.counts();
        let mut tail: usize = counts.iter().sum();
        for (idx, &nk) in counts.iter().take(k - 1).enumerate() {
            tail -= nk;
            let beta = Beta::new(1.0 + nk as f64, self.config.concentration + tail as f64)
                .map_err(|e| Error::InvalidArgument(format!("invalid stick posterior: {e}")))?;
            self.sticks[idx] = rng.sample(beta);
        }
        self.sticks[k - 1] = 1.0;
        self.weights = stick_break(&self.sticks);
        Ok(())
    }

    /// Conditional (3): per-cluster NIW posterior draw; empty clusters are
    /// refreshed from the prior.
    pub fn step_atoms(&mut self, data: &DataMatrix, rng: &mut ChaCha8Rng) -> Result<()> {
        let k = self.config.truncation;
        let mut members: Vec<Vec<&DVector<f64>>> = vec![Vec::new(); k];
        for (i, &z) in self.labels.iter().enumerate() {
            members[z - 1].push(data.row(i));
        }
        let mut atoms = Vec::with_capacity(k);
        for cluster in &members {
            let posterior = niw_posterior(&self.config.niw, cluster);
            atoms.push(sample_niw(&posterior, rng)?);
        }
        self.atoms = atoms;
        Ok(())
    }
}

/// One retained draw of the chain. Serializes to the JSON-lines record
/// `{"iteration": t, "labels": [...], "measure": {...}}`.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorDraw {
    pub iteration: usize,
    pub labels: LabelVector,
    pub measure: MixingMeasure,
}

impl<'de> Deserialize<'de> for PosteriorDraw {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            iteration: usize,
            labels: Vec<usize>,
            measure: MixingMeasure,
        }
        use serde::de::Error as _;
        let raw = Raw::deserialize(deserializer)?;
        let labels = LabelVector::new(raw.labels, None).map_err(D::Error::custom)?;
        Ok(PosteriorDraw { iteration: raw.iteration, labels, measure: raw.measure })
    }
}

/// Chain run settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl ChainSettings {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.iterations <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "need iterations > burn_in, got {} <= {}",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Number of draws the chain will emit.
    pub fn draw_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Runs the blocked Gibbs sampler and returns the retained draws in order.
pub fn run_chain(
    data: &DataMatrix,
    config: &DpmmConfig,
    settings: &ChainSettings,
) -> Result<Vec<PosteriorDraw>> {
    settings.validate()?;
    if !data.is_empty() && data.dim() != config.niw.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {} vs prior dimension {}",
            data.dim(),
            config.niw.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut state = GibbsState::init(data.len(), config, &mut rng)?;
    let mut draws = Vec::with_capacity(settings.draw_count());
    for t in 1..=settings.iterations {
        let sweep_key = rng.random::<u64>();
        state.step_labels(data, sweep_key)?;
        state.step_sticks(&mut rng)?;
        state.step_atoms(data, &mut rng)?;
        if t > settings.burn_in && (t - settings.burn_in) % settings.thin == 0 {
            draws.push(PosteriorDraw {
                measure: state.measure()?,
                labels: state.labels()?,
                iteration: t,
            });
        }
    }
    Ok(draws)
}

/// Refreshes sticks and atoms with the labels of `draw` frozen, returning
/// one measure per refresh iteration. Used by partition-first baselines to
/// estimate `E[F | ẑ]`.
pub fn conditional_density_refresh(
    draw: &PosteriorDraw,
    data: &DataMatrix,
    config: &DpmmConfig,
    refresh_iters: usize,
    seed: u64,
) -> Result<Vec<MixingMeasure>> {
    if refresh_iters == 0 {
        return Err(Error::InvalidArgument("refresh_iters must be at least 1".to_string()));
    }
    if draw.labels.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} data rows",
            draw.labels.len(),
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = GibbsState {
        sticks: vec![1.0; config.truncation],
        weights: draw.measure.weights().to_vec(),
        labels: draw.labels.labels().to_vec(),
        atoms: draw.measure.atoms().to_vec(),
        config: config.clone(),
    };
    let mut measures = Vec::with_capacity(refresh_iters);
    for _ in 0..refresh_iters {
        state.step_sticks(&mut rng)?;
        state.step_atoms(data, &mut rng)?;
        measures.push(state.measure()?);
    }
    Ok(measures)
}

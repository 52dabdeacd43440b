//! Scaled unscented transform and the unscented Kalman filter cycle.
//!
//! The engine is generic over the state dimension and is driven by two
//! callbacks: a propagation that maps the whole sigma set at once (so that a
//! propagator may difference every point against the propagated central
//! point) and a per-point measurement function.
//!
//! Weighted sums are accumulated relative to the central point. With
//! `Σ w^m = 1` this is algebraically identical to the plain weighted sum but
//! avoids multiplying the huge negative central weight of small-`α`
//! parameterizations against the full state magnitude.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Smallest eigenvalue kept when a covariance has to be repaired.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UkfError {
    #[error("invalid UT parameters: {0}")]
    BadParameters(String),
    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Which constant enters the central covariance weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovWeightForm {
    /// `λ/(n+λ) + (1 − α² + β)`
    #[default]
    Standard,
    /// `λ/(n+λ) + (1 + α² + β)`
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    #[serde(default)]
    pub cov_weight_form: CovWeightForm,
}

impl Default for UtParams {
    fn default() -> Self {
        Self { alpha: 1e-3, beta: 2.0, kappa: 0.0, cov_weight_form: CovWeightForm::Standard }
    }
}

impl UtParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Self {
        Self { alpha, beta, kappa, cov_weight_form: CovWeightForm::Standard }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtWeights {
    pub n: usize,
    pub params: UtParams,
    pub lambda: f64,
    /// `n + λ`, computed as `α²(n + κ)`.
    pub spread: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

pub fn compute_weights(n: usize, params: &UtParams) -> Result<UtWeights, UkfError> {
    let UtParams { alpha, beta, kappa, cov_weight_form } = *params;
    if n == 0 {
        return Err(UkfError::BadParameters("state dimension must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite() && beta.is_finite() && kappa.is_finite()) {
        return Err(UkfError::BadParameters(format!("alpha must be positive and finite, got {alpha}")));
    }
    let nf = n as f64;
    let spread = alpha * alpha * (nf + kappa);
    if !(spread > 0.0) {
        return Err(UkfError::BadParameters(format!("n + lambda = {spread} must be positive")));
    }
    let lambda = alpha * alpha * (nf + kappa) - nf;
    let w0m = 1.0 - nf / spread;
    let wi = 0.5 / spread;
    let extra = match cov_weight_form {
        CovWeightForm::Standard => 1.0 - alpha * alpha + beta,
        CovWeightForm::Printed => 1.0 + alpha * alpha + beta,
    };
    let mut mean = vec![wi; 2 * n + 1];
    let mut cov = vec![wi; 2 * n + 1];
    mean[0] = w0m;
    cov[0] = w0m + extra;
    Ok(UtWeights { n, params: *params, lambda, spread, mean, cov })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Gaussian {
    /// Checks shape, finiteness and symmetry (to 1e-12 relative to the
    /// largest entry); the covariance is stored exactly symmetrized.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, UkfError> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(UkfError::Dimension { expected: n, got: cov.nrows() });
        }
        if !mean.iter().chain(cov.iter()).all(|x| x.is_finite()) {
            return Err(UkfError::NonFinite("gaussian"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax().max(1.0) {
            return Err(UkfError::NotSymmetric(asym));
        }
        Ok(Self { mean, cov: symmetrize(&cov) })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    pub points: Vec<DVector<f64>>,
    pub weights: UtWeights,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Symmetrizes `m` and, if it is not positive definite, clamps its
/// eigenvalues at [`EIGEN_FLOOR`]. Returns true when clamping happened.
pub fn repair_covariance(m: &mut DMatrix<f64>) -> bool {
    *m = symmetrize(m);
    if Cholesky::new(m.clone()).is_some() && min_eigenvalue(m) > 0.0 {
        return false;
    }
    let eig = SymmetricEigen::new(m.clone());
    let clamped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let v = &eig.eigenvectors;
    *m = symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose()));
    true
}

/// Sigma points `m`, `m ± (√((n+λ)P))ᵢ` using the columns of the lower
/// Cholesky factor.
pub fn generate_sigma_points(g: &Gaussian, w: &UtWeights) -> Result<SigmaSet, UkfError> {
    let n = g.dim();
    if n != w.n {
        return Err(UkfError::Dimension { expected: w.n, got: n });
    }
    let chol = Cholesky::new(g.cov.clone()).ok_or_else(|| UkfError::NotPositiveDefinite {
        min_eigenvalue: min_eigenvalue(&g.cov),
    })?;
    let mut root = chol.l() * w.spread.sqrt();
    // Snap each offset to the grid of the mean so that mean ± offset is exact
    // and every pair is symmetric about the mean to the last bit.
    for mut col in root.column_iter_mut() {
        for (s, m) in col.iter_mut().zip(g.mean.iter()) {
            *s = (m + *s) - m;
        }
    }
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(g.mean.clone());
    for i in 0..n {
        points.push(&g.mean + root.column(i));
    }
    for i in 0..n {
        points.push(&g.mean - root.column(i));
    }
    Ok(SigmaSet { points, weights: w.clone() })
}

/// Sigma points drawn around a predicted Gaussian before a measurement update.
pub fn regenerate_sigma_points(pred: &Gaussian, w: &UtWeights) -> Result<SigmaSet, UkfError> {
    generate_sigma_points(pred, w)
}

fn check_points(points: &[DVector<f64>], w: &UtWeights) -> Result<usize, UkfError> {
    if points.len() != 2 * w.n + 1 {
        return Err(UkfError::Dimension { expected: 2 * w.n + 1, got: points.len() });
    }
    let m = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != m) {
        return Err(UkfError::Dimension { expected: m, got: bad.len() });
    }
    if !points.iter().all(|p| p.iter().all(|x| x.is_finite())) {
        return Err(UkfError::NonFinite("sigma points"));
    }
    Ok(m)
}

/// Weighted mean, relative to point 0. Returns (mean, deviations from mean).
fn weighted_moments(points: &[DVector<f64>], w: &UtWeights) -> (DVector<f64>, Vec<DVector<f64>>) {
    let base = &points[0];
    let n = w.n;
    let mut shift = DVector::zeros(base.len());
    for i in 1..=n {
        let pair = (&points[i] - base) + (&points[i + n] - base);
        shift.axpy(w.mean[i], &pair, 1.0);
    }
    let mean = base + &shift;
    let devs = points.iter().map(|p| (p - base) - &shift).collect();
    (mean, devs)
}

fn weighted_outer(a: &[DVector<f64>], b: &[DVector<f64>], w: &[f64]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(a[0].len(), b[0].len());
    for ((x, y), wi) in a.iter().zip(b).zip(w) {
        acc.ger(*wi, x, y, 1.0);
    }
    acc
}

/// Mean and covariance of propagated sigma points, with `additive_cov` added.
pub fn unscented_transform(
    points: &[DVector<f64>],
    w: &UtWeights,
    additive_cov: &DMatrix<f64>,
) -> Result<Gaussian, UkfError> {
    let m = check_points(points, w)?;
    if additive_cov.nrows() != m || additive_cov.ncols() != m {
        return Err(UkfError::Dimension { expected: m, got: additive_cov.nrows() });
    }
    let (mean, devs) = weighted_moments(points, w);
    let cov = weighted_outer(&devs, &devs, &w.cov) + additive_cov;
    Ok(Gaussian { mean, cov: symmetrize(&cov) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub posterior: Gaussian,
    pub predicted_measurement: DVector<f64>,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// True if the posterior covariance needed eigenvalue repair.
    pub repaired: bool,
}

/// Unscented measurement update. `sigma` must be drawn from `pred`.
pub fn measurement_update<H>(
    pred: &Gaussian,
    sigma: &SigmaSet,
    h: H,
    z: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<UpdateOutcome, UkfError>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = pred.dim();
    check_points(&sigma.points, &sigma.weights)?;
    let w = &sigma.weights;
    let zs: Vec<DVector<f64>> = sigma.points.iter().map(&h).collect();
    let m = check_points(&zs, w)?;
    if z.len() != m {
        return Err(UkfError::Dimension { expected: m, got: z.len() });
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(UkfError::Dimension { expected: m, got: r.nrows() });
    }
    let (z_hat, dz) = weighted_moments(&zs, w);
    let dx: Vec<DVector<f64>> = sigma.points.iter().map(|p| p - &pred.mean).collect();
    let s = symmetrize(&(weighted_outer(&dz, &dz, &w.cov) + r));
    let pxz = weighted_outer(&dx, &dz, &w.cov);
    let s_chol = Cholesky::new(s.clone()).ok_or(UkfError::SingularInnovation)?;
    // K = Pxz S⁻¹  ⇔  S Kᵀ = Pxzᵀ
    let gain = s_chol.solve(&pxz.transpose()).transpose();
    let innovation = z - &z_hat;
    let mean = &pred.mean + &gain * &innovation;
    let mut cov = &pred.cov - &gain * &s * gain.transpose();
    let repaired = repair_covariance(&mut cov);
    debug_assert_eq!(mean.len(), n);
    Ok(UpdateOutcome {
        posterior: Gaussian { mean, cov },
        predicted_measurement: z_hat,
        innovation,
        innovation_cov: s,
        cross_cov: pxz,
        gain,
        repaired,
    })
}

/// A filter instance: current belief plus its weights.
#[derive(Debug, Clone)]
pub struct Ukf {
    pub weights: UtWeights,
    pub state: Gaussian,
    /// Number of covariance repairs performed so far.
    pub repairs: usize,
}

impl Ukf {
    pub fn new(initial: Gaussian, params: &UtParams) -> Result<Self, UkfError> {
        let weights = compute_weights(initial.dim(), params)?;
        Ok(Self { weights, state: initial, repairs: 0 })
    }

    /// Time update. `propagate` receives the whole sigma set and returns the
    /// propagated points in the same order.
    pub fn predict<F, E>(&mut self, propagate: F, q: &DMatrix<f64>) -> Result<(), E>
    where
        F: FnOnce(&SigmaSet) -> Result<Vec<DVector<f64>>, E>,
        E: From<UkfError>,
    {
        let sigma = generate_sigma_points(&self.state, &self.weights)?;
        let propagated = propagate(&sigma)?;
        let mut pred = unscented_transform(&propagated, &self.weights, q)?;
        if repair_covariance(&mut pred.cov) {
            self.repairs += 1;
            log::warn!("predicted covariance repaired by eigenvalue clamping");
        }
        self.state = pred;
        Ok(())
    }

    pub fn update<H>(&mut self, h: H, z: &DVector<f64>, r: &DMatrix<f64>) -> Result<UpdateOutcome, UkfError>
    where
        H: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let sigma = regenerate_sigma_points(&self.state, &self.weights)?;
        let out = measurement_update(&self.state, &sigma, h, z, r)?;
        if out.repaired {
            self.repairs += 1;
            log::warn!("posterior covariance repaired by eigenvalue clamping");
        }
        self.state = out.posterior.clone();
        Ok(out)
    }
}

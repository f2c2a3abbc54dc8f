//! Generators of base Hamiltonians and perturbation families.
//!
//! Three families cover the geometry at desk scale: the oscillator
//! ladder `diag(1, 1+s, 1+2s, ...)` whose truncations are literal
//! leading blocks, a discrete 1D Laplacian with a quadratic well on a
//! fixed domain (refining the grid, so *not* block-nested), and seeded
//! random SPD matrices with log-uniform spectra in a Haar-random basis.
//! Every generator is deterministic: identical specs produce
//! bit-identical operators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::HermitianOperator;
use crate::perturbation::{perturbation_norm, BasePoint, NormKind};
use crate::{Error, Result};

/// Family-specific parameters of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    /// Evenly spaced ladder `diag(1, 1+spacing, 1+2*spacing, ...)`.
    Oscillator { spacing: f64 },
    /// Tridiagonal `(-1, 2, -1)` on `dim` interior grid points of the
    /// unit interval plus `amplitude * (x - 1/2)^2` on the diagonal,
    /// shifted so the minimum eigenvalue is 1.
    Laplacian1d { potential_amplitude: f64 },
    /// Eigenvalues log-uniform in `[1, lambda_max]`, re-anchored so the
    /// smallest is exactly 1, in a Haar-random orthogonal basis.
    RandomSpd { seed: u64, lambda_max: f64 },
}

/// A base-model recipe: family, truncation dimension, and the declared
/// trace-class exponent `beta0` of the infinite model. `beta0` is a
/// property of the model, not something a truncation can determine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: ModelFamily,
    pub dim: usize,
    pub beta0: f64,
}

impl ModelSpec {
    pub fn oscillator(dim: usize, spacing: f64, beta0: f64) -> Self {
        Self {
            family: ModelFamily::Oscillator { spacing },
            dim,
            beta0,
        }
    }

    pub fn laplacian1d(dim: usize, potential_amplitude: f64, beta0: f64) -> Self {
        Self {
            family: ModelFamily::Laplacian1d {
                potential_amplitude,
            },
            dim,
            beta0,
        }
    }

    pub fn random_spd(dim: usize, seed: u64, lambda_max: f64, beta0: f64) -> Self {
        Self {
            family: ModelFamily::RandomSpd { seed, lambda_max },
            dim,
            beta0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidModel("dim must be >= 1".into()));
        }
        match self.family {
            ModelFamily::Oscillator { spacing } => {
                if !spacing.is_finite() || spacing < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "oscillator spacing must be finite and >= 0, got {spacing}"
                    )));
                }
            }
            ModelFamily::Laplacian1d {
                potential_amplitude,
            } => {
                if !potential_amplitude.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "potential amplitude must be finite, got {potential_amplitude}"
                    )));
                }
            }
            ModelFamily::RandomSpd { lambda_max, .. } => {
                if !lambda_max.is_finite() || lambda_max < 1.0 {
                    return Err(Error::InvalidModel(format!(
                        "lambda_max must be finite and >= 1, got {lambda_max}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Shapes of generated perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Nearest-neighbour hopping: ones on the first off-diagonals. Its
    /// operator norm stays below 2 at every dimension.
    Bounded,
    /// Alternating-sign diagonal.
    Diagonal,
    /// Ones everywhere off the diagonal.
    OffDiagonal,
    /// Diagonal multiplication operator `cos(2 pi x)` on the model grid.
    Potential,
    /// Seeded Gaussian `(G + G^T) / 2`.
    RandomSymmetric { seed: u64 },
}

/// Build the base point of a model: `H` with minimum eigenvalue exactly
/// 1 and `beta0` copied from the spec.
pub fn make_base(spec: &ModelSpec) -> Result<BasePoint> {
    spec.validate()?;
    let h = base_operator(spec)?;
    BasePoint::new(h, spec.beta0)
}

/// The Hamiltonian of a model spec at an arbitrary truncation dimension.
/// For the oscillator this is the leading block of every larger
/// truncation; the Laplacian refines its grid instead.
pub fn base_operator_at_dim(spec: &ModelSpec, dim: usize) -> Result<HermitianOperator> {
    let mut resized = spec.clone();
    resized.dim = dim;
    resized.validate()?;
    base_operator(&resized)
}

fn base_operator(spec: &ModelSpec) -> Result<HermitianOperator> {
    let n = spec.dim;
    match spec.family {
        ModelFamily::Oscillator { spacing } => {
            let diag: Vec<f64> = (0..n).map(|k| 1.0 + spacing * k as f64).collect();
            HermitianOperator::from_diagonal(&diag)
        }
        ModelFamily::Laplacian1d {
            potential_amplitude,
        } => {
            let raw = HermitianOperator::new(laplacian1d_matrix(n, potential_amplitude))?;
            raw.with_unit_floor()
        }
        ModelFamily::RandomSpd { seed, lambda_max } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let log_max = lambda_max.ln();
            let mut values: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0.0..=1.0) * log_max).exp())
                .collect();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            for v in &mut values {
                *v = (*v - min) + 1.0;
            }
            let basis = haar_orthogonal(&mut rng, n);
            Ok(HermitianOperator::from_eigen(basis, values))
        }
    }
}

/// Raw grid Laplacian plus quadratic well, before any spectral shift:
/// `2` on the diagonal, `-1` on the first off-diagonals, plus
/// `amplitude * (x_i - 1/2)^2` at grid points `x_i = i / (n + 1)`.
pub fn laplacian1d_matrix(n: usize, amplitude: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let x = (i + 1) as f64 / (n + 1) as f64;
        m[(i, i)] = 2.0 + amplitude * (x - 0.5) * (x - 0.5);
        if i + 1 < n {
            m[(i, i + 1)] = -1.0;
            m[(i + 1, i)] = -1.0;
        }
    }
    m
}

/// Haar-distributed random orthogonal matrix: QR of a Gaussian matrix
/// with the sign of each `R` diagonal entry folded into `Q`.
pub fn haar_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Generate a symmetric perturbation of the given shape, scaled so the
/// designated norm at the model's base equals `scale`.
pub fn make_perturbation(
    spec: &ModelSpec,
    kind: PerturbationKind,
    norm: NormKind,
    scale: f64,
) -> Result<HermitianOperator> {
    if !scale.is_finite() {
        return Err(Error::ParamOutOfRange {
            name: "scale",
            value: scale,
            expected: "finite",
        });
    }
    let base = make_base(spec)?;
    let direction = perturbation_direction(spec, kind)?;
    let magnitude = perturbation_norm(&base, &direction, norm)?;
    if magnitude < 1e-300 {
        return Err(Error::ZeroDirection);
    }
    direction.scale(scale / magnitude)
}

fn perturbation_direction(spec: &ModelSpec, kind: PerturbationKind) -> Result<HermitianOperator> {
    let n = spec.dim;
    match kind {
        PerturbationKind::Bounded => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n.saturating_sub(1) {
                m[(i, i + 1)] = 1.0;
                m[(i + 1, i)] = 1.0;
            }
            HermitianOperator::new(m)
        }
        PerturbationKind::Diagonal => {
            let diag: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
            HermitianOperator::from_diagonal(&diag)
        }
        PerturbationKind::OffDiagonal => {
            let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
            HermitianOperator::new(m)
        }
        PerturbationKind::Potential => {
            let diag: Vec<f64> = (0..n)
                .map(|i| {
                    let x = (i + 1) as f64 / (n + 1) as f64;
                    (2.0 * std::f64::consts::PI * x).cos()
                })
                .collect();
            HermitianOperator::from_diagonal(&diag)
        }
        PerturbationKind::RandomSymmetric { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = DMatrix::from_fn(n, n, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            });
            HermitianOperator::new(g)
        }
    }
}

/// Embed `x` as the leading block of a larger zero matrix.
pub fn embed_leading_block(x: &HermitianOperator, dim: usize) -> Result<HermitianOperator> {
    if dim < x.dim() {
        return Err(Error::DimensionMismatch(x.dim(), dim));
    }
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (x.dim(), x.dim())).copy_from(x.entries());
    HermitianOperator::new(m)
}

/// Nested truncations `H^(N) = oscillator(N) + X` with the perturbation
/// embedded as a leading block; every `H^(N)` is the leading block of
/// `H^(N+k)`, so partial traces are literal partial sums.
pub fn oscillator_truncation_family(
    spacing: f64,
    x: HermitianOperator,
) -> impl Fn(usize) -> Result<HermitianOperator> {
    move |dim: usize| {
        if dim < x.dim() {
            return Err(Error::DimensionMismatch(x.dim(), dim));
        }
        let spec = ModelSpec::oscillator(dim, spacing, 0.5);
        let h = base_operator(&spec)?;
        h.add(&embed_leading_block(&x, dim)?)
    }
}

/// Per-dimension truncations of the model base itself (no perturbation).
/// Oscillator truncations are block-nested; the Laplacian regenerates
/// its grid at each dimension, so its tail study reads spectral sums
/// only. Random SPD models have no nesting structure and are rejected.
pub fn truncation_family(spec: &ModelSpec) -> Result<impl Fn(usize) -> Result<HermitianOperator>> {
    if matches!(spec.family, ModelFamily::RandomSpd { .. }) {
        return Err(Error::InvalidModel(
            "random_spd has no nested truncations".into(),
        ));
    }
    let template = spec.clone();
    Ok(move |dim: usize| base_operator_at_dim(&template, dim))
}

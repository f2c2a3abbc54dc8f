//! The flat exponential affine structure on the hood.
//!
//! Chart coordinates are scores, a convex subset of a linear space, so
//! the hood inherits an affine structure: the (+1)-mixture of `rho_X`
//! and `rho_Y` is `rho_{lambda X + (1-lambda) Y}` — interpolation of
//! generators, not of densities. Parallel transport along *any* path
//! just re-centers the representative at the target point, so it is
//! path-independent by construction; the path argument is accepted and
//! deliberately ignored, making flatness an executable fact.
//!
//! The competing (-1)-mixture `lambda rho_X + (1-lambda) rho_Y` mixes
//! the densities themselves. Whether it stays inside the hood is an
//! open question; [`mixture_membership_probe`] reports what happens at
//! a given truncation without claiming generality.

use crate::gibbs::{gibbs_state, hood_norm, GibbsState};
use crate::linalg::{HermitianOperator, MatrixFunction};
use crate::manifold::{center, Score};
use crate::perturbation::{norm_omega, norm_zero, BasePoint, BasePointId};
use crate::{Error, Result};

/// A tangent vector at a base point: a centered score.
#[derive(Debug, Clone)]
pub struct TangentVector {
    score: Score,
    base_ref: BasePointId,
}

impl TangentVector {
    pub fn new(score: Score) -> Self {
        let base_ref = score.base_ref();
        Self { score, base_ref }
    }

    pub fn score(&self) -> &Score {
        &self.score
    }

    pub fn base_ref(&self) -> BasePointId {
        self.base_ref
    }

    pub fn dim(&self) -> usize {
        self.score.dim()
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::ParamOutOfRange {
            name,
            value,
            expected: "[0, 1]",
        });
    }
    Ok(())
}

/// The (+1)-convex mixture `rho_{lambda X + (1-lambda) Y}`. Both
/// endpoints and the interpolated generator must be small at the base.
pub fn exp_mixture(
    base: &BasePoint,
    x: &HermitianOperator,
    y: &HermitianOperator,
    lambda: f64,
) -> Result<GibbsState> {
    check_unit_interval("lambda", lambda)?;
    let radius = base.hood_radius();
    for x_or_y in [x, y] {
        let norm = hood_norm(base, x_or_y)?;
        if !norm.is_finite() || norm >= radius {
            return Err(Error::PerturbationTooLarge { norm, radius });
        }
    }
    let mix = x.scale(lambda)?.add(&y.scale(1.0 - lambda)?)?;
    gibbs_state(base, &mix)
}

/// The (-1)-convex mixture `lambda rho_X + (1-lambda) rho_Y` of the
/// densities themselves: trace one and positive, but generally *not* a
/// Gibbs state of a small perturbation.
pub fn mix_mixture(
    state_x: &GibbsState,
    state_y: &GibbsState,
    lambda: f64,
) -> Result<HermitianOperator> {
    check_unit_interval("lambda", lambda)?;
    if state_x.dim() != state_y.dim() {
        return Err(Error::DimensionMismatch(state_x.dim(), state_y.dim()));
    }
    state_x
        .rho()
        .scale(lambda)?
        .add(&state_y.rho().scale(1.0 - lambda)?)
}

/// (+1)-parallel transport: move the representative line `{Z + alpha I}`
/// from the hyperplane of scores at `from` to the one at `to`. The path
/// is validated against the endpoints and otherwise unused — transport
/// is exactly path-independent.
pub fn parallel_transport(
    v: &TangentVector,
    from: &BasePoint,
    to: &BasePoint,
    path: &[BasePoint],
) -> Result<TangentVector> {
    if v.base_ref() != from.id() {
        return Err(Error::BaseMismatch {
            expected: from.id().0,
            found: v.base_ref().0,
        });
    }
    if from.dim() != to.dim() {
        return Err(Error::DimensionMismatch(from.dim(), to.dim()));
    }
    if !path.is_empty() {
        let starts = path.first().map(|p| p.id()) == Some(from.id());
        let ends = path.last().map(|p| p.id()) == Some(to.id());
        if !starts || !ends {
            return Err(Error::PathEndpointMismatch);
        }
    }
    let representative = v.score().xhat();
    Ok(TangentVector::new(center(to, representative)?))
}

/// What happened when a (-1)-mixture was pushed back through the chart
/// machinery at a base point.
#[derive(Debug, Clone)]
pub struct MixtureProbeReport {
    pub lambda: f64,
    /// Smallest eigenvalue of the mixed density.
    pub min_eigenvalue: f64,
    /// True when the mixture is numerically singular (eigenvalue below
    /// `1e-300`), in which case no generator or norms exist.
    pub singular: bool,
    /// Hood norm (centered zero-norm) of `K - H_0` for `K = -log sigma`
    /// refloored to `>= I`.
    pub norm_zero: Option<f64>,
    /// Omega norm of the same centered perturbation.
    pub norm_omega: Option<f64>,
    pub hood_radius: f64,
    /// Whether the mixture happens to satisfy the hood condition at
    /// this truncation. Diagnostic only; no claim of generality.
    pub in_hood: Option<bool>,
}

/// Probe whether `lambda rho_X + (1-lambda) rho_Y` lands back inside
/// the hood of `base` at this truncation.
pub fn mixture_membership_probe(
    base: &BasePoint,
    state_x: &GibbsState,
    state_y: &GibbsState,
    lambda: f64,
) -> Result<MixtureProbeReport> {
    for state in [state_x, state_y] {
        if state.base_ref() != base.id() {
            return Err(Error::BaseMismatch {
                expected: base.id().0,
                found: state.base_ref().0,
            });
        }
    }
    let sigma = mix_mixture(state_x, state_y, lambda)?;
    let min_eigenvalue = sigma.min_eigenvalue();
    if min_eigenvalue < 1e-300 {
        return Ok(MixtureProbeReport {
            lambda,
            min_eigenvalue,
            singular: true,
            norm_zero: None,
            norm_omega: None,
            hood_radius: base.hood_radius(),
            in_hood: None,
        });
    }
    let generator = sigma
        .matrix_fn(MatrixFunction::Log)?
        .scale(-1.0)?
        .with_unit_floor()?;
    let perturbation =
        HermitianOperator::new(generator.entries() - base.hamiltonian().entries())?;
    let centered = center(base, &perturbation)?;
    let zero = norm_zero(base, centered.xhat())?;
    let omega = norm_omega(base, centered.xhat())?;
    Ok(MixtureProbeReport {
        lambda,
        min_eigenvalue,
        singular: false,
        norm_zero: Some(zero),
        norm_omega: Some(omega),
        hood_radius: base.hood_radius(),
        in_hood: Some(zero < base.hood_radius()),
    })
}

/// Trace distance `(1/2) ||rho - sigma||_1` between two densities.
pub fn trace_distance(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let diff = a.add(&b.scale(-1.0)?)?;
    Ok(0.5
        * diff
            .spectral()
            .eigenvalues()
            .iter()
            .map(|l| l.abs())
            .sum::<f64>())
}

/// The fixed non-commuting two-level pair used by the distinctness
/// checks: `X = s * offdiag(1, 1)` and `Y = s * diag(1, -1)`.
pub fn witness_pair_2x2(scale: f64) -> Result<(HermitianOperator, HermitianOperator)> {
    let x = HermitianOperator::new(nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[0.0, 1.0, 1.0, 0.0],
    ))?
    .scale(scale)?;
    let y = HermitianOperator::from_diagonal(&[scale, -scale])?;
    Ok((x, y))
}

//! Perturbed Gibbs states and their diagnostics.
//!
//! A small perturbation `X` of a base point `H >= I` generates the state
//! `rho_X = exp(-(H + X)) / Z_X`. The generator is renormalized by a
//! multiple of the identity so that `H_eff >= I` with minimum eigenvalue
//! exactly 1; the partition function absorbs the shift, so the state
//! itself only depends on the equivalence class of `X` modulo identity
//! shifts. Accordingly, smallness is checked on the centered
//! representative `X - (rho_0 . X) I`, which is constant on that class.
//!
//! The trace-class pedigree of a state is tracked through
//! `beta_class = beta0 / (1 - a)` with `a` the form relative bound of
//! the centered perturbation: `exp(-beta H_X)` stays trace class for
//! every `beta` above it, which [`trace_tail`] makes observable as
//! convergent partial traces across nested truncations.

use crate::linalg::HermitianOperator;
use crate::perturbation::{
    norm_zero, relative_bound_form, BasePoint, BasePointId, RelativeBound,
};
use crate::{Error, Result};

/// Default `b` grid for the relative bound entering `beta_class`.
pub const DEFAULT_B_GRID: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];

/// A normalized Gibbs state together with its generator and free energy.
#[derive(Debug, Clone)]
pub struct GibbsState {
    rho: HermitianOperator,
    log_z: f64,
    h_eff: HermitianOperator,
    beta_class: f64,
    base_ref: BasePointId,
}

impl GibbsState {
    /// The density matrix: positive, trace one.
    pub fn rho(&self) -> &HermitianOperator {
        &self.rho
    }

    /// Free energy `log Z` of the renormalized generator, so that
    /// `rho = exp(-H_eff) / exp(log_z)`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// The generator, shifted so its minimum eigenvalue is 1.
    pub fn h_eff(&self) -> &HermitianOperator {
        &self.h_eff
    }

    /// Exponent certifying the eigenvalue decay class of the state:
    /// `beta0 / (1 - a)`, strictly below 1 for small perturbations.
    pub fn beta_class(&self) -> f64 {
        self.beta_class
    }

    /// Fingerprint of the base point this state was constructed over.
    pub fn base_ref(&self) -> BasePointId {
        self.base_ref
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }
}

/// The representative of `{X + alpha I}` with zero regularized mean at
/// the base state: `X - (rho_0 . X) I`, the quantity all hood checks
/// run on.
pub fn centered_representative(
    base: &BasePoint,
    x: &HermitianOperator,
) -> Result<HermitianOperator> {
    if x.dim() != base.dim() {
        return Err(Error::DimensionMismatch(base.dim(), x.dim()));
    }
    if x.is_zero() {
        return Ok(x.clone());
    }
    let rho0 = gibbs_state(base, &HermitianOperator::zeros(base.dim())?)?;
    let mean = regularized_mean(&rho0, x, 0.5)?;
    x.shift(-mean)
}

/// Zero-norm of the centered representative; a perturbation generates a
/// state in the hood iff this is strictly below `1 - beta0`.
pub fn hood_norm(base: &BasePoint, x: &HermitianOperator) -> Result<f64> {
    norm_zero(base, &centered_representative(base, x)?)
}

/// Construct `rho_X = exp(-(H + X)) / Z` over a base point.
///
/// The hood condition is checked on the centered representative
/// `X - (rho_0 . X) I`, whose zero-norm must be strictly below
/// `1 - beta0`; this makes acceptance (and the resulting state)
/// invariant under `X -> X + alpha I`.
pub fn gibbs_state(base: &BasePoint, x: &HermitianOperator) -> Result<GibbsState> {
    let centered = centered_representative(base, x)?;
    let norm = norm_zero(base, &centered)?;
    let radius = base.hood_radius();
    if !norm.is_finite() || norm >= radius {
        return Err(Error::PerturbationTooLarge { norm, radius });
    }

    let h_eff = base.hamiltonian().add(x)?.with_unit_floor()?;
    let log_z = h_eff
        .spectral()
        .eigenvalues()
        .iter()
        .map(|&l| (-l).exp())
        .sum::<f64>()
        .ln();
    let weights: Vec<f64> = h_eff
        .spectral()
        .eigenvalues()
        .iter()
        .map(|&l| (-l - log_z).exp())
        .collect();
    // rho gets its own decomposition rather than inheriting the
    // generator's eigenbasis
    let rho = HermitianOperator::new(h_eff.spectral().assemble(&weights))?;

    let bound = relative_bound_form(base, &centered, &DEFAULT_B_GRID)?;
    let beta_class = base.beta0() / (1.0 - bound.a);

    Ok(GibbsState {
        rho,
        log_z,
        h_eff,
        beta_class,
        base_ref: base.id(),
    })
}

/// The state of the base point itself, `X = 0`.
pub fn base_state(base: &BasePoint) -> Result<GibbsState> {
    gibbs_state(base, &HermitianOperator::zeros(base.dim())?)
}

/// Semiboundedness surrogate: is `H + X` bounded below by `-b` for the
/// given relative bound? Intended for form-kind bounds computed on the
/// same `(base, X)` pair.
pub fn semibound_check(
    base: &BasePoint,
    x: &HermitianOperator,
    bound: &RelativeBound,
) -> Result<bool> {
    if x.dim() != base.dim() {
        return Err(Error::DimensionMismatch(base.dim(), x.dim()));
    }
    let perturbed = base.hamiltonian().add(x)?;
    Ok(perturbed.min_eigenvalue() >= -bound.b - 1e-9)
}

/// Regularized mean `Tr(rho^lambda X rho^(1-lambda))` for
/// `lambda` in `(0, 1)`; finite-dimensional cyclicity makes it
/// independent of `lambda`, which the implementation exposes rather than
/// assumes by evaluating the literal product. Eigenvalue dust below zero
/// is clamped before the fractional powers.
pub fn regularized_mean(state: &GibbsState, x: &HermitianOperator, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::ParamOutOfRange {
            name: "lambda",
            value: lambda,
            expected: "open interval (0, 1)",
        });
    }
    if x.dim() != state.dim() {
        return Err(Error::DimensionMismatch(state.dim(), x.dim()));
    }
    let weights: Vec<f64> = state
        .rho
        .spectral()
        .eigenvalues()
        .iter()
        .map(|&w| w.max(0.0))
        .collect();
    let left: Vec<f64> = weights.iter().map(|&w| w.powf(lambda)).collect();
    let right: Vec<f64> = weights.iter().map(|&w| w.powf(1.0 - lambda)).collect();
    let a = state.rho.spectral().assemble(&left);
    let b = state.rho.spectral().assemble(&right);
    Ok((a * x.entries() * b).trace())
}

/// Partial traces of `exp(-beta H)` across a family of truncations.
#[derive(Debug, Clone)]
pub struct TraceTailReport {
    pub beta: f64,
    pub dims: Vec<usize>,
    pub partial_traces: Vec<f64>,
    /// True when the last two increments both fell below the tolerance
    /// (a single increment can fake convergence on slowly growing
    /// tails), or trivially when the tolerance is infinite.
    pub converged: bool,
    /// Geometric extrapolation of the remaining tail from the last two
    /// increments; `NaN` when fewer than two increments exist.
    pub tail_estimate: f64,
}

/// Evaluate `Tr exp(-beta H^(N))` over the given truncation dimensions.
pub fn trace_tail<F>(family: F, beta: f64, dims: &[usize], tail_tol: f64) -> Result<TraceTailReport>
where
    F: Fn(usize) -> Result<HermitianOperator>,
{
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::ParamOutOfRange {
            name: "beta",
            value: beta,
            expected: "positive and finite",
        });
    }
    if dims.is_empty() || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "dims must be nonempty and strictly ascending".into(),
        ));
    }

    let mut partial_traces = Vec::with_capacity(dims.len());
    for &dim in dims {
        let h = family(dim)?;
        if h.dim() != dim {
            return Err(Error::DimensionMismatch(dim, h.dim()));
        }
        let trace: f64 = h
            .spectral()
            .eigenvalues()
            .iter()
            .map(|&l| (-beta * l).exp())
            .sum();
        partial_traces.push(trace);
    }

    let increments: Vec<f64> = partial_traces.windows(2).map(|w| w[1] - w[0]).collect();
    let converged = tail_tol.is_infinite()
        || (increments.len() >= 2
            && increments[increments.len() - 2].abs() < tail_tol
            && increments[increments.len() - 1].abs() < tail_tol);

    let tail_estimate = if increments.len() >= 2 {
        let d_prev = increments[increments.len() - 2];
        let d_last = increments[increments.len() - 1];
        if d_last == 0.0 {
            0.0
        } else if d_prev.abs() > 0.0 && d_last.abs() < d_prev.abs() {
            let r = d_last.abs() / d_prev.abs();
            d_last.abs() * r / (1.0 - r)
        } else {
            f64::INFINITY
        }
    } else {
        f64::NAN
    };

    Ok(TraceTailReport {
        beta,
        dims: dims.to_vec(),
        partial_traces,
        converged,
        tail_estimate,
    })
}

/// `sum_i lambda_i^p` over the spectrum of the state, for `p` in
/// `(0, 1)`: always finite at a fixed truncation, returned as a growth
/// diagnostic alongside the finiteness flag.
pub fn cp_membership(state: &GibbsState, p: f64) -> Result<(bool, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ParamOutOfRange {
            name: "p",
            value: p,
            expected: "open interval (0, 1)",
        });
    }
    let sum: f64 = state
        .rho
        .spectral()
        .eigenvalues()
        .iter()
        .map(|&w| w.max(0.0).powf(p))
        .sum();
    Ok((sum.is_finite(), sum))
}

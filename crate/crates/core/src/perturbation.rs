//! Perturbation classes and their norms at a base Hamiltonian.
//!
//! A base point is a Hamiltonian `H >= I` together with the trace-class
//! exponent `beta0` of its Gibbs state. A symmetric perturbation `X` is
//! measured against the resolvent `R = H^{-1}` through a one-parameter
//! family of norms
//!
//! ```text
//! |X|_eps = || R^(1/2+eps) X R^(1/2-eps) ||,   eps in [0, 1/2],
//! ```
//!
//! whose endpoints are the form norm `|X|_0 = ||R^(1/2) X R^(1/2)||` and
//! the operator norm `|X|_omega = ||X R||`. The family is monotone in
//! `eps`, every norm is a genuine norm, and the form relative bound `a`
//! of `X` never exceeds `|X|_0`. "Small" means the chosen norm is
//! strictly below the hood radius `1 - beta0`.
//!
//! In finite dimensions quadratic forms and operators coincide, so a
//! single [`HermitianOperator`] plays both roles; which reading produced
//! a relative bound is recorded in [`RelativeBound::kind`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{operator_norm, HermitianOperator, MatrixFunction};
use crate::{Error, Result};

/// Default resolution of the epsilon grid over `[0, 1/2]`.
pub const DEFAULT_EPS_GRID_POINTS: usize = 21;

/// Stable fingerprint of a base point, used to track provenance of
/// scores and states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasePointId(pub u64);

impl std::fmt::Display for BasePointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Which member of the norm family to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Operator norm `||X R||`.
    Omega,
    /// Form norm `||R^(1/2) X R^(1/2)||`.
    Zero,
    /// Interpolating norm at the given `eps` in `[0, 1/2]`.
    Eps(f64),
}

/// A base Hamiltonian `H >= I`, its cached resolvent `R = H^{-1}`, and
/// the declared trace-class exponent `beta0` of the associated state.
#[derive(Debug, Clone)]
pub struct BasePoint {
    h: HermitianOperator,
    r: HermitianOperator,
    beta0: f64,
    id: BasePointId,
}

impl BasePoint {
    /// Requires `min eig(H) >= 1 - 1e-12` and `beta0` in `(0, 1)`.
    pub fn new(h: HermitianOperator, beta0: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0 < 1.0) {
            return Err(Error::ParamOutOfRange {
                name: "beta0",
                value: beta0,
                expected: "open interval (0, 1)",
            });
        }
        let min = h.min_eigenvalue();
        if min < 1.0 - 1e-12 {
            return Err(Error::NotBoundedBelowByOne {
                min_eigenvalue: min,
            });
        }
        let r = h.matrix_fn(MatrixFunction::Power(-1.0))?;
        let id = fingerprint(&h, beta0);
        Ok(Self { h, r, beta0, id })
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.h
    }

    /// The cached resolvent at the origin, `R = H^{-1}`.
    pub fn resolvent(&self) -> &HermitianOperator {
        &self.r
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `1 - beta0`, the strict radius of the hood around this point.
    pub fn hood_radius(&self) -> f64 {
        1.0 - self.beta0
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn id(&self) -> BasePointId {
        self.id
    }

    /// Entries of `H^{-t}`, assembled in the cached eigenbasis.
    pub fn resolvent_power(&self, t: f64) -> DMatrix<f64> {
        let mapped: Vec<f64> = self
            .h
            .spectral()
            .eigenvalues()
            .iter()
            .map(|&l| l.powf(-t))
            .collect();
        self.h.spectral().assemble(&mapped)
    }

    fn check_dim(&self, x: &HermitianOperator) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), x.dim()));
        }
        Ok(())
    }
}

fn fingerprint(h: &HermitianOperator, beta0: f64) -> BasePointId {
    // FNV-1a over the raw entry bits; stable across runs and platforms.
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut acc = OFFSET;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            acc ^= u64::from(byte);
            acc = acc.wrapping_mul(PRIME);
        }
    };
    eat(h.dim() as u64);
    eat(beta0.to_bits());
    for &v in h.entries().iter() {
        eat(v.to_bits());
    }
    BasePointId(acc)
}

/// `L^{-s} (U^T X U) L^{-t}` — the weighted conjugation of `X` into the
/// eigenbasis of `H`, where the resolvent powers become diagonal. Norms
/// of `R^s X R^t` are computed here since the conjugation is unitary.
fn weighted_conjugate(base: &BasePoint, x: &HermitianOperator, s: f64, t: f64) -> DMatrix<f64> {
    let u = base.h.spectral().eigenvectors();
    let lam = base.h.spectral().eigenvalues();
    let mut m = u.transpose() * x.entries() * u;
    let n = base.dim();
    let left: Vec<f64> = lam.iter().map(|&l| l.powf(-s)).collect();
    let right: Vec<f64> = lam.iter().map(|&l| l.powf(-t)).collect();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= left[i] * right[j];
        }
    }
    m
}

/// `||X R||`: the norm making `X` comparable to operator-bounded
/// perturbations.
pub fn norm_omega(base: &BasePoint, x: &HermitianOperator) -> Result<f64> {
    base.check_dim(x)?;
    Ok(operator_norm(&weighted_conjugate(base, x, 0.0, 1.0)))
}

/// `||R^(1/2) X R^(1/2)||`: the form norm.
pub fn norm_zero(base: &BasePoint, x: &HermitianOperator) -> Result<f64> {
    base.check_dim(x)?;
    Ok(operator_norm(&weighted_conjugate(base, x, 0.5, 0.5)))
}

/// `||R^(1/2+eps) X R^(1/2-eps)||` for `eps` in `[0, 1/2]`; matches
/// [`norm_zero`] at `eps = 0` and [`norm_omega`] at `eps = 1/2`.
pub fn norm_eps(base: &BasePoint, x: &HermitianOperator, eps: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::ParamOutOfRange {
            name: "eps",
            value: eps,
            expected: "[0, 1/2]",
        });
    }
    base.check_dim(x)?;
    Ok(operator_norm(&weighted_conjugate(
        base,
        x,
        0.5 + eps,
        0.5 - eps,
    )))
}

/// Dispatch on [`NormKind`].
pub fn perturbation_norm(base: &BasePoint, x: &HermitianOperator, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Omega => norm_omega(base, x),
        NormKind::Zero => norm_zero(base, x),
        NormKind::Eps(eps) => norm_eps(base, x, eps),
    }
}

/// The three norms of a perturbation at a base point: the two endpoints
/// plus an equally spaced `eps` grid.
#[derive(Debug, Clone)]
pub struct PerturbationNorms {
    pub omega: f64,
    pub zero: f64,
    pub eps_grid: Vec<(f64, f64)>,
}

impl PerturbationNorms {
    /// Compute all norms on an equally spaced grid of `grid_points >= 2`
    /// values of `eps` covering `[0, 1/2]`.
    pub fn compute(base: &BasePoint, x: &HermitianOperator, grid_points: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::ParamOutOfRange {
                name: "grid_points",
                value: grid_points as f64,
                expected: ">= 2",
            });
        }
        let omega = norm_omega(base, x)?;
        let zero = norm_zero(base, x)?;
        let mut eps_grid = Vec::with_capacity(grid_points);
        for k in 0..grid_points {
            let eps = 0.5 * k as f64 / (grid_points - 1) as f64;
            eps_grid.push((eps, norm_eps(base, x, eps)?));
        }
        Ok(Self {
            omega,
            zero,
            eps_grid,
        })
    }
}

/// Which reading of the relative bound a pair `(a, b)` certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `||X psi|| <= a ||H psi|| + b ||psi||`.
    Operator,
    /// `+-X <= a H + b I` as quadratic forms.
    Form,
}

/// Constants `(a, b)` of a relative bound; `a < 1` makes the
/// perturbation small in the form-bound sense.
#[derive(Debug, Clone, Copy)]
pub struct RelativeBound {
    pub a: f64,
    pub b: f64,
    pub kind: BoundKind,
}

impl RelativeBound {
    /// Check the bound against its defining inequality: as a matrix
    /// inequality for [`BoundKind::Form`], on 1000 random unit vectors
    /// for [`BoundKind::Operator`]. Both use a `1e-9` slack.
    pub fn verify(
        &self,
        base: &BasePoint,
        x: &HermitianOperator,
        rng: &mut impl Rng,
    ) -> Result<bool> {
        base.check_dim(x)?;
        const TOL: f64 = 1e-9;
        match self.kind {
            BoundKind::Form => {
                let bound = base.hamiltonian().scale(self.a)?.shift(self.b)?;
                let upper = bound.add(&x.scale(-1.0)?)?;
                let lower = bound.add(x)?;
                Ok(upper.min_eigenvalue() >= -TOL && lower.min_eigenvalue() >= -TOL)
            }
            BoundKind::Operator => {
                let n = base.dim();
                for _ in 0..1000 {
                    let mut psi = DVector::from_fn(n, |_, _| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                    });
                    let norm = psi.norm();
                    if norm == 0.0 {
                        continue;
                    }
                    psi /= norm;
                    let lhs = (x.entries() * &psi).norm();
                    let rhs = self.a * (base.hamiltonian().entries() * &psi).norm() + self.b;
                    if lhs > rhs + TOL {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Smallest `a` on the grid (after one local bisection refinement on
/// `b`) such that `+-X <= a H + b I`. For each `b`,
/// `a(b) = max(0, lmax(H^{-1/2}(X - bI)H^{-1/2}), lmax(H^{-1/2}(-X - bI)H^{-1/2}))`,
/// which is nonincreasing in `b`; ties prefer the smaller `b`. The
/// result always satisfies `a <= |X|_0`.
pub fn relative_bound_form(
    base: &BasePoint,
    x: &HermitianOperator,
    b_grid: &[f64],
) -> Result<RelativeBound> {
    let a_of_b = form_bound_evaluator(base, x, b_grid)?;

    let mut best = (a_of_b(b_grid[0]), b_grid[0]);
    let mut best_idx = 0usize;
    for (idx, &b) in b_grid.iter().enumerate().skip(1) {
        let a = a_of_b(b);
        if a < best.0 {
            best = (a, b);
            best_idx = idx;
        }
    }
    // one level of local bisection around the grid optimum
    let mut candidates = Vec::new();
    if best_idx > 0 {
        candidates.push(0.5 * (b_grid[best_idx - 1] + b_grid[best_idx]));
    }
    if best_idx + 1 < b_grid.len() {
        candidates.push(0.5 * (b_grid[best_idx] + b_grid[best_idx + 1]));
    }
    for b in candidates {
        let a = a_of_b(b);
        if a < best.0 {
            best = (a, b);
        }
    }

    Ok(RelativeBound {
        a: best.0,
        b: best.1,
        kind: BoundKind::Form,
    })
}

/// The full tradeoff curve `b -> a(b)` over the grid, for diagnostic
/// output; [`relative_bound_form`] picks its optimum from this curve.
pub fn relative_bound_curve(
    base: &BasePoint,
    x: &HermitianOperator,
    b_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let a_of_b = form_bound_evaluator(base, x, b_grid)?;
    Ok(b_grid.iter().map(|&b| (b, a_of_b(b))).collect())
}

fn form_bound_evaluator<'a>(
    base: &'a BasePoint,
    x: &HermitianOperator,
    b_grid: &[f64],
) -> Result<impl Fn(f64) -> f64 + 'a> {
    base.check_dim(x)?;
    if b_grid.is_empty()
        || b_grid.iter().any(|&b| !b.is_finite() || b < 0.0)
        || b_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidBoundGrid);
    }

    let u = base.h.spectral().eigenvectors();
    let lam = base.h.spectral().eigenvalues();
    let m = u.transpose() * x.entries() * u;
    let inv_sqrt: Vec<f64> = lam.iter().map(|&l| l.powf(-0.5)).collect();
    let n = base.dim();

    Ok(move |b: f64| -> f64 {
        let mut worst = 0.0f64;
        for sign in [1.0, -1.0] {
            let mut scaled = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    let shifted = sign * m[(i, j)] - if i == j { b } else { 0.0 };
                    scaled[(i, j)] = inv_sqrt[i] * shifted * inv_sqrt[j];
                }
            }
            let scaled = (&scaled + scaled.transpose()) * 0.5;
            let lmax = scaled
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
            worst = worst.max(lmax);
        }
        worst
    })
}

/// The operator-kind bound that comes for free from the omega norm:
/// `||X psi|| = ||X R H psi|| <= ||X R|| ||H psi||`, so
/// `(a, b) = (|X|_omega, 0)`.
pub fn relative_bound_operator(base: &BasePoint, x: &HermitianOperator) -> Result<RelativeBound> {
    Ok(RelativeBound {
        a: norm_omega(base, x)?,
        b: 0.0,
        kind: BoundKind::Operator,
    })
}

/// True iff the selected norm of `X` is strictly below the hood radius
/// `1 - beta0`.
pub fn is_small(base: &BasePoint, x: &HermitianOperator, kind: NormKind) -> Result<bool> {
    Ok(perturbation_norm(base, x, kind)? < base.hood_radius())
}

//! Charts, hoods, and atlas extension.
//!
//! Perturbations that differ by a multiple of the identity generate the
//! same state, so chart coordinates live on the quotient by the line
//! `{X + alpha I}`. The canonical section is the *score*: the
//! representative with zero regularized mean at the base state,
//! `Xhat = X - (rho_0 . X) I`. The map `rho_X -> Xhat` is a global chart
//! of the hood `{ rho_X : |X|_0 < 1 - beta0 }`, inverted by
//! [`inverse_chart`] inside the strict radius.
//!
//! Hoods around perturbed points reuse the same machinery with every
//! Hamiltonian replaced by `H_X` ([`norm_at`]); the resulting norms are
//! equivalent to the ones at the root, which
//! [`equivalence_constants`] estimates as empirical ratio bounds rather
//! than proves. An [`Atlas`] strings such steps together and tracks the
//! degrading trace-class exponent `beta_k = beta_{k-1} / (1 - a_k)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gibbs::{centered_representative, gibbs_state, GibbsState, DEFAULT_B_GRID};
use crate::linalg::{operator_norm, HermitianOperator};
use crate::perturbation::{
    norm_zero, perturbation_norm, relative_bound_form, BasePoint, BasePointId, NormKind,
};
use crate::{Error, Result};

/// A centered chart coordinate: the representative of `{X + alpha I}`
/// with zero regularized mean at its base point.
#[derive(Debug, Clone)]
pub struct Score {
    xhat: HermitianOperator,
    base_ref: BasePointId,
}

impl Score {
    pub fn xhat(&self) -> &HermitianOperator {
        &self.xhat
    }

    pub fn base_ref(&self) -> BasePointId {
        self.base_ref
    }

    pub fn dim(&self) -> usize {
        self.xhat.dim()
    }
}

/// Center a perturbation at the base state:
/// `Xhat = X - (rho_0 . X) I` with the mean taken at `lambda = 1/2`.
pub fn center(base: &BasePoint, x: &HermitianOperator) -> Result<Score> {
    Ok(Score {
        xhat: centered_representative(base, x)?,
        base_ref: base.id(),
    })
}

/// True iff `X - Y` is within `1e-10` of a multiple of the identity,
/// tested against the trace-mean multiple.
pub fn equivalent_mod_identity(x: &HermitianOperator, y: &HermitianOperator) -> Result<bool> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    let diff = x.add(&y.scale(-1.0)?)?;
    let t = diff.trace() / diff.dim() as f64;
    Ok(operator_norm(diff.shift(-t)?.entries()) <= 1e-10)
}

/// Chart coordinate of a state: recover the perturbation from
/// `H_eff - H_0` (well-defined up to an identity shift) and center it.
pub fn chart(base: &BasePoint, state: &GibbsState) -> Result<Score> {
    if state.dim() != base.dim() {
        return Err(Error::DimensionMismatch(base.dim(), state.dim()));
    }
    if state.base_ref() != base.id() {
        return Err(Error::BaseMismatch {
            expected: base.id().0,
            found: state.base_ref().0,
        });
    }
    let recovered =
        HermitianOperator::new(state.h_eff().entries() - base.hamiltonian().entries())?;
    center(base, &recovered)
}

/// Rebuild the state of a score; rejects scores on or outside the
/// strict hood radius.
pub fn inverse_chart(base: &BasePoint, score: &Score) -> Result<GibbsState> {
    if score.base_ref() != base.id() {
        return Err(Error::BaseMismatch {
            expected: base.id().0,
            found: score.base_ref().0,
        });
    }
    let norm = norm_zero(base, score.xhat())?;
    let radius = base.hood_radius();
    if !norm.is_finite() || norm >= radius {
        return Err(Error::HoodRadiusExceeded { norm, radius });
    }
    gibbs_state(base, score.xhat())
}

/// The perturbation norm at a shifted base point: same expression as at
/// the root, with every Hamiltonian replaced by `H_X`.
pub fn norm_at(base_x: &BasePoint, y: &HermitianOperator, kind: NormKind) -> Result<f64> {
    perturbation_norm(base_x, y, kind)
}

/// Ratio `|Y| at base_x / |Y| at base_0` of one test direction.
pub fn equivalence_ratio(
    base0: &BasePoint,
    base_x: &BasePoint,
    y: &HermitianOperator,
    kind: NormKind,
) -> Result<f64> {
    let denom = norm_at(base0, y, kind)?;
    if denom == 0.0 {
        return Err(Error::ZeroDirection);
    }
    Ok(norm_at(base_x, y, kind)? / denom)
}

/// Empirical norm-equivalence constants: min and max over an ensemble
/// of random symmetric directions of the ratio of norms at the two base
/// points. Evidence for equivalence, not a proof.
pub fn equivalence_constants(
    base0: &BasePoint,
    base_x: &BasePoint,
    kind: NormKind,
    ensemble_size: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if ensemble_size == 0 {
        return Err(Error::ParamOutOfRange {
            name: "ensemble_size",
            value: 0.0,
            expected: ">= 1",
        });
    }
    if base0.dim() != base_x.dim() {
        return Err(Error::DimensionMismatch(base0.dim(), base_x.dim()));
    }
    let n = base0.dim();
    let mut c_low = f64::INFINITY;
    let mut c_high = 0.0f64;
    let mut collected = 0usize;
    let mut attempts = 0usize;
    while collected < ensemble_size {
        attempts += 1;
        if attempts > 10 * ensemble_size + 10 {
            return Err(Error::ZeroDirection);
        }
        let g = DMatrix::from_fn(n, n, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        });
        let y = HermitianOperator::new(g)?;
        match equivalence_ratio(base0, base_x, &y, kind) {
            Ok(ratio) => {
                c_low = c_low.min(ratio);
                c_high = c_high.max(ratio);
                collected += 1;
            }
            Err(Error::ZeroDirection) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((c_low, c_high))
}

/// One extension step: the perturbation taken and the trace-class
/// exponent after it.
#[derive(Debug, Clone)]
pub struct AtlasStep {
    pub perturbation: HermitianOperator,
    pub beta: f64,
}

/// A root base point and the chain of small steps walked from it; the
/// current base point carries the accumulated Hamiltonian and exponent.
#[derive(Debug, Clone)]
pub struct Atlas {
    root: BasePoint,
    steps: Vec<AtlasStep>,
    current: BasePoint,
}

impl Atlas {
    pub fn new(root: BasePoint) -> Self {
        Self {
            current: root.clone(),
            root,
            steps: Vec::new(),
        }
    }

    pub fn root(&self) -> &BasePoint {
        &self.root
    }

    pub fn current(&self) -> &BasePoint {
        &self.current
    }

    pub fn steps(&self) -> &[AtlasStep] {
        &self.steps
    }

    /// The trace-class exponent after the last step.
    pub fn beta(&self) -> f64 {
        self.steps
            .last()
            .map(|s| s.beta)
            .unwrap_or_else(|| self.root.beta0())
    }

    /// Serialize to a JSON document: root spectrum and entries, the step
    /// list, and the exponents.
    pub fn to_json(&self) -> Result<String> {
        let doc = AtlasDoc {
            beta0: self.root.beta0(),
            root_spectrum: self.root.hamiltonian().spectral().eigenvalues().as_slice().to_vec(),
            root: OperatorDoc::from_op(self.root.hamiltonian()),
            steps: self
                .steps
                .iter()
                .map(|s| StepDoc {
                    perturbation: OperatorDoc::from_op(&s.perturbation),
                    beta: s.beta,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuild an atlas from its JSON document by replaying every
    /// extension step; recorded exponents must match the replay.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AtlasDoc = serde_json::from_str(text)?;
        let root_h = doc.root.to_op()?;
        let spectrum = root_h.spectral().eigenvalues();
        if doc.root_spectrum.len() != spectrum.len() {
            return Err(Error::AtlasDocument("root spectrum length mismatch".into()));
        }
        for (stored, computed) in doc.root_spectrum.iter().zip(spectrum.iter()) {
            if (stored - computed).abs() > 1e-9 * computed.abs().max(1.0) {
                return Err(Error::AtlasDocument(format!(
                    "root spectrum mismatch: stored {stored}, recomputed {computed}"
                )));
            }
        }
        let mut atlas = Atlas::new(BasePoint::new(root_h, doc.beta0)?);
        for (index, step) in doc.steps.iter().enumerate() {
            atlas = extend(&atlas, &step.perturbation.to_op()?)?;
            let replayed = atlas.beta();
            if (replayed - step.beta).abs() > 1e-12 * step.beta.abs().max(1.0) {
                return Err(Error::AtlasDocument(format!(
                    "step {index}: recorded beta {} but replay gives {replayed}",
                    step.beta
                )));
            }
        }
        Ok(atlas)
    }
}

/// Extend an atlas by a perturbation that is small at the current base:
/// `|Y|_0 < 1 - beta` strictly. The new base is `H + Y` refloored to
/// `>= I` and the exponent degrades to `beta / (1 - a_Y)`.
pub fn extend(atlas: &Atlas, y: &HermitianOperator) -> Result<Atlas> {
    let current = atlas.current();
    let norm = norm_zero(current, y)?;
    let radius = 1.0 - atlas.beta();
    if !norm.is_finite() || norm >= radius {
        return Err(Error::ExtensionRejected { norm, radius });
    }
    let a = relative_bound_form(current, y, &DEFAULT_B_GRID)?.a;
    let beta_new = atlas.beta() / (1.0 - a);
    let h_new = current.hamiltonian().add(y)?.with_unit_floor()?;
    let new_base = BasePoint::new(h_new, beta_new)?;

    let mut steps = atlas.steps.clone();
    steps.push(AtlasStep {
        perturbation: y.clone(),
        beta: beta_new,
    });
    Ok(Atlas {
        root: atlas.root.clone(),
        steps,
        current: new_base,
    })
}

#[derive(Serialize, Deserialize)]
struct AtlasDoc {
    beta0: f64,
    root_spectrum: Vec<f64>,
    root: OperatorDoc,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
struct OperatorDoc {
    dim: usize,
    /// Row-major entries (symmetric, so also column-major).
    entries: Vec<f64>,
}

impl OperatorDoc {
    fn from_op(op: &HermitianOperator) -> Self {
        let n = op.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(op.entries()[(i, j)]);
            }
        }
        Self { dim: n, entries }
    }

    fn to_op(&self) -> Result<HermitianOperator> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::AtlasDocument(format!(
                "operator document claims dim {} but has {} entries",
                self.dim,
                self.entries.len()
            )));
        }
        HermitianOperator::new(DMatrix::from_row_slice(self.dim, self.dim, &self.entries))
    }
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    perturbation: OperatorDoc,
    beta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{base_state, regularized_mean};
    use crate::models::{make_base, ModelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_diag_12() -> BasePoint {
        BasePoint::new(
            HermitianOperator::from_diagonal(&[1.0, 2.0]).unwrap(),
            0.5,
        )
        .unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> HermitianOperator {
        let g = DMatrix::from_fn(n, n, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        });
        HermitianOperator::new(g).unwrap()
    }

    fn small_at(base: &BasePoint, x: &HermitianOperator, fraction: f64) -> HermitianOperator {
        let target = fraction * base.hood_radius();
        x.scale(target / norm_zero(base, x).unwrap()).unwrap()
    }

    #[test]
    fn centering_kills_identity_multiples() {
        let base = base_diag_12();
        let x = HermitianOperator::identity(2).unwrap().scale(4.2).unwrap();
        let score = center(&base, &x).unwrap();
        assert!(operator_norm(score.xhat().entries()) < 1e-12);
    }

    #[test]
    fn centering_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let x = random_symmetric(&mut rng, 5);
        let once = center(&base, &x).unwrap();
        let twice = center(&base, once.xhat()).unwrap();
        let diff = operator_norm(&(once.xhat().entries() - twice.xhat().entries()));
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn centering_worked_two_level_example() {
        let base = base_diag_12();
        let x = HermitianOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        let score = center(&base, &x).unwrap();
        // mean of diag(1,0) in the two-level state is 1/(1 + e^{-1})
        let m = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((score.xhat().entries()[(0, 0)] - (1.0 - m)).abs() < 1e-12);
        assert!((score.xhat().entries()[(1, 1)] + m).abs() < 1e-12);
    }

    #[test]
    fn score_has_zero_regularized_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = make_base(&ModelSpec::oscillator(6, 1.0, 0.5)).unwrap();
        let rho0 = base_state(&base).unwrap();
        for _ in 0..10 {
            let x = random_symmetric(&mut rng, 6);
            let score = center(&base, &x).unwrap();
            let m = regularized_mean(&rho0, score.xhat(), 0.5).unwrap();
            assert!(m.abs() < 1e-9, "mean {m}");
        }
    }

    #[test]
    fn equivalence_mod_identity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_symmetric(&mut rng, 3);
        assert!(equivalent_mod_identity(&x, &x.shift(3.0).unwrap()).unwrap());

        let mut bumped = x.entries().clone();
        bumped[(0, 0)] += 1.0;
        let y = HermitianOperator::new(bumped).unwrap();
        assert!(!equivalent_mod_identity(&x, &y).unwrap());

        let noise = random_symmetric(&mut rng, 3).scale(1e-14).unwrap();
        let z = x.shift(-0.7).unwrap().add(&noise).unwrap();
        assert!(equivalent_mod_identity(&x, &z).unwrap());
    }

    #[test]
    fn chart_of_base_state_is_zero_score() {
        let base = base_diag_12();
        let state = base_state(&base).unwrap();
        let score = chart(&base, &state).unwrap();
        assert!(operator_norm(score.xhat().entries()) < 1e-12);
    }

    #[test]
    fn chart_round_trip_on_hood_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = make_base(&ModelSpec::oscillator(6, 1.0, 0.5)).unwrap();
        for _ in 0..20 {
            let x = small_at(&base, &random_symmetric(&mut rng, 6), 0.7);
            let state = gibbs_state(&base, &x).unwrap();
            let score = chart(&base, &state).unwrap();
            let rebuilt = inverse_chart(&base, &score).unwrap();
            let diff = operator_norm(&(rebuilt.rho().entries() - state.rho().entries()));
            assert!(diff < 1e-9, "diff {diff}");

            let score_again = chart(&base, &rebuilt).unwrap();
            let score_diff =
                operator_norm(&(score.xhat().entries() - score_again.xhat().entries()));
            assert!(score_diff < 1e-9, "score diff {score_diff}");
        }
    }

    #[test]
    fn chart_constant_on_equivalence_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let x = small_at(&base, &random_symmetric(&mut rng, 5), 0.5);
        let reference = chart(&base, &gibbs_state(&base, &x).unwrap()).unwrap();
        for _ in 0..10 {
            let alpha: f64 = rng.random_range(-5.0..5.0);
            let shifted_state = gibbs_state(&base, &x.shift(alpha).unwrap()).unwrap();
            let score = chart(&base, &shifted_state).unwrap();
            let diff = operator_norm(&(score.xhat().entries() - reference.xhat().entries()));
            assert!(diff < 1e-9, "alpha {alpha}: diff {diff}");
        }
    }

    #[test]
    fn chart_rejects_foreign_states() {
        let base = base_diag_12();
        let other = make_base(&ModelSpec::oscillator(2, 2.0, 0.5)).unwrap();
        let state = base_state(&other).unwrap();
        assert!(matches!(
            chart(&base, &state),
            Err(Error::BaseMismatch { .. })
        ));
    }

    #[test]
    fn inverse_chart_zero_score_gives_base_state() {
        let base = base_diag_12();
        let zero = center(&base, &HermitianOperator::zeros(2).unwrap()).unwrap();
        let state = inverse_chart(&base, &zero).unwrap();
        let rho0 = base_state(&base).unwrap();
        let diff = operator_norm(&(state.rho().entries() - rho0.rho().entries()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn inverse_chart_enforces_strict_radius() {
        // dim-1 arithmetic is exact: score value 0.5 sits on the boundary
        let base = BasePoint::new(
            HermitianOperator::from_diagonal(&[1.0]).unwrap(),
            0.5,
        )
        .unwrap();
        let boundary = Score {
            xhat: HermitianOperator::from_diagonal(&[0.5]).unwrap(),
            base_ref: base.id(),
        };
        assert!(matches!(
            inverse_chart(&base, &boundary),
            Err(Error::HoodRadiusExceeded { .. })
        ));

        // the same score scaled into the interior is accepted
        let inside = Score {
            xhat: HermitianOperator::from_diagonal(&[0.4]).unwrap(),
            base_ref: base.id(),
        };
        assert!(inverse_chart(&base, &inside).is_ok());
    }

    #[test]
    fn hood_acceptance_is_monotone_in_scaling() {
        // acceptance tracks the centered representative, which scales
        // linearly with X, so it flips exactly once along the ray
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        let x = random_symmetric(&mut rng, 4);
        let centered_norm = norm_zero(&base, center(&base, &x).unwrap().xhat()).unwrap();
        let unit = x.scale(base.hood_radius() / centered_norm).unwrap();

        let mut last_accepted = true;
        for k in 1..=15 {
            let t = k as f64 / 10.0;
            let candidate = unit.scale(t * 0.999).unwrap();
            let accepted = gibbs_state(&base, &candidate).is_ok();
            if !last_accepted {
                assert!(!accepted, "acceptance must be monotone in scale (t = {t})");
            }
            last_accepted = accepted;
        }
        assert!(!last_accepted, "scales beyond the radius must be rejected");
        assert!(gibbs_state(&base, &unit.scale(0.999).unwrap()).is_ok());
        assert!(gibbs_state(&base, &unit.scale(1.001).unwrap()).is_err());
    }

    #[test]
    fn norm_at_reduces_to_root_norms_for_zero_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let y = random_symmetric(&mut rng, 5);
        for kind in [NormKind::Omega, NormKind::Zero, NormKind::Eps(0.2)] {
            let at_root = perturbation_norm(&base, &y, kind).unwrap();
            let via_norm_at = norm_at(&base, &y, kind).unwrap();
            assert_eq!(at_root, via_norm_at);
        }
    }

    #[test]
    fn norm_at_shifted_base_diagonal_example() {
        // H = diag(1,2), X = diag(1,0): H_X = diag(2,2) -> floored to I
        let base = base_diag_12();
        let atlas = Atlas::new(base);
        let x = HermitianOperator::from_diagonal(&[0.2, 0.0]).unwrap();
        let extended = extend(&atlas, &x).unwrap();
        let base_x = extended.current();
        // floored Hamiltonian diag(1.2, 2) - 0.2 = diag(1, 1.8)
        assert_eq!(base_x.hamiltonian().min_eigenvalue(), 1.0);

        let y = HermitianOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .unwrap();
        let expect = (1.0f64 * 1.8).sqrt().recip();
        let got = norm_at(base_x, &y, NormKind::Zero).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");

        let unit = norm_at(base_x, base_x.hamiltonian(), NormKind::Zero).unwrap();
        assert!((unit - 1.0).abs() < 1e-10);
    }

    #[test]
    fn equivalence_constants_trivial_for_zero_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let atlas = extend(&Atlas::new(base.clone()), &HermitianOperator::zeros(5).unwrap())
            .unwrap();
        let (lo, hi) =
            equivalence_constants(&base, atlas.current(), NormKind::Zero, 50, &mut rng)
                .unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10, "({lo}, {hi})");
    }

    #[test]
    fn equivalence_ratio_matches_commuting_closed_form() {
        // diagonal base and step keep everything scalar: the ratio on
        // the k-th projector is h_k / h'_k
        let base = BasePoint::new(
            HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            0.5,
        )
        .unwrap();
        let step = HermitianOperator::from_diagonal(&[0.0, 0.1, -0.1, 0.2]).unwrap();
        let atlas = extend(&Atlas::new(base.clone()), &step).unwrap();
        let base_x = atlas.current();

        let h = [1.0, 2.0, 3.0, 4.0];
        let hp: Vec<f64> = (0..4)
            .map(|k| base_x.hamiltonian().entries()[(k, k)])
            .collect();
        for k in 0..4 {
            let mut proj = DMatrix::zeros(4, 4);
            proj[(k, k)] = 1.0;
            let y = HermitianOperator::new(proj).unwrap();
            let got = equivalence_ratio(&base, base_x, &y, NormKind::Zero).unwrap();
            let expect = h[k] / hp[k];
            assert!((got - expect).abs() < 1e-10, "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn equivalence_constants_bounded_on_random_ensemble() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let base = make_base(&ModelSpec::oscillator(6, 1.0, 0.5)).unwrap();
        let step = small_at(&base, &random_symmetric(&mut rng, 6), 0.6);
        let atlas = extend(&Atlas::new(base.clone()), &step).unwrap();
        let (lo, hi) =
            equivalence_constants(&base, atlas.current(), NormKind::Eps(0.25), 100, &mut rng)
                .unwrap();
        assert!(lo > 0.0 && lo <= hi && hi.is_finite(), "({lo}, {hi})");
    }

    #[test]
    fn extension_composes_like_the_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let x = small_at(&base, &random_symmetric(&mut rng, 5), 0.3);
        let y = small_at(&base, &random_symmetric(&mut rng, 5), 0.3);

        let two_step = extend(&extend(&Atlas::new(base.clone()), &x).unwrap(), &y).unwrap();
        let one_step = extend(&Atlas::new(base.clone()), &x.add(&y).unwrap()).unwrap();

        let rho_two = base_state(two_step.current()).unwrap();
        let rho_one = base_state(one_step.current()).unwrap();
        let diff = operator_norm(&(rho_two.rho().entries() - rho_one.rho().entries()));
        assert!(diff < 1e-10, "state distance {diff}");
        assert_eq!(two_step.steps().len(), 2);
    }

    #[test]
    fn extension_by_zero_keeps_beta() {
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        let atlas = extend(&Atlas::new(base), &HermitianOperator::zeros(4).unwrap()).unwrap();
        assert_eq!(atlas.beta(), 0.5);
    }

    #[test]
    fn extension_rejects_negative_hamiltonian_direction() {
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        let atlas = Atlas::new(base.clone());
        // -H has unit form norm, twice the radius 1/2
        let y = base.hamiltonian().scale(-1.0).unwrap();
        match extend(&atlas, &y) {
            Err(Error::ExtensionRejected { norm, radius }) => {
                assert!((norm - 1.0).abs() < 1e-12);
                assert_eq!(radius, 0.5);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn extension_strictness_matches_recomputed_norm() {
        // scaling to the exact boundary: acceptance must agree with the
        // strict comparison of the recomputed norm, whichever way
        // rounding lands
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        let atlas = Atlas::new(base.clone());
        for _ in 0..10 {
            let y = small_at(&base, &random_symmetric(&mut rng, 4), 1.0);
            let recomputed = norm_zero(&base, &y).unwrap();
            let accepted = extend(&atlas, &y).is_ok();
            assert_eq!(accepted, recomputed < base.hood_radius());

            assert!(extend(&atlas, &y.scale(1.0 + 1e-9).unwrap()).is_err());
            assert!(extend(&atlas, &y.scale(1.0 - 1e-9).unwrap()).is_ok());
        }
    }

    #[test]
    fn two_small_steps_reach_past_the_single_step_radius() {
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        // target has form norm 0.8 at the root: too large for one step
        let target = base
            .hamiltonian()
            .scale(0.8)
            .unwrap();
        assert!((norm_zero(&base, &target).unwrap() - 0.8).abs() < 1e-12);
        assert!(extend(&Atlas::new(base.clone()), &target).is_err());

        let half = target.scale(0.5).unwrap();
        let after_one = extend(&Atlas::new(base.clone()), &half).unwrap();
        let second_norm = norm_zero(after_one.current(), &half).unwrap();
        assert!(
            second_norm < 1.0 - after_one.beta(),
            "second step norm {second_norm} must clear radius {}",
            1.0 - after_one.beta()
        );
        let after_two = extend(&after_one, &half).unwrap();
        assert_eq!(after_two.steps().len(), 2);
        assert!(after_two.beta() < 1.0);

        // the composed walk really is the out-of-radius perturbation
        let direct = base.hamiltonian().add(&target).unwrap().with_unit_floor().unwrap();
        let diff = operator_norm(
            &(after_two.current().hamiltonian().entries() - direct.entries()),
        );
        assert!(diff < 1e-10, "diff {diff}");
    }

    #[test]
    fn atlas_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base = make_base(&ModelSpec::oscillator(5, 1.0, 0.5)).unwrap();
        let x = small_at(&base, &random_symmetric(&mut rng, 5), 0.4);
        let atlas = extend(&Atlas::new(base), &x).unwrap();
        let y = small_at(atlas.current(), &random_symmetric(&mut rng, 5), 0.3);
        let atlas = extend(&atlas, &y).unwrap();

        let text = atlas.to_json().unwrap();
        let back = Atlas::from_json(&text).unwrap();
        assert_eq!(back.steps().len(), 2);
        assert_eq!(back.beta(), atlas.beta());
        assert_eq!(
            back.current().hamiltonian().entries(),
            atlas.current().hamiltonian().entries()
        );
        assert_eq!(back.current().id(), atlas.current().id());
    }

    #[test]
    fn atlas_document_with_corrupted_beta_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let base = make_base(&ModelSpec::oscillator(4, 1.0, 0.5)).unwrap();
        let x = small_at(&base, &random_symmetric(&mut rng, 4), 0.4);
        let atlas = extend(&Atlas::new(base), &x).unwrap();
        let text = atlas.to_json().unwrap();
        let corrupted = text.replacen("\"beta\":", "\"beta\": 0.9999, \"stale\":", 1);
        assert!(matches!(
            Atlas::from_json(&corrupted),
            Err(Error::AtlasDocument(_)) | Err(Error::Json(_))
        ));
    }
}

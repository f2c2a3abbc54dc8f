//! Dense Hermitian spectral kernel.
//!
//! Everything in this crate runs through full eigendecompositions of real
//! symmetric matrices: matrix functions are `U f(L) U^T`, operator norms
//! are largest singular values. Dimensions are desk scale (up to a couple
//! of thousand), so no sparse or iterative shortcuts are taken.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Asymmetry above which construction logs a warning before symmetrizing.
pub const ASYMMETRY_WARN: f64 = 1e-8;

/// Eigenvalues below this floor make negative real powers a hard error
/// rather than a silent regularization.
pub const NEGATIVE_POWER_FLOOR: f64 = 1e-14;

/// A real function applied to the spectrum of a Hermitian operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    /// `exp(A)`.
    Exp,
    /// `exp(-beta * A)`.
    NegExp(f64),
    /// `log(A)`; requires a positive spectrum.
    Log,
    /// `A^t` for real `t`; fractional `t` requires a positive spectrum
    /// and negative `t` a spectrum above [`NEGATIVE_POWER_FLOOR`].
    Power(f64),
}

impl MatrixFunction {
    fn name(&self) -> &'static str {
        match self {
            MatrixFunction::Exp => "exp",
            MatrixFunction::NegExp(_) => "negexp",
            MatrixFunction::Log => "log",
            MatrixFunction::Power(_) => "power",
        }
    }
}

/// Eigenvalues (ascending) and the orthogonal matrix of eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthogonal matrix whose columns are the eigenvectors, ordered to
    /// match [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `U f(L) U^T` for the entrywise-mapped eigenvalues.
    pub fn assemble(&self, mapped: &[f64]) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        debug_assert_eq!(mapped.len(), n);
        let mut scaled = self.eigenvectors.clone();
        for (j, &m) in mapped.iter().enumerate() {
            scaled.column_mut(j).scale_mut(m);
        }
        let raw = scaled * self.eigenvectors.transpose();
        symmetrize(raw)
    }
}

/// A dense real symmetric matrix with an eagerly cached spectral
/// decomposition. Inputs are symmetrized as `(A + A^T)/2` on construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: DMatrix<f64>,
    spectral: SpectralDecomposition,
}

impl HermitianOperator {
    /// Build from a square matrix, symmetrizing and eigendecomposing.
    ///
    /// Logs a warning when the input deviates from symmetry by more than
    /// [`ASYMMETRY_WARN`] in any entry.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare(rows, cols));
        }
        if rows == 0 {
            return Err(Error::ParamOutOfRange {
                name: "dim",
                value: 0.0,
                expected: ">= 1",
            });
        }
        check_finite(&matrix)?;

        let asym = max_asymmetry(&matrix);
        if asym > ASYMMETRY_WARN {
            log::warn!("symmetrizing a matrix with asymmetry {asym:e}");
        }
        let entries = symmetrize(matrix);
        let spectral = decompose(&entries)?;
        Ok(Self { entries, spectral })
    }

    /// Build from diagonal values.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    /// The zero operator.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    /// The identity operator.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// Assemble `U diag(values) U^T` and cache `(values, U)` as the
    /// decomposition instead of re-solving. `U` must be orthogonal.
    pub(crate) fn from_eigen(eigenvectors: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        let spectral = sorted_spectral(eigenvalues, eigenvectors);
        let entries = spectral.assemble(spectral.eigenvalues.as_slice());
        Self { entries, spectral }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The cached spectral decomposition.
    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectral.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectral.eigenvalues[self.dim() - 1]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    /// Entrywise sum; the result is decomposed from scratch.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Self::new(&self.entries + &other.entries)
    }

    /// `t * A`, reusing the eigenbasis; entries are scaled exactly.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::ParamOutOfRange {
                name: "scale",
                value: t,
                expected: "finite",
            });
        }
        let entries = &self.entries * t;
        let values: Vec<f64> = self.spectral.eigenvalues.iter().map(|&l| l * t).collect();
        let spectral = sorted_spectral(values, self.spectral.eigenvectors.clone());
        Ok(Self { entries, spectral })
    }

    /// `A + alpha * I`, reusing the eigenbasis; the diagonal is shifted
    /// exactly.
    pub fn shift(&self, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::ParamOutOfRange {
                name: "shift",
                value: alpha,
                expected: "finite",
            });
        }
        let mut entries = self.entries.clone();
        for i in 0..self.dim() {
            entries[(i, i)] += alpha;
        }
        let values: Vec<f64> = self
            .spectral
            .eigenvalues
            .iter()
            .map(|&l| l + alpha)
            .collect();
        let spectral = sorted_spectral(values, self.spectral.eigenvectors.clone());
        Ok(Self { entries, spectral })
    }

    /// Shift by a multiple of the identity so the cached minimum
    /// eigenvalue is exactly 1. The second pass absorbs the rounding of
    /// the first; `1 - m` is exact for `m` near 1, so it terminates.
    pub fn with_unit_floor(&self) -> Result<Self> {
        let mut out = self.shift(1.0 - self.min_eigenvalue())?;
        for _ in 0..2 {
            if out.min_eigenvalue() == 1.0 {
                break;
            }
            out = out.shift(1.0 - out.min_eigenvalue())?;
        }
        Ok(out)
    }

    /// Apply a real function to the spectrum: `U f(L) U^T`.
    ///
    /// Domain violations (nonpositive eigenvalues under `log` or
    /// fractional powers, eigenvalues below [`NEGATIVE_POWER_FLOOR`]
    /// under negative powers) name the offending eigenvalue.
    pub fn matrix_fn(&self, f: MatrixFunction) -> Result<Self> {
        self.check_domain(f)?;
        let mapped: Vec<f64> = self
            .spectral
            .eigenvalues
            .iter()
            .map(|&l| match f {
                MatrixFunction::Exp => l.exp(),
                MatrixFunction::NegExp(beta) => (-beta * l).exp(),
                MatrixFunction::Log => l.ln(),
                MatrixFunction::Power(t) => l.powf(t),
            })
            .collect();
        Ok(Self::from_eigen(
            self.spectral.eigenvectors.clone(),
            mapped,
        ))
    }

    fn check_domain(&self, f: MatrixFunction) -> Result<()> {
        let needs_positive = match f {
            MatrixFunction::Log => true,
            MatrixFunction::Power(t) => !(t >= 0.0 && t.fract() == 0.0),
            _ => false,
        };
        if !needs_positive {
            return Ok(());
        }
        let floor = match f {
            MatrixFunction::Power(t) if t < 0.0 => NEGATIVE_POWER_FLOOR,
            _ => 0.0,
        };
        for (index, &l) in self.spectral.eigenvalues.iter().enumerate() {
            if l <= floor {
                return Err(Error::SpectrumDomain {
                    function: f.name(),
                    index,
                    eigenvalue: l,
                });
            }
        }
        Ok(())
    }
}

/// The spectral decomposition of a Hermitian operator (the cached one).
pub fn spectral(a: &HermitianOperator) -> &SpectralDecomposition {
    a.spectral()
}

/// Largest singular value of a general (not necessarily symmetric)
/// matrix. Returns `NaN` if the input has non-finite entries.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    m.singular_values().iter().fold(0.0f64, |acc, &s| acc.max(s))
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for ((row, col), &value) in m.iter().enumerate().map(|(k, v)| {
        let col = k / m.nrows();
        let row = k % m.nrows();
        ((row, col), v)
    }) {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { row, col, value });
        }
    }
    Ok(())
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mt = m.transpose();
    (m + mt) * 0.5
}

fn decompose(entries: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let dim = entries.nrows();
    let eigen = SymmetricEigen::try_new(entries.clone(), f64::EPSILON, 0)
        .ok_or(Error::DecompositionFailed { dim })?;
    Ok(sorted_spectral(
        eigen.eigenvalues.as_slice().to_vec(),
        eigen.eigenvectors,
    ))
}

fn sorted_spectral(values: Vec<f64>, vectors: DMatrix<f64>) -> SpectralDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite eigenvalues"));

    let sorted_values = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted_vectors = DMatrix::zeros(vectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    SpectralDecomposition {
        eigenvalues: sorted_values,
        eigenvectors: sorted_vectors,
    }
}

//! Faithful states on `M_n` and their modular structure.
//!
//! The standard form is the concrete matrix model: `M_n` acts as `a ⊗ 1` on
//! `C^n ⊗ C^n`, the commutant is `{1 ⊗ bᵀ}`, and the cyclic separating vector
//! of a state with density `ζ` is `Λ = vec(ζ^{1/2})`.

use crate::channel::LinearMap;
use crate::linalg::{self, c, cr, CMatrix, CVector, HermEig, C64};
use crate::{Error, Result};

/// Smallest admissible eigenvalue of a faithful density.
pub const FAITHFUL_EPS: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FaithfulState {
    density: CMatrix,
    log_density: CMatrix,
    sqrt_density: CMatrix,
    inv_sqrt_density: CMatrix,
    eig: HermEig,
}

impl FaithfulState {
    /// Validates `density` (Hermitian, unit trace, spectrum bounded below by
    /// [`FAITHFUL_EPS`]) and caches its logarithm and square roots.
    pub fn new(density: CMatrix) -> Result<Self> {
        let density = linalg::checked_hermitian(&density).map_err(|e| match e {
            Error::NotHermitian { deviation } => {
                Error::NotADensity(format!("not Hermitian (deviation {deviation:.3e})"))
            }
            other => other,
        })?;
        let tr = linalg::trace(&density).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotADensity(format!("trace is {tr}, expected 1")));
        }
        let eig = linalg::herm_eig(&density)?;
        let min_eigenvalue = eig.min_eigenvalue();
        if min_eigenvalue < FAITHFUL_EPS {
            return Err(Error::NotFaithful { min_eigenvalue });
        }
        let log_density = eig.map_spectrum(|x| cr(x.ln()));
        let sqrt_density = eig.map_spectrum(|x| cr(x.sqrt()));
        let inv_sqrt_density = eig.map_spectrum(|x| cr(1.0 / x.sqrt()));
        Ok(Self {
            density,
            log_density,
            sqrt_density,
            inv_sqrt_density,
            eig,
        })
    }

    /// Diagonal state `diag(weights)`.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(linalg::real_diag(weights))
    }

    /// Qubit state `diag(p, 1 − p)`.
    pub fn qubit(p: f64) -> Result<Self> {
        Self::diagonal(&[p, 1.0 - p])
    }

    /// The normalized trace `1/n`.
    pub fn tracial(n: usize) -> Self {
        Self::new(linalg::identity(n) * cr(1.0 / n as f64)).expect("tracial state is faithful")
    }

    /// Product state `self ⊗ other`.
    pub fn product(&self, other: &FaithfulState) -> Result<Self> {
        Self::new(linalg::kron(&self.density, &other.density))
    }

    pub fn dim(&self) -> usize {
        self.density.nrows()
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn log_density(&self) -> &CMatrix {
        &self.log_density
    }

    pub fn sqrt_density(&self) -> &CMatrix {
        &self.sqrt_density
    }

    pub fn inv_sqrt_density(&self) -> &CMatrix {
        &self.inv_sqrt_density
    }

    pub fn spectrum(&self) -> &HermEig {
        &self.eig
    }

    /// Max-entry distance between the two densities.
    pub fn distance_to(&self, other: &FaithfulState) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        linalg::max_abs_diff(&self.density, &other.density)
    }

    fn check_dim(&self, a: &CMatrix, context: &'static str) -> Result<()> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found: if a.nrows() != self.dim() { a.nrows() } else { a.ncols() },
            });
        }
        Ok(())
    }

    /// `Tr(ζ a)`.
    pub fn expectation(&self, a: &CMatrix) -> Result<C64> {
        self.check_dim(a, "expectation")?;
        Ok(trace_product(&self.density, a))
    }

    /// `ζ^{it}`.
    pub fn modular_unitary(&self, t: f64) -> CMatrix {
        self.eig.map_spectrum(|x| (c(0.0, t) * x.ln()).exp())
    }

    /// `σ_t(a) = ζ^{it} a ζ^{−it}`.
    pub fn modular_apply(&self, t: f64, a: &CMatrix) -> Result<CMatrix> {
        self.check_dim(a, "modular_apply")?;
        let u = self.modular_unitary(t);
        Ok(&u * a * u.adjoint())
    }

    /// The modular flow at time `t` as a superoperator.
    pub fn modular_flow(&self, t: f64) -> LinearMap {
        LinearMap::conjugation(&self.modular_unitary(t))
    }

    /// Generator `a ↦ [ln ζ, a]`; `σ_t = exp(i t · generator)`.
    pub fn modular_generator(&self) -> LinearMap {
        LinearMap::commutator_with(&self.log_density)
    }

    /// KMS pairing `Tr(ζ^{1/2} a* ζ^{1/2} b)`.
    pub fn kms_inner(&self, a: &CMatrix, b: &CMatrix) -> Result<C64> {
        self.check_dim(a, "kms_inner")?;
        self.check_dim(b, "kms_inner")?;
        let s = &self.sqrt_density;
        Ok(trace_product(&(s * a.adjoint() * s), b))
    }

    /// `Λ = vec(ζ^{1/2})`.
    pub fn standard_vector(&self) -> CVector {
        linalg::vec(&self.sqrt_density)
    }
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

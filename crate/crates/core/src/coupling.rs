//! Transport plans between two faithful states.
//!
//! A plan from `μ` to `ν` is stored through its channel `E: M_n → M_m`
//! (`ν ∘ E = μ`) together with the coupling density
//! `κ = ((1 ⊗ η^{1/2}) C_E (1 ⊗ η^{1/2}))ᵀ`, so that the coupling state is
//! `ω(c) = Tr(κ c)` on `M_n ⊗ M_m` with the second slot transposed. Its
//! marginals are `ζ` and `ηᵀ`.

use crate::channel::{self, IntertwinedPair, LinearMap, UcpMap, MAP_TOL};
use crate::linalg::{self, CMatrix, Factor};
use crate::qstate::FaithfulState;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransportPlan {
    pair: IntertwinedPair,
    kappa: CMatrix,
}

fn weight(n: usize, root: &CMatrix) -> CMatrix {
    linalg::kron(&linalg::identity(n), root)
}

impl TransportPlan {
    pub fn from_channel(pair: IntertwinedPair) -> Result<Self> {
        let n = pair.source.dim();
        if !pair.map.is_verified() {
            let min_eigenvalue = linalg::min_eigenvalue(pair.map.choi())?;
            if min_eigenvalue < -MAP_TOL {
                return Err(Error::NotCompletelyPositive { min_eigenvalue });
            }
        }
        let g = weight(n, pair.target.sqrt_density());
        let kappa = linalg::symmetrize(&(&g * pair.map.choi() * &g).transpose());
        Ok(Self { pair, kappa })
    }

    /// Rebuilds the plan from a coupling density with marginals `(ζ, ηᵀ)`.
    pub fn from_density(kappa: &CMatrix, source: &FaithfulState, target: &FaithfulState) -> Result<Self> {
        let (n, m) = (source.dim(), target.dim());
        if kappa.shape() != (n * m, n * m) {
            return Err(Error::InvalidCoupling(format!(
                "density has shape {:?}, expected {}x{}",
                kappa.shape(),
                n * m,
                n * m
            )));
        }
        let h = linalg::checked_hermitian(kappa)
            .map_err(|e| Error::InvalidCoupling(e.to_string()))?;
        let min_eig = linalg::min_eigenvalue(&h)?;
        if min_eig < -MAP_TOL {
            return Err(Error::InvalidCoupling(format!(
                "density is not positive (minimal eigenvalue {min_eig:.3e})"
            )));
        }
        let first = linalg::partial_trace(&h, Factor::Second, (n, m))?;
        let second = linalg::partial_trace(&h, Factor::First, (n, m))?;
        let r1 = linalg::max_abs_diff(&first, source.density());
        let r2 = linalg::max_abs_diff(&second, &target.density().transpose());
        if r1 > MAP_TOL || r2 > MAP_TOL {
            return Err(Error::InvalidCoupling(format!(
                "marginals off by {r1:.3e} (first) and {r2:.3e} (second)"
            )));
        }
        let g = weight(n, target.inv_sqrt_density());
        let choi = &g * h.transpose() * &g;
        let map = UcpMap::from_choi(n, m, &choi).map_err(|e| Error::InvalidCoupling(e.to_string()))?;
        let pair = IntertwinedPair::new(map, source.clone(), target.clone())
            .map_err(|e| Error::InvalidCoupling(e.to_string()))?;
        Ok(Self { pair, kappa: h })
    }

    /// The product coupling `μ ⊙ ν'`, with channel `a ↦ μ(a) 1`.
    pub fn product(source: &FaithfulState, target: &FaithfulState) -> Self {
        let map = UcpMap::state_collapse(source, target.dim());
        let pair = IntertwinedPair::new(map, source.clone(), target.clone())
            .expect("state collapse intertwines any pair of states");
        Self::from_channel(pair).expect("verified map")
    }

    /// The identity coupling `δ_μ`.
    pub fn identity(state: &FaithfulState) -> Self {
        let pair = IntertwinedPair::new(UcpMap::identity(state.dim()), state.clone(), state.clone())
            .expect("identity preserves the state");
        Self::from_channel(pair).expect("verified map")
    }

    pub fn to_density(&self) -> &CMatrix {
        &self.kappa
    }

    pub fn channel(&self) -> &UcpMap {
        &self.pair.map
    }

    pub fn pair(&self) -> &IntertwinedPair {
        &self.pair
    }

    pub fn source(&self) -> &FaithfulState {
        &self.pair.source
    }

    pub fn target(&self) -> &FaithfulState {
        &self.pair.target
    }

    /// Largest deviation of the two marginals from `(ζ, ηᵀ)`.
    pub fn marginal_residual(&self) -> f64 {
        let dims = (self.source().dim(), self.target().dim());
        let first = linalg::partial_trace(&self.kappa, Factor::Second, dims).expect("shape");
        let second = linalg::partial_trace(&self.kappa, Factor::First, dims).expect("shape");
        linalg::max_abs_diff(&first, self.source().density())
            .max(linalg::max_abs_diff(&second, &self.target().density().transpose()))
    }

    /// `ω(c) = Tr(κ c)`.
    pub fn evaluate(&self, c: &CMatrix) -> Result<crate::C64> {
        if c.shape() != self.kappa.shape() {
            return Err(Error::DimensionMismatch {
                context: "TransportPlan::evaluate",
                expected: self.kappa.nrows(),
                found: c.nrows(),
            });
        }
        Ok(crate::qstate::trace_product(&self.kappa, c))
    }

    /// Plan from `μ` to `ξ` with channel `E_p ∘ E_w`.
    pub fn compose(w: &TransportPlan, p: &TransportPlan) -> Result<TransportPlan> {
        if w.target().dim() != p.source().dim() {
            return Err(Error::DimensionMismatch {
                context: "TransportPlan::compose",
                expected: w.target().dim(),
                found: p.source().dim(),
            });
        }
        let residual = w.target().distance_to(p.source());
        if residual > MAP_TOL {
            return Err(Error::StateMismatch { residual });
        }
        let map = UcpMap::compose(p.channel(), w.channel())?;
        let pair = IntertwinedPair::new(map, w.source().clone(), p.target().clone())?;
        Self::from_channel(pair)
    }

    /// Plan from `ν` to `μ` whose channel is the KMS-dual of this one.
    pub fn kms_reverse(&self) -> Result<TransportPlan> {
        Self::from_channel(self.pair.kms_dual()?)
    }

    /// Restricts a plan between product states `μ_R ⊗ μ_S` and `ν_K ⊗ ν_L`
    /// to the second factors. Requires `E ∘ P^{μ_R} = P^{ν_K} ∘ E` for the
    /// conditional expectations onto the second factors.
    pub fn reduce(&self, state_r: &FaithfulState, state_k: &FaithfulState) -> Result<TransportPlan> {
        let (n, m) = (self.source().dim(), self.target().dim());
        let (n_r, n_k) = (state_r.dim(), state_k.dim());
        if n % n_r != 0 || m % n_k != 0 {
            return Err(Error::DimensionMismatch {
                context: "TransportPlan::reduce",
                expected: n_r,
                found: n,
            });
        }
        let (n_s, n_l) = (n / n_r, m / n_k);
        let source_s = second_factor(self.source(), state_r, n_s)?;
        let target_l = second_factor(self.target(), state_k, n_l)?;

        let p_source = channel::cond_expectation_onto_second(state_r, n_s);
        let p_target = channel::cond_expectation_onto_second(state_k, n_l);
        let e = self.channel();
        let residual = UcpMap::compose(e, &p_source)?.distance(&UcpMap::compose(&p_target, e)?);
        if residual > MAP_TOL {
            return Err(Error::BalanceViolated { residual });
        }
        let reduced = UcpMap::compose(
            &channel::slice_to_second(state_k, n_l),
            &UcpMap::compose(e, &channel::embed_second(n_r, n_s))?,
        )?;
        Self::from_channel(IntertwinedPair::new(reduced, source_s, target_l)?)
    }
}

/// Second-factor state of `state`, checking that it equals `state_r ⊗ ·`.
fn second_factor(state: &FaithfulState, state_r: &FaithfulState, n_s: usize) -> Result<FaithfulState> {
    let rho_s = linalg::partial_trace(state.density(), Factor::First, (state_r.dim(), n_s))?;
    let second = FaithfulState::new(linalg::symmetrize(&rho_s))?;
    let residual = state.distance_to(&state_r.product(&second)?);
    if residual > MAP_TOL {
        return Err(Error::StateMismatch { residual });
    }
    Ok(second)
}

/// `A ⊗ B` on `M_{n_1 n_2}` for maps acting on the two factors.
pub fn tensor_maps(a: &LinearMap, b: &LinearMap) -> LinearMap {
    let (n1, n2) = (a.dim_in(), b.dim_in());
    let (m1, m2) = (a.dim_out(), b.dim_out());
    let mut images_a = Vec::with_capacity(n1 * n1);
    for idx in 0..n1 * n1 {
        images_a.push(a.apply(&linalg::matrix_unit(n1, idx / n1, idx % n1)).expect("shape"));
    }
    let mut images_b = Vec::with_capacity(n2 * n2);
    for idx in 0..n2 * n2 {
        images_b.push(b.apply(&linalg::matrix_unit(n2, idx / n2, idx % n2)).expect("shape"));
    }
    LinearMap::from_fn(n1 * n2, m1 * m2, |x| {
        let mut out = CMatrix::zeros(m1 * m2, m1 * m2);
        for i in 0..n1 {
            for j in 0..n1 {
                for k in 0..n2 {
                    for l in 0..n2 {
                        let coef = x[(i * n2 + k, j * n2 + l)];
                        if coef != crate::C64::new(0.0, 0.0) {
                            out += linalg::kron(&images_a[i * n1 + j], &images_b[k * n2 + l]) * coef;
                        }
                    }
                }
            }
        }
        out
    })
}

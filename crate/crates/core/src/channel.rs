//! Linear maps between matrix algebras, u.c.p. maps in Choi form, KMS-duals,
//! and the conditional expectations and embeddings of composite systems.
//!
//! Maps act in the Heisenberg picture. A map `E: M_n → M_m` is stored as the
//! superoperator `S` with `vec(E(a)) = S vec(a)`, and its Choi matrix is
//! `C_E = Σ_{ij} e_ij ⊗ E(e_ij)`, so that
//! `C[(i·m + k, j·m + l)] = E(e_ij)[(k, l)] = S[(k·m + l, i·n + j)]`.

use crate::linalg::{self, cr, CMatrix, C64};
use crate::qstate::{trace_product, FaithfulState};
use crate::{Error, Result};

/// Tolerance for complete positivity, unitality and state intertwining.
pub const MAP_TOL: f64 = 1e-9;

/// A linear map `M_n → M_m` in superoperator form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    dim_in: usize,
    dim_out: usize,
    superop: CMatrix,
}

impl LinearMap {
    pub fn from_superop(dim_in: usize, dim_out: usize, superop: CMatrix) -> Result<Self> {
        if superop.shape() != (dim_out * dim_out, dim_in * dim_in) {
            return Err(Error::DimensionMismatch {
                context: "LinearMap::from_superop",
                expected: dim_out * dim_out,
                found: superop.nrows(),
            });
        }
        Ok(Self {
            dim_in,
            dim_out,
            superop,
        })
    }

    /// Tabulates `f` on the matrix units of `M_n`.
    pub fn from_fn(dim_in: usize, dim_out: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut superop = CMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for i in 0..dim_in {
            for j in 0..dim_in {
                let img = f(&linalg::matrix_unit(dim_in, i, j));
                assert_eq!(img.shape(), (dim_out, dim_out), "from_fn: wrong output shape");
                superop.set_column(i * dim_in + j, &linalg::vec(&img));
            }
        }
        Self {
            dim_in,
            dim_out,
            superop,
        }
    }

    pub fn from_choi(dim_in: usize, dim_out: usize, choi: &CMatrix) -> Result<Self> {
        let size = dim_in * dim_out;
        if choi.shape() != (size, size) {
            return Err(Error::DimensionMismatch {
                context: "LinearMap::from_choi",
                expected: size,
                found: choi.nrows(),
            });
        }
        let (n, m) = (dim_in, dim_out);
        let superop = CMatrix::from_fn(m * m, n * n, |row, col| {
            let (k, l) = (row / m, row % m);
            let (i, j) = (col / n, col % n);
            choi[(i * m + k, j * m + l)]
        });
        Ok(Self {
            dim_in,
            dim_out,
            superop,
        })
    }

    pub fn choi(&self) -> CMatrix {
        let (n, m) = (self.dim_in, self.dim_out);
        CMatrix::from_fn(n * m, n * m, |r, c| {
            let (i, k) = (r / m, r % m);
            let (j, l) = (c / m, c % m);
            self.superop[(k * m + l, i * n + j)]
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            dim_in: n,
            dim_out: n,
            superop: linalg::identity(n * n),
        }
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Self {
            dim_in,
            dim_out,
            superop: CMatrix::zeros(dim_out * dim_out, dim_in * dim_in),
        }
    }

    /// `a ↦ u a u*`.
    pub fn conjugation(u: &CMatrix) -> Self {
        let n = u.nrows();
        Self {
            dim_in: n,
            dim_out: n,
            superop: linalg::kron(u, &u.conjugate()),
        }
    }

    /// `a ↦ [h, a]`.
    pub fn commutator_with(h: &CMatrix) -> Self {
        let n = h.nrows();
        let id = linalg::identity(n);
        Self {
            dim_in: n,
            dim_out: n,
            superop: linalg::kron(h, &id) - linalg::kron(&id, &h.transpose()),
        }
    }

    /// `a ↦ Tr(ζ a) 1_m`.
    pub fn state_collapse(state: &FaithfulState, dim_out: usize) -> Self {
        let n = state.dim();
        Self::from_fn(n, dim_out, |a| {
            linalg::identity(dim_out) * trace_product(state.density(), a)
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn superop(&self) -> &CMatrix {
        &self.superop
    }

    pub fn apply(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::DimensionMismatch {
                context: "LinearMap::apply",
                expected: self.dim_in,
                found: a.nrows(),
            });
        }
        linalg::unvec(&(&self.superop * linalg::vec(a)), (self.dim_out, self.dim_out))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if inner.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch {
                context: "LinearMap::compose",
                expected: self.dim_in,
                found: inner.dim_out,
            });
        }
        Ok(Self {
            dim_in: inner.dim_in,
            dim_out: self.dim_out,
            superop: &self.superop * &inner.superop,
        })
    }

    /// Adjoint for the trace pairing: `Tr(E(a)* x) = Tr(a* E^‡(x))`.
    pub fn hs_adjoint(&self) -> LinearMap {
        Self {
            dim_in: self.dim_out,
            dim_out: self.dim_in,
            superop: self.superop.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> LinearMap {
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            superop: &self.superop * s,
        }
    }

    pub fn sub(&self, other: &LinearMap) -> Result<LinearMap> {
        if self.superop.shape() != other.superop.shape() {
            return Err(Error::DimensionMismatch {
                context: "LinearMap::sub",
                expected: self.superop.nrows(),
                found: other.superop.nrows(),
            });
        }
        Ok(Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            superop: &self.superop - &other.superop,
        })
    }

    /// Largest entry of the difference of the superoperators; this is the
    /// largest matrix-entry discrepancy over inputs that are matrix units.
    pub fn distance(&self, other: &LinearMap) -> f64 {
        if self.superop.shape() != other.superop.shape() {
            return f64::INFINITY;
        }
        linalg::max_abs_diff(&self.superop, &other.superop)
    }

    /// `‖E(1) − 1‖_max`.
    pub fn unitality_residual(&self) -> f64 {
        let img = self
            .apply(&linalg::identity(self.dim_in))
            .expect("identity has the input dimension");
        linalg::max_abs_diff(&img, &linalg::identity(self.dim_out))
    }

    /// Residual of `ν ∘ E = μ`, measured as `‖E^‡(η) − ζ‖_max`.
    pub fn intertwining_residual(&self, source: &FaithfulState, target: &FaithfulState) -> f64 {
        if source.dim() != self.dim_in || target.dim() != self.dim_out {
            return f64::INFINITY;
        }
        let pulled = self
            .hs_adjoint()
            .apply(target.density())
            .expect("dimensions checked above");
        linalg::max_abs_diff(&pulled, source.density())
    }
}

/// A unital completely positive map in Choi form.
///
/// Maps built through [`UcpMap::from_choi`] or [`UcpMap::from_map`] are
/// verified; [`UcpMap::raw`] skips the checks and clears the flag.
#[derive(Debug, Clone)]
pub struct UcpMap {
    map: LinearMap,
    choi: CMatrix,
    verified: bool,
}

impl UcpMap {
    /// Validates a Choi matrix: Hermitian, eigenvalues `≥ −MAP_TOL` (small
    /// negative parts are clipped), and unital within `MAP_TOL`.
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: &CMatrix) -> Result<Self> {
        let h = linalg::checked_hermitian(choi)?;
        let eig = linalg::herm_eig(&h)?;
        let min_eigenvalue = eig.min_eigenvalue();
        if min_eigenvalue < -MAP_TOL {
            return Err(Error::NotCompletelyPositive { min_eigenvalue });
        }
        let choi = if min_eigenvalue < 0.0 {
            eig.map_spectrum(|x| cr(x.max(0.0)))
        } else {
            h
        };
        let map = LinearMap::from_choi(dim_in, dim_out, &choi)?;
        let residual = map.unitality_residual();
        if residual > MAP_TOL {
            return Err(Error::NotUnital { residual });
        }
        Ok(Self {
            map,
            choi,
            verified: true,
        })
    }

    pub fn from_map(map: &LinearMap) -> Result<Self> {
        Self::from_choi(map.dim_in, map.dim_out, &map.choi())
    }

    /// Wraps a map without checking complete positivity or unitality.
    pub fn raw(map: LinearMap) -> Self {
        let choi = map.choi();
        Self {
            map,
            choi,
            verified: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: LinearMap::identity(n),
            choi: LinearMap::identity(n).choi(),
            verified: true,
        }
    }

    /// `a ↦ u a u*` for a unitary `u`.
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        let n = u.nrows();
        let defect = linalg::max_abs_diff(&(u.adjoint() * u), &linalg::identity(n));
        if defect > MAP_TOL {
            return Err(Error::InvalidInput(format!(
                "conjugating matrix is not unitary (defect {defect:.3e})"
            )));
        }
        Self::from_map(&LinearMap::conjugation(u))
    }

    /// `a ↦ Tr(ζ a) 1_m`.
    pub fn state_collapse(state: &FaithfulState, dim_out: usize) -> Self {
        let map = LinearMap::state_collapse(state, dim_out);
        Self::from_map(&map).expect("state collapse is u.c.p.")
    }

    pub fn dim_in(&self) -> usize {
        self.map.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.map.dim_out
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn as_linear(&self) -> &LinearMap {
        &self.map
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn apply(&self, a: &CMatrix) -> Result<CMatrix> {
        self.map.apply(a)
    }

    /// `f ∘ g`.
    pub fn compose(f: &UcpMap, g: &UcpMap) -> Result<UcpMap> {
        let map = f.map.compose(&g.map)?;
        if f.verified && g.verified {
            Self::from_map(&map)
        } else {
            Ok(Self::raw(map))
        }
    }

    pub fn distance(&self, other: &UcpMap) -> f64 {
        self.map.distance(&other.map)
    }

    /// `‖E^‡(ζ) − ζ‖_max`, zero when `μ ∘ E = μ`.
    pub fn preservation_residual(&self, state: &FaithfulState) -> f64 {
        self.map.intertwining_residual(state, state)
    }

    /// Whether the map is a `*`-automorphism (multiplicative on matrix units).
    pub fn is_automorphism(&self, tol: f64) -> bool {
        let n = self.dim_in();
        if n != self.dim_out() {
            return false;
        }
        let images: Vec<CMatrix> = (0..n * n)
            .map(|idx| {
                self.apply(&linalg::matrix_unit(n, idx / n, idx % n))
                    .expect("matrix unit has input dimension")
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let lhs = &images[i * n + j] * &images[k * n + l];
                        let rhs = if j == k {
                            images[i * n + l].clone()
                        } else {
                            CMatrix::zeros(n, n)
                        };
                        if linalg::max_abs_diff(&lhs, &rhs) > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// A u.c.p. map `E: M_n → M_m` with states `μ` on the input and `ν` on the
/// output algebra satisfying `ν ∘ E = μ`.
#[derive(Debug, Clone)]
pub struct IntertwinedPair {
    pub map: UcpMap,
    pub source: FaithfulState,
    pub target: FaithfulState,
}

impl IntertwinedPair {
    pub fn new(map: UcpMap, source: FaithfulState, target: FaithfulState) -> Result<Self> {
        if map.dim_in() != source.dim() {
            return Err(Error::DimensionMismatch {
                context: "IntertwinedPair source",
                expected: map.dim_in(),
                found: source.dim(),
            });
        }
        if map.dim_out() != target.dim() {
            return Err(Error::DimensionMismatch {
                context: "IntertwinedPair target",
                expected: map.dim_out(),
                found: target.dim(),
            });
        }
        let residual = map.as_linear().intertwining_residual(&source, &target);
        if residual > MAP_TOL {
            return Err(Error::IntertwiningViolated { residual });
        }
        Ok(Self {
            map,
            source,
            target,
        })
    }

    /// The linear part of the KMS-dual,
    /// `b ↦ ζ^{−1/2} E^‡(η^{1/2} b η^{1/2}) ζ^{−1/2}`.
    pub fn kms_dual_map(&self) -> LinearMap {
        let outer = LinearMap::conjugation(self.source.inv_sqrt_density());
        let inner = LinearMap::conjugation(self.target.sqrt_density());
        let adj = self.map.as_linear().hs_adjoint();
        outer
            .compose(&adj)
            .and_then(|m| m.compose(&inner))
            .expect("dimensions agree by construction")
    }

    /// KMS-dual `E^σ: M_m → M_n`, intertwining `μ ∘ E^σ = ν`. The returned
    /// pair has source and target swapped.
    pub fn kms_dual(&self) -> Result<IntertwinedPair> {
        let dual = UcpMap::from_map(&self.kms_dual_map())?;
        IntertwinedPair::new(dual, self.target.clone(), self.source.clone())
    }

    /// Residual of the defining dual relation for a candidate `E^σ`,
    /// evaluated in the standard form:
    /// `max |⟨Λ_μ,(a ⊗ E^σ(b)ᵀ)Λ_μ⟩ − ⟨Λ_ν,(E(a) ⊗ bᵀ)Λ_ν⟩|` over matrix
    /// units `a`, `b`.
    pub fn dual_relation_residual(&self, candidate: &LinearMap) -> f64 {
        let (n, m) = (self.map.dim_in(), self.map.dim_out());
        if candidate.dim_in() != m || candidate.dim_out() != n {
            return f64::INFINITY;
        }
        let lam_mu = self.source.standard_vector();
        let lam_nu = self.target.standard_vector();
        let mut worst: f64 = 0.0;
        for ai in 0..n * n {
            let a = linalg::matrix_unit(n, ai / n, ai % n);
            let ea = self.map.apply(&a).expect("input dimension");
            for bi in 0..m * m {
                let b = linalg::matrix_unit(m, bi / m, bi % m);
                let dual_b = candidate.apply(&b).expect("input dimension");
                let lhs = lam_mu.dotc(&(linalg::kron(&a, &dual_b.transpose()) * &lam_mu));
                let rhs = lam_nu.dotc(&(linalg::kron(&ea, &b.transpose()) * &lam_nu));
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst
    }

    /// Builds `E^σ` and returns its dual-relation residual.
    pub fn verify_dual_relation(&self) -> f64 {
        self.dual_relation_residual(&self.kms_dual_map())
    }
}

/// `P_S^{μ_R} = μ_R ⊗ id_S : M_{n_R n_S} → M_{n_S}`.
pub fn slice_to_second(state_r: &FaithfulState, n_s: usize) -> UcpMap {
    let n_r = state_r.dim();
    let weight = linalg::kron(state_r.density(), &linalg::identity(n_s));
    let map = LinearMap::from_fn(n_r * n_s, n_s, |x| {
        linalg::partial_trace(&(&weight * x), linalg::Factor::First, (n_r, n_s))
            .expect("dimensions agree by construction")
    });
    UcpMap::from_map(&map).expect("slice map is u.c.p.")
}

/// `ι_{S,M}: s ↦ 1_R ⊗ s`.
pub fn embed_second(n_r: usize, n_s: usize) -> UcpMap {
    let id_r = linalg::identity(n_r);
    let map = LinearMap::from_fn(n_s, n_r * n_s, |s| linalg::kron(&id_r, s));
    UcpMap::from_map(&map).expect("embedding is u.c.p.")
}

/// `P_{1⊗S}^{μ_R} = ι ∘ P_S^{μ_R}`, so `P(r ⊗ s) = μ_R(r) 1_R ⊗ s`.
pub fn cond_expectation_onto_second(state_r: &FaithfulState, n_s: usize) -> UcpMap {
    let slice = slice_to_second(state_r, n_s);
    let embed = embed_second(state_r.dim(), n_s);
    UcpMap::compose(&embed, &slice).expect("dimensions agree by construction")
}

/// Reduced dynamics `α^r = P_S^{μ_R} ∘ α ∘ ι_{S,M}` on the second factor.
pub fn reduce_channel(alpha: &UcpMap, state_r: &FaithfulState) -> Result<UcpMap> {
    let n_r = state_r.dim();
    let n = alpha.dim_in();
    if alpha.dim_out() != n || !n.is_multiple_of(n_r) {
        return Err(Error::DimensionMismatch {
            context: "reduce_channel",
            expected: n_r,
            found: n,
        });
    }
    let n_s = n / n_r;
    let slice = slice_to_second(state_r, n_s);
    let embed = embed_second(n_r, n_s);
    UcpMap::compose(&slice, &UcpMap::compose(alpha, &embed)?)
}

#[cfg(test)]
pub(crate) mod testing {
    pub use crate::suites::{random_pair, random_ucp};
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::linalg::testing::random_matrix;
    use crate::linalg::{c, from_real_rows, kron, matrix_unit, max_abs_diff, real_diag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn u_theta(theta: f64) -> CMatrix {
        let mut u = linalg::identity(2);
        u[(1, 1)] = c(0.0, theta).exp();
        u
    }

    #[test]
    fn choi_round_trip_and_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_ucp(&mut rng, 2, 3, 2);
        let back = LinearMap::from_choi(2, 3, e.choi()).unwrap();
        assert!(back.distance(e.as_linear()) < 1e-14);
        let mut manual = CMatrix::zeros(6, 6);
        for i in 0..2 {
            for j in 0..2 {
                manual += kron(&matrix_unit(2, i, j), &e.apply(&matrix_unit(2, i, j)).unwrap());
            }
        }
        assert!(max_abs_diff(&manual, e.choi()) < 1e-14);
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 2, 2);
        assert!(max_abs_diff(&UcpMap::identity(2).apply(&a).unwrap(), &a) < 1e-15);

        let u = u_theta(0.7);
        let alpha = UcpMap::unitary(&u).unwrap();
        let expect = &u * &a * u.adjoint();
        assert!(max_abs_diff(&alpha.apply(&a).unwrap(), &expect) < 1e-14);

        let mu = FaithfulState::diagonal(&[0.3, 0.7]).unwrap();
        let collapse = UcpMap::state_collapse(&mu, 2);
        let expect = linalg::identity(2) * mu.expectation(&a).unwrap();
        assert!(max_abs_diff(&collapse.apply(&a).unwrap(), &expect) < 1e-14);
        assert!(alpha.apply(&linalg::identity(3)).is_err());
    }

    #[test]
    fn ucp_validation() {
        // transpose is positive and unital but not completely positive
        let transpose = LinearMap::from_fn(2, 2, |a| a.transpose());
        assert!(matches!(
            UcpMap::from_map(&transpose),
            Err(Error::NotCompletelyPositive { .. })
        ));
        let halve = LinearMap::identity(2).scale(cr(0.5));
        assert!(matches!(UcpMap::from_map(&halve), Err(Error::NotUnital { .. })));
        let raw = UcpMap::raw(halve);
        assert!(!raw.is_verified());
    }

    #[test]
    fn compose_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_ucp(&mut rng, 2, 2, 3);
        let id = UcpMap::identity(2);
        assert!(UcpMap::compose(&id, &g).unwrap().distance(&g) < 1e-14);

        let (phi, theta) = (0.4, 1.1);
        let up = UcpMap::unitary(&u_theta(phi)).unwrap();
        let ut = UcpMap::unitary(&u_theta(theta)).unwrap();
        let prod = UcpMap::unitary(&(u_theta(phi) * u_theta(theta))).unwrap();
        assert!(UcpMap::compose(&up, &ut).unwrap().distance(&prod) < 1e-14);

        let f = random_ucp(&mut rng, 3, 2, 2);
        let g = random_ucp(&mut rng, 2, 3, 2);
        let fg = UcpMap::compose(&f, &g).unwrap();
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 2, 2);
            let lhs = fg.apply(&a).unwrap();
            let rhs = f.apply(&g.apply(&a).unwrap()).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
        }
        assert!(UcpMap::compose(&f, &f).is_err());
    }

    #[test]
    fn hs_adjoint_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = u_theta(0.9) * from_real_rows(2, 2, &[0.6, 0.8, -0.8, 0.6]);
        let ad = LinearMap::conjugation(&u);
        let expect = LinearMap::conjugation(&u.adjoint());
        assert!(ad.hs_adjoint().distance(&expect) < 1e-14);

        let mu = FaithfulState::diagonal(&[0.2, 0.8]).unwrap();
        let collapse = LinearMap::state_collapse(&mu, 2);
        let adj = collapse.hs_adjoint();
        for i in 0..2 {
            for j in 0..2 {
                let x = matrix_unit(2, i, j);
                let expect = mu.density() * linalg::trace(&x);
                assert!(max_abs_diff(&adj.apply(&x).unwrap(), &expect) < 1e-14);
            }
        }
        // pairing identity on random inputs
        let e = random_ucp(&mut rng, 2, 3, 2);
        let a = random_matrix(&mut rng, 2, 2);
        let x = random_matrix(&mut rng, 3, 3);
        let lhs = linalg::trace(&(e.apply(&a).unwrap().adjoint() * &x));
        let rhs = linalg::trace(&(a.adjoint() * e.as_linear().hs_adjoint().apply(&x).unwrap()));
        assert!((lhs - rhs).norm() < 1e-12);
        let twice = e.as_linear().hs_adjoint().hs_adjoint();
        assert!(twice.distance(e.as_linear()) < 1e-12);
    }

    #[test]
    fn kms_dual_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = crate::suites::random_state(&mut rng, 3);
        let id = IntertwinedPair::new(UcpMap::identity(3), mu.clone(), mu.clone()).unwrap();
        assert!(id.kms_dual().unwrap().map.distance(&UcpMap::identity(3)) < 1e-10);

        let t = 0.63;
        let flow = UcpMap::from_map(&mu.modular_flow(t)).unwrap();
        let pair = IntertwinedPair::new(flow, mu.clone(), mu.clone()).unwrap();
        let back = UcpMap::from_map(&mu.modular_flow(-t)).unwrap();
        assert!(pair.kms_dual().unwrap().map.distance(&back) < 1e-10);

        let zeta = FaithfulState::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let mut u = linalg::identity(3);
        u[(0, 0)] = c(0.0, 0.3).exp();
        u[(2, 2)] = c(0.0, -1.2).exp();
        let tau = UcpMap::unitary(&u).unwrap();
        let pair = IntertwinedPair::new(tau, zeta.clone(), zeta.clone()).unwrap();
        let inverse = UcpMap::unitary(&u.adjoint()).unwrap();
        assert!(pair.kms_dual().unwrap().map.distance(&inverse) < 1e-10);
    }

    #[test]
    fn kms_dual_properties_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (n, m) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let pair = random_pair(&mut rng, n, m);
            let dual = pair.kms_dual().unwrap();
            assert!(dual.map.is_verified());
            assert!(dual.map.as_linear().intertwining_residual(&dual.source, &dual.target) < 1e-9);
            let back = dual.kms_dual().unwrap();
            assert!(back.map.distance(&pair.map) < 1e-10);
            assert!(pair.verify_dual_relation() < 1e-9);
            // Kadison: ν(E(a)*E(a)) ≤ ν(E(a*a))
            let a = random_matrix(&mut rng, n, n);
            let ea = pair.map.apply(&a).unwrap();
            let lhs = pair.target.expectation(&(ea.adjoint() * &ea)).unwrap().re;
            let rhs = pair.target.expectation(&pair.map.apply(&(a.adjoint() * &a)).unwrap()).unwrap().re;
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn dual_relation_examples() {
        let mu = FaithfulState::diagonal(&[0.35, 0.65]).unwrap();
        let id = IntertwinedPair::new(UcpMap::identity(2), mu.clone(), mu.clone()).unwrap();
        assert!(id.verify_dual_relation() < 1e-10);
        let alpha = UcpMap::unitary(&u_theta(1.3)).unwrap();
        let pair = IntertwinedPair::new(alpha, mu.clone(), mu.clone()).unwrap();
        assert!(pair.verify_dual_relation() < 1e-10);
        // corrupt the dual by using the map itself instead of its inverse
        let corrupted = pair.map.as_linear().clone();
        assert!(pair.dual_relation_residual(&corrupted) > 1e-3);
    }

    #[test]
    fn conditional_expectation_examples() {
        let mu_r = FaithfulState::diagonal(&[0.3, 0.7]).unwrap();
        let p = cond_expectation_onto_second(&mu_r, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_matrix(&mut rng, 2, 2);
        let r = real_diag(&[1.0, 0.0]);
        let img = p.apply(&kron(&r, &s)).unwrap();
        let expect = kron(&linalg::identity(2), &s) * cr(0.3);
        assert!(max_abs_diff(&img, &expect) < 1e-14);
        let pp = UcpMap::compose(&p, &p).unwrap();
        assert!(pp.distance(&p) < 1e-10);

        let mu_s = FaithfulState::diagonal(&[0.6, 0.4]).unwrap();
        let mu = mu_r.product(&mu_s).unwrap();
        let pair = IntertwinedPair::new(p.clone(), mu.clone(), mu.clone()).unwrap();
        assert!(pair.kms_dual().unwrap().map.distance(&p) < 1e-10);
    }

    #[test]
    fn slice_and_embed() {
        let mu_r = crate::suites::random_state(&mut ChaCha8Rng::seed_from_u64(8), 2);
        let mu_s = FaithfulState::diagonal(&[0.45, 0.55]).unwrap();
        let mu = mu_r.product(&mu_s).unwrap();
        let slice = slice_to_second(&mu_r, 2);
        let embed = embed_second(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_matrix(&mut rng, 2, 2);
        let one_s = kron(&linalg::identity(2), &s);
        assert!(max_abs_diff(&slice.apply(&one_s).unwrap(), &s) < 1e-14);
        let id4 = embed.apply(&linalg::identity(2)).unwrap();
        assert!(max_abs_diff(&id4, &linalg::identity(4)) < 1e-15);
        assert!(UcpMap::compose(&slice, &embed).unwrap().distance(&UcpMap::identity(2)) < 1e-12);
        let p = cond_expectation_onto_second(&mu_r, 2);
        assert!(UcpMap::compose(&embed, &slice).unwrap().distance(&p) < 1e-12);

        let iota = IntertwinedPair::new(embed.clone(), mu_s.clone(), mu.clone()).unwrap();
        assert!(iota.kms_dual().unwrap().map.distance(&slice) < 1e-10);
        let ps = IntertwinedPair::new(slice.clone(), mu.clone(), mu_s.clone()).unwrap();
        assert!(ps.kms_dual().unwrap().map.distance(&embed) < 1e-10);
    }

    #[test]
    fn reduce_channel_examples() {
        let mu_r = FaithfulState::diagonal(&[0.3, 0.7]).unwrap();
        let id = UcpMap::identity(4);
        assert!(reduce_channel(&id, &mu_r).unwrap().distance(&UcpMap::identity(2)) < 1e-12);

        // no interaction: h = Θ⊗1 + 1⊗Φ reduces to Ad(e^{iΦt})
        let theta = real_diag(&[1.0, -1.0]);
        let phi = real_diag(&[1.0, 2.0]);
        let h = kron(&theta, &linalg::identity(2)) + kron(&linalg::identity(2), &phi);
        let t = 0.77;
        let u = linalg::mat_func(&h, |x| c(0.0, x * t).exp()).unwrap();
        let alpha = UcpMap::unitary(&u).unwrap();
        let reduced = reduce_channel(&alpha, &mu_r).unwrap();
        let us = linalg::mat_func(&phi, |x| c(0.0, x * t).exp()).unwrap();
        assert!(reduced.distance(&UcpMap::unitary(&us).unwrap()) < 1e-12);
        assert!(reduce_channel(&UcpMap::identity(3), &mu_r).is_err());
    }
}

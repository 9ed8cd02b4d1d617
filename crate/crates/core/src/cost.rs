//! The quadratic transport cost
//! `I_k(ω) = Σ_l μ(k_l*k_l) + ν(k_l*k_l) − ν(E(k_l)*k_l) − ν(k_l*E(k_l))`
//! of a plan with channel `E`, its affine form over Choi coordinates, and the
//! product-coupling shortcut from moments.

use crate::coupling::TransportPlan;
use crate::linalg::{self, CMatrix, C64};
use crate::qstate::{trace_product, FaithfulState};
use crate::{Error, Result};
use nalgebra::DVector;

const STAR_TOL: f64 = 1e-12;
const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CostSpec {
    k: Vec<CMatrix>,
    star_closed: bool,
    generating: bool,
}

impl CostSpec {
    pub fn new(k: Vec<CMatrix>) -> Result<Self> {
        let n = k.first().map(|m| m.nrows()).ok_or_else(|| Error::InvalidInput("empty cost family".into()))?;
        for m in &k {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    context: "cost family",
                    expected: n,
                    found: m.nrows(),
                });
            }
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite);
            }
        }
        let star_closed = k.iter().all(|a| {
            let a_star = a.adjoint();
            k.iter().any(|b| linalg::max_abs_diff(&a_star, b) <= STAR_TOL)
        });
        let generating = generates_full_algebra(&k, n);
        Ok(Self {
            k,
            star_closed,
            generating,
        })
    }

    pub fn k(&self) -> &[CMatrix] {
        &self.k
    }

    pub fn dim(&self) -> usize {
        self.k[0].nrows()
    }

    pub fn star_closed(&self) -> bool {
        self.star_closed
    }

    pub fn generating(&self) -> bool {
        self.generating
    }

    /// `k_l ↦ 1 ⊗ k_l` on `M_{n_R} ⊗ M_n`.
    pub fn lift_to_second(&self, n_r: usize) -> CostSpec {
        let id = linalg::identity(n_r);
        CostSpec::new(self.k.iter().map(|w| linalg::kron(&id, w)).collect()).expect("lifted family is well formed")
    }

    pub fn scaled(&self, s: f64) -> CostSpec {
        CostSpec::new(self.k.iter().map(|m| m * C64::new(s, 0.0)).collect()).expect("scaled family is well formed")
    }
}

fn check_dims(spec: &CostSpec, source: &FaithfulState, target: &FaithfulState) -> Result<()> {
    for s in [source, target] {
        if s.dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                context: "transport cost",
                expected: spec.dim(),
                found: s.dim(),
            });
        }
    }
    Ok(())
}

/// The cost of a plan, evaluated through its channel.
pub fn transport_cost(plan: &TransportPlan, spec: &CostSpec) -> Result<f64> {
    let (mu, nu) = (plan.source(), plan.target());
    check_dims(spec, mu, nu)?;
    let mut total = 0.0;
    for k in spec.k() {
        let ek = plan.channel().apply(k)?;
        let kk = k.adjoint() * k;
        let value = mu.expectation(&kk)? + nu.expectation(&kk)?
            - nu.expectation(&(ek.adjoint() * k))?
            - nu.expectation(&(k.adjoint() * &ek))?;
        total += value.re;
    }
    Ok(total)
}

/// `(constant, linear)` with `I_k = constant + ⟨linear, x⟩` for the Choi
/// coordinates `x = [Re C, Im C]` of the plan's channel.
pub fn cost_coefficients(spec: &CostSpec, source: &FaithfulState, target: &FaithfulState) -> Result<(f64, DVector<f64>)> {
    check_dims(spec, source, target)?;
    let (n, m) = (source.dim(), target.dim());
    let size = n * m;
    let nn = size * size;
    let mut constant = 0.0;
    let mut linear = DVector::zeros(2 * nn);
    for k in spec.k() {
        let kk = k.adjoint() * k;
        constant += trace_product(source.density(), &kk).re + trace_product(target.density(), &kk).re;
        // Tr(η k* E(k)) = Σ k_ij (η k*)_ba C[(i,a),(j,b)]
        let hk = target.density() * k.adjoint();
        for i in 0..n {
            for j in 0..n {
                let kij = k[(i, j)];
                if kij == C64::new(0.0, 0.0) {
                    continue;
                }
                for a in 0..m {
                    for b in 0..m {
                        let w = kij * hk[(b, a)];
                        let idx = (i * m + a) * size + (j * m + b);
                        linear[idx] -= 2.0 * w.re;
                        linear[nn + idx] += 2.0 * w.im;
                    }
                }
            }
        }
    }
    Ok((constant, linear))
}

/// One moment row `(μ(k*k), ν(k*k), μ(k), ν(k))`.
pub type MomentRow = (f64, f64, C64, C64);

/// Cost of the product coupling from first and second moments:
/// `Σ μ(k*k) + ν(k*k) − 2 Re(ν(k) conj(μ(k)))`.
pub fn product_cost_from_moments(rows: &[MomentRow]) -> Result<f64> {
    let mut total = 0.0;
    for (row, &(mu_kk, nu_kk, mu_k, nu_k)) in rows.iter().enumerate() {
        let finite = mu_kk.is_finite() && nu_kk.is_finite() && mu_k.is_finite() && nu_k.is_finite();
        if !finite {
            return Err(Error::MomentInconsistency {
                row,
                reason: "non-finite entry".into(),
            });
        }
        if mu_kk < mu_k.norm_sqr() - 1e-12 {
            return Err(Error::MomentInconsistency {
                row,
                reason: format!("first second moment {mu_kk} is below |first mean|^2 = {}", mu_k.norm_sqr()),
            });
        }
        if nu_kk < nu_k.norm_sqr() - 1e-12 {
            return Err(Error::MomentInconsistency {
                row,
                reason: format!("second second moment {nu_kk} is below |second mean|^2 = {}", nu_k.norm_sqr()),
            });
        }
        total += mu_kk + nu_kk - 2.0 * (nu_k * mu_k.conj()).re;
    }
    Ok(total)
}

/// Moment rows of a cost family under two states.
pub fn moments(spec: &CostSpec, source: &FaithfulState, target: &FaithfulState) -> Result<Vec<MomentRow>> {
    check_dims(spec, source, target)?;
    spec.k()
        .iter()
        .map(|k| {
            let kk = k.adjoint() * k;
            Ok((
                source.expectation(&kk)?.re,
                target.expectation(&kk)?.re,
                source.expectation(k)?,
                target.expectation(k)?,
            ))
        })
        .collect()
}

/// Whether the family generates `M_dim` as an algebra: the span of words in
/// `{1, k_l, k_l*}` reaches dimension `dim²`.
pub fn generating_check(spec: &CostSpec, dim: usize) -> bool {
    spec.dim() == dim && generates_full_algebra(spec.k(), dim)
}

fn generates_full_algebra(k: &[CMatrix], dim: usize) -> bool {
    let target = dim * dim;
    let mut letters: Vec<CMatrix> = Vec::new();
    for m in k {
        letters.push(m.clone());
        letters.push(m.adjoint());
    }
    let mut basis: Vec<CMatrix> = Vec::new();
    let mut frontier = Vec::new();
    if let Some(v) = orthogonalize(&linalg::identity(dim), &basis) {
        basis.push(v.clone());
        frontier.push(linalg::identity(dim));
    }
    // words of length ≤ dim² suffice: the span grows at every round or stops
    for _ in 0..target {
        let mut next = Vec::new();
        for w in &frontier {
            for l in &letters {
                let word = w * l;
                if let Some(v) = orthogonalize(&word, &basis) {
                    basis.push(v);
                    next.push(word);
                }
            }
        }
        if basis.len() == target || next.is_empty() {
            break;
        }
        frontier = next;
    }
    basis.len() == target
}

/// Component of `a` orthogonal to `basis` (Hilbert–Schmidt), normalized, if
/// it is not negligible.
fn orthogonalize(a: &CMatrix, basis: &[CMatrix]) -> Option<CMatrix> {
    let scale = linalg::frobenius(a);
    if scale == 0.0 {
        return None;
    }
    let mut v = a / C64::new(scale, 0.0);
    for _ in 0..2 {
        for q in basis {
            let d = trace_product(&q.adjoint(), &v);
            v -= q * d;
        }
    }
    let rest = linalg::frobenius(&v);
    (rest > SPAN_TOL).then(|| v / C64::new(rest, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::choi_to_coords;
    use crate::channel::testing::random_pair;
    use crate::linalg::{from_real_rows, matrix_unit, real_diag};
    use crate::suites::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_spec() -> CostSpec {
        CostSpec::new(vec![real_diag(&[0.0, 1.0]), from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap()
    }

    #[test]
    fn flags() {
        let s = example_spec();
        assert!(s.star_closed() && s.generating());
        let e11 = CostSpec::new(vec![matrix_unit(2, 0, 0)]).unwrap();
        assert!(!generating_check(&e11, 2));
        let units = CostSpec::new((0..4).map(|i| matrix_unit(2, i / 2, i % 2)).collect()).unwrap();
        assert!(units.generating() && units.star_closed());
        let raising = CostSpec::new(vec![matrix_unit(2, 0, 1)]).unwrap();
        assert!(!raising.star_closed() && raising.generating());
        assert!(!generating_check(&s, 3));
    }

    #[test]
    fn identity_plan_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mu = random_state(&mut rng, 3);
        let spec = CostSpec::new(vec![crate::linalg::testing::random_matrix(&mut rng, 3, 3)]).unwrap();
        let cost = transport_cost(&TransportPlan::identity(&mu), &spec).unwrap();
        assert!(cost.abs() < 1e-13);
    }

    #[test]
    fn product_plan_example() {
        let (p, q) = (0.25, 0.4);
        let mu = FaithfulState::qubit(p).unwrap();
        let nu = FaithfulState::qubit(q).unwrap();
        let plan = TransportPlan::product(&mu, &nu);
        let cost = transport_cost(&plan, &example_spec()).unwrap();
        // cross terms: μ(k)ν(k*) = (1−p)(1−q) for the diagonal generator, 0 otherwise
        assert!((cost - (4.0 - p - q - 2.0 * (1.0 - p) * (1.0 - q))).abs() < 1e-14);
        let (constant, _) = cost_coefficients(&example_spec(), &mu, &nu).unwrap();
        assert!((constant - (4.0 - p - q)).abs() < 1e-14);
    }

    #[test]
    fn coefficients_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (n, trials) in [(2, 50), (3, 10), (4, 5)] {
            for _ in 0..trials {
                let pair = random_pair(&mut rng, n, n);
                let spec = CostSpec::new(vec![
                    crate::linalg::testing::random_matrix(&mut rng, n, n),
                    crate::linalg::testing::random_hermitian(&mut rng, n),
                ])
                .unwrap();
                let plan = TransportPlan::from_channel(pair.clone()).unwrap();
                let direct = transport_cost(&plan, &spec).unwrap();
                assert!(direct >= -1e-9);
                let (constant, linear) = cost_coefficients(&spec, &pair.source, &pair.target).unwrap();
                let affine = constant + linear.dot(&choi_to_coords(plan.channel().choi()));
                assert!((direct - affine).abs() < 1e-10, "{direct} vs {affine}");
            }
        }
        for _ in 0..50 {
            let pair = random_pair(&mut rng, 2, 2);
            let plan = TransportPlan::from_channel(pair.clone()).unwrap();
            let (constant, linear) = cost_coefficients(&example_spec(), &pair.source, &pair.target).unwrap();
            let affine = constant + linear.dot(&choi_to_coords(plan.channel().choi()));
            assert!((transport_cost(&plan, &example_spec()).unwrap() - affine).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_family_has_no_linear_part() {
        let mu = FaithfulState::qubit(0.3).unwrap();
        let nu = FaithfulState::qubit(0.6).unwrap();
        let spec = CostSpec::new(vec![crate::linalg::identity(2)]).unwrap();
        let (constant, linear) = cost_coefficients(&spec, &mu, &nu).unwrap();
        let plan = TransportPlan::product(&mu, &nu);
        let total = constant + linear.dot(&choi_to_coords(plan.channel().choi()));
        assert!(total.abs() < 1e-14);
        assert!((constant - 2.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_is_quadratic() {
        let mu = FaithfulState::qubit(0.3).unwrap();
        let nu = FaithfulState::qubit(0.6).unwrap();
        let (c1, l1) = cost_coefficients(&example_spec(), &mu, &nu).unwrap();
        let (c2, l2) = cost_coefficients(&example_spec().scaled(2.0), &mu, &nu).unwrap();
        assert!((c2 - 4.0 * c1).abs() < 1e-13);
        assert!((l2 - l1 * 4.0).amax() < 1e-13);
    }

    #[test]
    fn moments_examples() {
        let torus = vec![(1.0, 1.0, C64::new(0.0, 0.0), C64::new(0.0, 0.0)); 4];
        assert_eq!(product_cost_from_moments(&torus).unwrap(), 8.0);
        let one = vec![(1.0, 1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0))];
        assert_eq!(product_cost_from_moments(&one).unwrap(), 0.0);
        let bad = vec![(0.1, 1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0))];
        assert!(matches!(
            product_cost_from_moments(&bad),
            Err(Error::MomentInconsistency { row: 0, .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mu = random_state(&mut rng, 2);
        let nu = random_state(&mut rng, 2);
        let spec = CostSpec::new(vec![
            crate::linalg::testing::random_matrix(&mut rng, 2, 2),
            crate::linalg::testing::random_matrix(&mut rng, 2, 2),
        ])
        .unwrap();
        let rows = moments(&spec, &mu, &nu).unwrap();
        let via_moments = product_cost_from_moments(&rows).unwrap();
        let direct = transport_cost(&TransportPlan::product(&mu, &nu), &spec).unwrap();
        assert!((via_moments - direct).abs() < 1e-12);
    }
}

//! Minimization of the affine transport cost over
//! `{Choi PSD} ∩ {affine constraints}`.
//!
//! [`solve`] runs a scaled-form ADMM: the affine step is an orthogonal
//! projection through a precomputed nullspace basis, the conic step is a
//! Hermitian eigenvalue clip. [`oracle_2x2`] is an independent brute-force
//! evaluator for qubit instances whose couplings are diagonal up to the corner
//! entry.

use crate::balance::{self, coords_to_choi, ConstraintSet, Variant};
use crate::channel::{IntertwinedPair, UcpMap};
use crate::cost::{self, CostSpec};
use crate::coupling::TransportPlan;
use crate::linalg::{self, CMatrix, C64};
use crate::qstate::FaithfulState;
use crate::systems::GenSystem;
use crate::{Error, Result};
use nalgebra::DVector;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub source: FaithfulState,
    pub target: FaithfulState,
    pub spec: CostSpec,
    pub cost_constant: f64,
    pub cost_linear: DVector<f64>,
    pub constraints: ConstraintSet,
}

impl SdpProblem {
    /// Problem for `W(A,B)` (plain) or `W_σ(A,B)` (modular).
    pub fn new(a: &GenSystem, b: &GenSystem, spec: &CostSpec, variant: Variant) -> Result<Self> {
        let constraints = ConstraintSet::assemble(a, b, variant)?;
        Self::from_constraints(constraints, spec, &a.state, &b.state)
    }

    pub fn from_constraints(
        constraints: ConstraintSet,
        spec: &CostSpec,
        source: &FaithfulState,
        target: &FaithfulState,
    ) -> Result<Self> {
        if constraints.dims() != (source.dim(), target.dim()) {
            return Err(Error::DimensionMismatch {
                context: "SdpProblem",
                expected: constraints.dims().0,
                found: source.dim(),
            });
        }
        let (cost_constant, cost_linear) = cost::cost_coefficients(spec, source, target)?;
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            spec: spec.clone(),
            cost_constant,
            cost_linear,
            constraints,
        })
    }

    /// Size `n·m` of the Choi variable.
    pub fn dim(&self) -> usize {
        self.constraints.choi_size()
    }

    pub fn cost_at(&self, x: &DVector<f64>) -> f64 {
        self.cost_constant + self.cost_linear.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub adapt_ratio: f64,
    pub adapt_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
            rho: 1.0,
            adapt_ratio: 10.0,
            adapt_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Optimal value of the cost `I_k`.
    pub optimal_cost: f64,
    /// `√max(optimal_cost, 0)`.
    pub distance: f64,
    pub plan: TransportPlan,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖A x − b‖_∞` at the returned point.
    pub constraint_residual: f64,
    /// Smallest Choi eigenvalue at the returned point.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn psd_clip(x: &DVector<f64>, size: usize) -> (DVector<f64>, f64) {
    let (clipped, min) = linalg::psd_project_unchecked(linalg::symmetrize(&coords_to_choi(x, size)));
    (balance::choi_to_coords(&clipped), min)
}

fn min_choi_eigenvalue(x: &DVector<f64>, size: usize) -> f64 {
    linalg::min_eigenvalue(&linalg::symmetrize(&coords_to_choi(x, size))).expect("symmetrized input")
}

/// Solves the problem by ADMM. Non-convergence within the iteration cap is
/// reported through `converged`, not as an error; the returned point is
/// always a valid plan (mixed with the product coupling if needed).
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SolveReport> {
    let size = problem.dim();
    let x0 = problem.constraints.feasible_point().clone();
    let null = problem.constraints.nullspace();
    let null_t = null.transpose();
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let y = &null_t * (v - &x0);
        &x0 + &null * y
    };

    let c = &problem.cost_linear;
    let mut rho = opts.rho;
    let mut x = x0.clone();
    let mut z = x0.clone();
    let mut u = DVector::zeros(x0.len());
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = null.ncols() == 0;
    if converged {
        primal = 0.0;
        dual = 0.0;
    }
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        x = project(&(&z - &u - c / rho));
        let (z_new, _) = psd_clip(&(&x + &u), size);
        u += &x - &z_new;
        primal = (&x - &z_new).norm();
        dual = rho * (&z_new - &z).norm();
        z = z_new;
        if primal <= opts.tol && dual <= opts.tol {
            converged = true;
            break;
        }
        if iterations % 10 == 0 {
            if primal > opts.adapt_ratio * dual {
                rho *= opts.adapt_factor;
                u /= opts.adapt_factor;
            } else if dual > opts.adapt_ratio * primal {
                rho /= opts.adapt_factor;
                u *= opts.adapt_factor;
            }
        }
    }
    log::debug!("admm finished after {iterations} iterations (primal {primal:.2e}, dual {dual:.2e})");

    // x is affine-feasible; restore positivity by mixing with the product point
    let mut point = project(&x);
    let min = min_choi_eigenvalue(&point, size);
    if min < 0.0 {
        let anchor = min_choi_eigenvalue(&x0, size);
        let s = -min / (anchor - min);
        point = &point * (1.0 - s) + &x0 * s;
    }
    let choi = linalg::symmetrize(&coords_to_choi(&point, size));
    let (n, m) = problem.constraints.dims();
    let map = UcpMap::from_choi(n, m, &choi)?;
    let plan = TransportPlan::from_channel(IntertwinedPair::new(map, problem.source.clone(), problem.target.clone())?)?;
    let optimal_cost = problem.cost_at(&point);
    Ok(SolveReport {
        optimal_cost,
        distance: optimal_cost.max(0.0).sqrt(),
        plan,
        primal_residual: primal,
        dual_residual: dual,
        constraint_residual: problem.constraints.residual(&point),
        min_eigenvalue: min_choi_eigenvalue(&point, size),
        iterations,
        converged,
    })
}

/// `W(A,B)` (plain) or `W_σ(A,B)` (modular): assembles and solves.
pub fn wasserstein(a: &GenSystem, b: &GenSystem, spec: &CostSpec, variant: Variant, opts: &SolverOptions) -> Result<SolveReport> {
    solve(&SdpProblem::new(a, b, spec, variant)?, opts)
}

/// Brute-force optimum for qubit problems with diagonal states whose
/// feasible couplings are diagonal except possibly for the corner entry
/// `κ_{(0,0),(1,1)}`. The cost is evaluated directly from `κ`, independently
/// of the affine coefficients used by [`solve`].
pub fn oracle_2x2(problem: &SdpProblem) -> Result<f64> {
    let (mu, nu) = (&problem.source, &problem.target);
    if mu.dim() != 2 || nu.dim() != 2 {
        return Err(Error::PatternViolated("oracle needs qubit systems".into()));
    }
    if !linalg::is_diagonal(mu.density(), 1e-12) || !linalg::is_diagonal(nu.density(), 1e-12) {
        return Err(Error::PatternViolated("oracle needs diagonal states".into()));
    }
    let pattern = problem.constraints.kappa_pattern(nu);
    for (a, b) in pattern.free_off_diagonal() {
        if (a, b) != (0, 3) {
            return Err(Error::PatternViolated(format!("entry ({a},{b}) of the coupling is not forced to zero")));
        }
    }
    let corner_free = !pattern.forced_zero(0, 3);
    let diag_free = pattern.free[0][0];
    let expected = usize::from(diag_free) + if corner_free { 2 } else { 0 };
    let null_dim = problem.constraints.nullspace().ncols();
    if null_dim != expected {
        return Err(Error::PatternViolated(format!(
            "feasible set has dimension {null_dim}, expected {expected}"
        )));
    }

    let p = mu.density()[(0, 0)].re;
    let q = nu.density()[(0, 0)].re;
    let kappa = |t: f64, corner: C64| -> CMatrix {
        let mut k = linalg::real_diag(&[t, p - t, q - t, 1.0 - p - q + t]);
        k[(0, 3)] = corner;
        k[(3, 0)] = corner.conj();
        k
    };
    let cost_of = |k: &CMatrix| cost_from_density(k, mu, nu, &problem.spec);
    let zero = C64::new(0.0, 0.0);
    let (lo, hi) = if diag_free {
        ((p + q - 1.0).max(0.0), p.min(q))
    } else {
        (p * q, p * q)
    };
    let base = cost_of(&kappa(lo, zero));
    let slope = if corner_free {
        let a = cost_of(&kappa(lo, C64::new(1.0, 0.0))) - base;
        let b = cost_of(&kappa(lo, C64::new(0.0, 1.0))) - base;
        a.hypot(b)
    } else {
        0.0
    };
    let objective = |t: f64| -> f64 {
        let radius = (t.max(0.0) * (1.0 - p - q + t).max(0.0)).sqrt();
        cost_of(&kappa(t, zero)) - slope * radius
    };

    if hi - lo <= 0.0 {
        return Ok(objective(lo));
    }
    let step = 1e-4;
    let steps = ((hi - lo) / step).ceil() as usize;
    let (mut best_t, mut best) = (lo, objective(lo));
    for i in 1..=steps {
        let t = (lo + i as f64 * step).min(hi);
        let v = objective(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    Ok(best.min(objective(0.5 * (a + b))))
}

/// Cost of the coupling density `κ`, through the channel
/// `E(a) = η^{−1/2} Y(a) η^{−1/2}` with `Y(a)_kl = Tr(κ (a ⊗ e_kl))`.
/// `κ` need not be positive.
pub fn cost_from_density(kappa: &CMatrix, source: &FaithfulState, target: &FaithfulState, spec: &CostSpec) -> f64 {
    let m = target.dim();
    let channel = |a: &CMatrix| -> CMatrix {
        let y = CMatrix::from_fn(m, m, |k, l| {
            let probe = linalg::kron(a, &linalg::matrix_unit(m, k, l));
            linalg::trace(&(kappa * probe))
        });
        target.inv_sqrt_density() * y * target.inv_sqrt_density()
    };
    let mut total = 0.0;
    for k in spec.k() {
        let kk = k.adjoint() * k;
        let ek = channel(k);
        let cross = linalg::trace(&(target.density() * k.adjoint() * &ek));
        total += linalg::trace(&(source.density() * &kk)).re + linalg::trace(&(target.density() * &kk)).re
            - 2.0 * cross.re;
    }
    total
}

/// Cartesian product of parameter axes, last axis fastest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// Solves one problem per grid point. Failures are kept per point; the
/// output order follows `points`. `jobs = 0` uses the global thread pool.
pub fn sweep<F>(points: &[Vec<f64>], build: F, opts: &SolverOptions, jobs: usize) -> Vec<Result<SolveReport>>
where
    F: Fn(&[f64]) -> Result<SdpProblem> + Sync,
{
    let run = || {
        points
            .par_iter()
            .map(|point| build(point).and_then(|problem| solve(&problem, opts)))
            .collect::<Vec<_>>()
    };
    if jobs == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Dimension of the affine feasible set.
pub fn feasible_dimension(problem: &SdpProblem) -> usize {
    problem.constraints.nullspace().ncols()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, real_diag};
    use crate::systems::unitary_angle_system;
    use std::f64::consts::PI;

    fn spec() -> CostSpec {
        CostSpec::new(vec![real_diag(&[0.0, 1.0]), from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap()
    }

    fn angle(theta: f64, p: f64) -> GenSystem {
        unitary_angle_system(theta, &FaithfulState::qubit(p).unwrap()).unwrap()
    }

    #[test]
    fn self_distance_vanishes() {
        let a = angle(0.9, 0.3);
        for variant in [Variant::Plain, Variant::Modular] {
            let r = wasserstein(&a, &a, &spec(), variant, &SolverOptions::default()).unwrap();
            assert!(r.converged);
            assert!(r.optimal_cost.abs() < 1e-7, "{}", r.optimal_cost);
        }
    }

    #[test]
    fn asymmetric_pair_matches_oracle() {
        let (p, q) = (0.25, 0.4);
        let theta = PI / 3.0;
        let forward = SdpProblem::new(&angle(theta, p), &angle(theta, q), &spec(), Variant::Plain).unwrap();
        let backward = SdpProblem::new(&angle(theta, q), &angle(theta, p), &spec(), Variant::Plain).unwrap();
        let wab = 2.0 + q - p - 2.0 * (p / q).sqrt();
        let wba = 2.0 + q - p - 2.0 * ((1.0 - q) / (1.0 - p)).sqrt();
        let oab = oracle_2x2(&forward).unwrap();
        let oba = oracle_2x2(&backward).unwrap();
        assert!((oab - wab).abs() < 1e-6, "{oab} vs {wab}");
        assert!((oba - wba).abs() < 1e-6, "{oba} vs {wba}");
        let sab = solve(&forward, &SolverOptions::default()).unwrap();
        let sba = solve(&backward, &SolverOptions::default()).unwrap();
        assert!((sab.optimal_cost - oab).abs() < 1e-6, "{} vs {oab}", sab.optimal_cost);
        assert!((sba.optimal_cost - oba).abs() < 1e-6, "{} vs {oba}", sba.optimal_cost);
        assert!(sab.constraint_residual < 1e-7 && sab.min_eigenvalue > -1e-7);
    }

    #[test]
    fn modular_regime_gives_classical_value() {
        let (p, q) = (0.25, 0.4);
        let theta = PI / 3.0;
        let problem = SdpProblem::new(&angle(theta, p), &angle(theta, q), &spec(), Variant::Modular).unwrap();
        let oracle = oracle_2x2(&problem).unwrap();
        assert!((oracle - (2.0 + q - p)).abs() < 1e-9);
        let r = solve(&problem, &SolverOptions::default()).unwrap();
        assert!((r.optimal_cost - (2.0 + q - p)).abs() < 1e-6);
    }

    #[test]
    fn oracle_rejects_unsupported_patterns() {
        let mu = FaithfulState::qubit(0.3).unwrap();
        let a = GenSystem::new(mu.clone(), crate::systems::DynamicsFamily::new()).unwrap();
        let problem = SdpProblem::new(&a, &a, &spec(), Variant::Plain).unwrap();
        assert!(matches!(oracle_2x2(&problem), Err(Error::PatternViolated(_))));
    }

    #[test]
    fn density_cost_agrees_with_channel_cost() {
        let mu = FaithfulState::qubit(0.3).unwrap();
        let nu = FaithfulState::qubit(0.45).unwrap();
        let plan = TransportPlan::product(&mu, &nu);
        let direct = cost::transport_cost(&plan, &spec()).unwrap();
        let via_density = cost_from_density(plan.to_density(), &mu, &nu, &spec());
        assert!((direct - via_density).abs() < 1e-13);
    }

    #[test]
    fn cartesian_order() {
        let grid = cartesian(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
        assert_eq!(grid.len(), 6);
        assert_eq!(grid[1], vec![0.0, 6.0]);
        assert_eq!(grid[3], vec![1.0, 5.0]);
        assert_eq!(cartesian(&[vec![], vec![1.0]]).len(), 0);
    }
}

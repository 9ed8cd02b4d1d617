//! Generalized systems: a faithful state with labeled families of
//! state-preserving u.c.p. maps. Also composite systems on `M_R ⊗ M_S`, their
//! augmentation by the conditional expectation onto the second factor, and
//! their reduction to the second factor.

use crate::channel::{self, IntertwinedPair, UcpMap, MAP_TOL};
use crate::linalg::{self, c, CMatrix, C64};
use crate::qstate::FaithfulState;
use crate::{Error, Result};

/// Label of the conditional expectation adjoined by [`augment`].
pub const CONDITIONAL_EXPECTATION_LABEL: &str = "conditional_expectation";
/// Label of the evolution family of composite systems.
pub const EVOLUTION_LABEL: &str = "evolution";

/// Incommensurate default sample times for reduced (non-group) families.
pub fn default_time_grid() -> Vec<f64> {
    vec![1.0, std::f64::consts::SQRT_2, std::f64::consts::FRAC_PI_2]
}

/// A label together with sampled maps, each tagged by its index value.
#[derive(Debug, Clone)]
pub struct SampledDynamics {
    pub label: String,
    pub samples: Vec<(f64, UcpMap)>,
}

/// The group `t ↦ Ad(e^{iht})`, imposed through its generator.
#[derive(Debug, Clone)]
pub struct GeneratorDynamics {
    pub label: String,
    pub hamiltonian: CMatrix,
}

#[derive(Debug, Clone, Default)]
pub struct DynamicsFamily {
    sampled: Vec<SampledDynamics>,
    generators: Vec<GeneratorDynamics>,
}

impl DynamicsFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_samples(mut self, label: &str, samples: Vec<(f64, UcpMap)>) -> Self {
        self.sampled.push(SampledDynamics {
            label: label.to_string(),
            samples,
        });
        self
    }

    pub fn with_map(self, label: &str, map: UcpMap) -> Self {
        self.with_samples(label, vec![(1.0, map)])
    }

    pub fn with_generator(mut self, label: &str, hamiltonian: CMatrix) -> Self {
        self.generators.push(GeneratorDynamics {
            label: label.to_string(),
            hamiltonian,
        });
        self
    }

    pub fn sampled(&self) -> &[SampledDynamics] {
        &self.sampled
    }

    pub fn generators(&self) -> &[GeneratorDynamics] {
        &self.generators
    }

    pub fn labels(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self
            .sampled
            .iter()
            .map(|e| e.label.as_str())
            .chain(self.generators.iter().map(|g| g.label.as_str()))
            .collect();
        labels.sort_unstable();
        labels
    }

    pub fn is_empty(&self) -> bool {
        self.sampled.is_empty() && self.generators.is_empty()
    }

    pub fn without_label(&self, label: &str) -> Self {
        Self {
            sampled: self.sampled.iter().filter(|e| e.label != label).cloned().collect(),
            generators: self.generators.iter().filter(|g| g.label != label).cloned().collect(),
        }
    }

    /// Every sampled map, with its label and tag.
    pub fn maps(&self) -> impl Iterator<Item = (&str, f64, &UcpMap)> {
        self.sampled
            .iter()
            .flat_map(|e| e.samples.iter().map(move |(z, m)| (e.label.as_str(), *z, m)))
    }

    /// Checks dimensions and `μ ∘ α = μ` for every member.
    pub fn validate(&self, state: &FaithfulState) -> Result<()> {
        let n = state.dim();
        for (_, _, map) in self.maps() {
            if map.dim_in() != n || map.dim_out() != n {
                return Err(Error::DimensionMismatch {
                    context: "dynamics map",
                    expected: n,
                    found: map.dim_in(),
                });
            }
            let residual = map.preservation_residual(state);
            if residual > MAP_TOL {
                return Err(Error::StateNotPreserved { residual });
            }
        }
        for g in &self.generators {
            if g.hamiltonian.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    context: "dynamics generator",
                    expected: n,
                    found: g.hamiltonian.nrows(),
                });
            }
            linalg::checked_hermitian(&g.hamiltonian)?;
            let residual = linalg::max_abs(&linalg::commutator(&g.hamiltonian, state.density()));
            if residual > MAP_TOL {
                return Err(Error::StateNotPreserved { residual });
            }
        }
        Ok(())
    }

    /// Replaces generators by their groups sampled on `times`.
    pub fn materialize(&self, times: &[f64]) -> Result<Self> {
        let mut out = Self {
            sampled: self.sampled.clone(),
            generators: Vec::new(),
        };
        for g in &self.generators {
            let samples = times
                .iter()
                .map(|&t| Ok((t, UcpMap::unitary(&unitary_group(&g.hamiltonian, t)?)?)))
                .collect::<Result<Vec<_>>>()?;
            out.sampled.push(SampledDynamics {
                label: g.label.clone(),
                samples,
            });
        }
        Ok(out)
    }
}

/// `e^{iht}` for Hermitian `h`.
pub fn unitary_group(h: &CMatrix, t: f64) -> Result<CMatrix> {
    linalg::mat_func(h, |x| c(0.0, x * t).exp())
}

#[derive(Debug, Clone)]
pub struct GenSystem {
    pub state: FaithfulState,
    pub dynamics: DynamicsFamily,
    /// Whether the modular group takes part in modular balance.
    pub include_modular: bool,
}

impl GenSystem {
    pub fn new(state: FaithfulState, dynamics: DynamicsFamily) -> Result<Self> {
        dynamics.validate(&state)?;
        Ok(Self {
            state,
            dynamics,
            include_modular: true,
        })
    }

    pub fn with_modular(mut self, include: bool) -> Self {
        self.include_modular = include;
        self
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn without_label(&self, label: &str) -> Self {
        Self {
            state: self.state.clone(),
            dynamics: self.dynamics.without_label(label),
            include_modular: self.include_modular,
        }
    }

    /// Largest superoperator distance between corresponding members of two
    /// systems with identical label structure, together with the state
    /// distance. `None` if the structures differ.
    pub fn distance_to(&self, other: &GenSystem) -> Option<f64> {
        let (a, b) = (&self.dynamics, &other.dynamics);
        if a.labels() != b.labels() || a.sampled.len() != b.sampled.len() {
            return None;
        }
        let mut worst = self.state.distance_to(&other.state);
        for ea in &a.sampled {
            let eb = b.sampled.iter().find(|e| e.label == ea.label)?;
            if ea.samples.len() != eb.samples.len() {
                return None;
            }
            for ((za, ma), (zb, mb)) in ea.samples.iter().zip(&eb.samples) {
                if za != zb {
                    return None;
                }
                worst = worst.max(ma.distance(mb));
            }
        }
        for ga in &a.generators {
            let gb = b.generators.iter().find(|g| g.label == ga.label)?;
            worst = worst.max(linalg::max_abs_diff(&ga.hamiltonian, &gb.hamiltonian));
        }
        Some(worst)
    }
}

/// KMS-dual of a map preserving `state`.
pub fn kms_dual_of(map: &UcpMap, state: &FaithfulState) -> Result<UcpMap> {
    Ok(IntertwinedPair::new(map.clone(), state.clone(), state.clone())?
        .kms_dual()?
        .map)
}

/// Replaces every member by its KMS-dual with respect to the system state.
/// Generated groups `Ad(e^{iht})` become `Ad(e^{−iht})`.
pub fn kms_dual_system(s: &GenSystem) -> Result<GenSystem> {
    let mut dynamics = DynamicsFamily::new();
    for entry in &s.dynamics.sampled {
        let samples = entry
            .samples
            .iter()
            .map(|(z, m)| Ok((*z, kms_dual_of(m, &s.state)?)))
            .collect::<Result<Vec<_>>>()?;
        dynamics = dynamics.with_samples(&entry.label, samples);
    }
    for g in &s.dynamics.generators {
        dynamics = dynamics.with_generator(&g.label, -g.hamiltonian.clone());
    }
    Ok(GenSystem {
        state: s.state.clone(),
        dynamics,
        include_modular: s.include_modular,
    })
}

/// A system on `M_R ⊗ M_S` with a product state.
#[derive(Debug, Clone)]
pub struct CompositeSystem {
    pub state_r: FaithfulState,
    pub state_s: FaithfulState,
    pub evolution: DynamicsFamily,
}

impl CompositeSystem {
    pub fn new(state_r: FaithfulState, state_s: FaithfulState, evolution: DynamicsFamily) -> Result<Self> {
        evolution.validate(&state_r.product(&state_s)?)?;
        Ok(Self {
            state_r,
            state_s,
            evolution,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.state_r.dim(), self.state_s.dim())
    }

    pub fn state(&self) -> FaithfulState {
        self.state_r.product(&self.state_s).expect("both factors are faithful")
    }

    /// The composite as a plain system.
    pub fn as_system(&self) -> GenSystem {
        GenSystem {
            state: self.state(),
            dynamics: self.evolution.clone(),
            include_modular: true,
        }
    }
}

/// Adjoins `P_{1⊗S}^{μ_R}` as one extra single-sample member.
pub fn augment(c: &CompositeSystem) -> GenSystem {
    let p = channel::cond_expectation_onto_second(&c.state_r, c.state_s.dim());
    GenSystem {
        state: c.state(),
        dynamics: c.evolution.clone().with_map(CONDITIONAL_EXPECTATION_LABEL, p),
        include_modular: true,
    }
}

/// Reduced system on the second factor: every member (generators sampled on
/// `time_grid`) is replaced by `P_S^{μ_R} ∘ α ∘ ι`.
pub fn reduce_system(c: &CompositeSystem, time_grid: &[f64]) -> Result<GenSystem> {
    if !c.evolution.generators.is_empty() && time_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let sampled = c.evolution.materialize(time_grid)?;
    let mut dynamics = DynamicsFamily::new();
    for entry in &sampled.sampled {
        let samples = entry
            .samples
            .iter()
            .map(|(z, m)| Ok((*z, channel::reduce_channel(m, &c.state_r)?)))
            .collect::<Result<Vec<_>>>()?;
        dynamics = dynamics.with_samples(&entry.label, samples);
    }
    GenSystem::new(c.state_s.clone(), dynamics)
}

/// Parameters of the interacting two-qubit Hamiltonian
/// `h = Θ ⊗ 1 + 1 ⊗ Φ + λ u ⊗ v` with real diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitModel {
    pub theta: [f64; 2],
    pub phi: [f64; 2],
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub lambda: f64,
}

impl TwoQubitModel {
    /// Reads the diagonals of four real diagonal 2×2 matrices.
    pub fn from_matrices(theta: &CMatrix, phi: &CMatrix, u: &CMatrix, v: &CMatrix, lambda: f64) -> Result<Self> {
        let diag = |m: &CMatrix, name: &str| -> Result<[f64; 2]> {
            let real = m.iter().all(|z| z.im.abs() <= 1e-12);
            if m.shape() != (2, 2) || !linalg::is_diagonal(m, 1e-12) || !real {
                return Err(Error::NonDiagonal(format!("{name} must be a real diagonal 2x2 matrix")));
            }
            Ok([m[(0, 0)].re, m[(1, 1)].re])
        };
        Ok(Self {
            theta: diag(theta, "theta")?,
            phi: diag(phi, "phi")?,
            u: diag(u, "u")?,
            v: diag(v, "v")?,
            lambda,
        })
    }

    /// Diagonal of `h` in the order `(11, 12, 21, 22)`.
    pub fn eigen_entries(&self) -> [f64; 4] {
        let mut h = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                h[2 * i + j] = self.theta[i] + self.phi[j] + self.lambda * self.u[i] * self.v[j];
            }
        }
        h
    }

    pub fn hamiltonian(&self) -> CMatrix {
        linalg::real_diag(&self.eigen_entries())
    }

    /// The coefficient `Ξ` with `α_t^r(s) = [[s₁₁, Ξ s₁₂], [Ξ* s₂₁, s₂₂]]`.
    pub fn xi(&self, state_r: &FaithfulState, t: f64) -> Result<C64> {
        xi_closed_form(state_r, self.phi, self.u, self.v, self.lambda, t)
    }
}

/// Composite two-qubit system evolving by `Ad(e^{iht})` at the sample times.
pub fn two_qubit_composite(
    model: &TwoQubitModel,
    state_r: &FaithfulState,
    state_s: &FaithfulState,
    time_grid: &[f64],
) -> Result<CompositeSystem> {
    for (s, name) in [(state_r, "first factor state"), (state_s, "second factor state")] {
        if s.dim() != 2 || !linalg::is_diagonal(s.density(), 1e-12) {
            return Err(Error::NonDiagonal(format!("{name} must be a diagonal qubit state")));
        }
    }
    if time_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let h = model.hamiltonian();
    let samples = time_grid
        .iter()
        .map(|&t| Ok((t, UcpMap::unitary(&unitary_group(&h, t)?)?)))
        .collect::<Result<Vec<_>>>()?;
    CompositeSystem::new(
        state_r.clone(),
        state_s.clone(),
        DynamicsFamily::new().with_samples(EVOLUTION_LABEL, samples),
    )
}

/// `Ξ = [d₁ e^{iλu₁(v₁−v₂)t} + d₂ e^{iλu₂(v₁−v₂)t}] e^{i(Φ₁−Φ₂)t}` where
/// `d = diag(state_r)`.
pub fn xi_closed_form(
    state_r: &FaithfulState,
    phi: [f64; 2],
    u: [f64; 2],
    v: [f64; 2],
    lambda: f64,
    t: f64,
) -> Result<C64> {
    if state_r.dim() != 2 || !linalg::is_diagonal(state_r.density(), 1e-12) {
        return Err(Error::NonDiagonal("first factor state must be a diagonal qubit state".into()));
    }
    let d = [state_r.density()[(0, 0)].re, state_r.density()[(1, 1)].re];
    let dv = v[0] - v[1];
    let inner = c(0.0, lambda * u[0] * dv * t).exp() * d[0] + c(0.0, lambda * u[1] * dv * t).exp() * d[1];
    Ok(inner * c(0.0, (phi[0] - phi[1]) * t).exp())
}

/// `U_θ = diag(1, e^{iθ})`.
pub fn angle_unitary(theta: f64) -> CMatrix {
    let mut u = linalg::identity(2);
    u[(1, 1)] = c(0.0, theta).exp();
    u
}

/// Qubit system generated by the single automorphism `Ad(U_θ)`.
pub fn unitary_angle_system(theta: f64, state: &FaithfulState) -> Result<GenSystem> {
    if state.dim() != 2 || !linalg::is_diagonal(state.density(), 1e-12) {
        return Err(Error::NonDiagonal("angle systems need a diagonal qubit state".into()));
    }
    let alpha = UcpMap::unitary(&angle_unitary(theta))?;
    GenSystem::new(state.clone(), DynamicsFamily::new().with_map("rotation", alpha))
}

//! Affine constraint systems on Choi coordinates.
//!
//! A channel `E: M_n → M_m` is encoded by its Choi matrix `C` of size
//! `N = n·m`, flattened to the real vector `x = [Re C, Im C]` (row-major,
//! length `2N²`). Every condition defining the coupling sets (hermiticity,
//! unitality, intertwining, covariance `E ∘ α = β ∘ E`, its KMS-dual
//! counterpart, and the modular condition) is complex-linear in `C` and is
//! split into real rows.

use crate::channel::{LinearMap, UcpMap};
use crate::coupling::TransportPlan;
use crate::linalg::{self, CMatrix, C64};
use crate::qstate::FaithfulState;
use crate::systems::{kms_dual_of, GenSystem};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative rank tolerance for row reduction and nullspaces.
pub const RANK_TOL: f64 = 1e-10;
/// Feasibility tolerance of the product coupling.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    Modular,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Modular => "modular",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "modular" => Ok(Variant::Modular),
            other => Err(Error::InvalidInput(format!("unknown variant '{other}'"))),
        }
    }
}

/// Flattens a Choi matrix into real coordinates `[Re C, Im C]`.
pub fn choi_to_coords(choi: &CMatrix) -> DVector<f64> {
    let size = choi.nrows();
    let nn = size * size;
    let mut x = DVector::zeros(2 * nn);
    for r in 0..size {
        for c in 0..size {
            x[r * size + c] = choi[(r, c)].re;
            x[nn + r * size + c] = choi[(r, c)].im;
        }
    }
    x
}

pub fn coords_to_choi(x: &DVector<f64>, size: usize) -> CMatrix {
    let nn = size * size;
    CMatrix::from_fn(size, size, |r, c| C64::new(x[r * size + c], x[nn + r * size + c]))
}

/// Orthonormal basis (columns) of the Hermitian matrices in real coordinates.
pub fn hermitian_basis(size: usize) -> DMatrix<f64> {
    let nn = size * size;
    let mut basis = DMatrix::zeros(2 * nn, nn);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut col = 0;
    for r in 0..size {
        basis[(r * size + r, col)] = 1.0;
        col += 1;
        for c in r + 1..size {
            basis[(r * size + c, col)] = s;
            basis[(c * size + r, col)] = s;
            col += 1;
            basis[(nn + r * size + c, col)] = s;
            basis[(nn + c * size + r, col)] = -s;
            col += 1;
        }
    }
    basis
}

struct RowBuilder {
    dim_in: usize,
    dim_out: usize,
    width: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
    labels: Vec<String>,
}

impl RowBuilder {
    fn new(dim_in: usize, dim_out: usize) -> Self {
        let size = dim_in * dim_out;
        Self {
            dim_in,
            dim_out,
            width: 2 * size * size,
            data: Vec::new(),
            rhs: Vec::new(),
            labels: Vec::new(),
        }
    }

    fn nn(&self) -> usize {
        self.width / 2
    }

    /// Flat Choi index of the superoperator entry `S[(k,l),(i,j)]`.
    fn s_index(&self, out_idx: usize, in_idx: usize) -> usize {
        let (n, m) = (self.dim_in, self.dim_out);
        let size = n * m;
        let (k, l) = (out_idx / m, out_idx % m);
        let (i, j) = (in_idx / n, in_idx % n);
        (i * m + k) * size + (j * m + l)
    }

    fn push_real(&mut self, row: Vec<f64>, rhs: f64, label: &str) {
        debug_assert_eq!(row.len(), self.width);
        self.data.extend(row);
        self.rhs.push(rhs);
        self.labels.push(label.to_string());
    }

    /// Splits `Σ w·C[idx] = b` into its real and imaginary rows.
    fn push_complex(&mut self, terms: &[(usize, C64)], b: C64, label: &str) {
        let nn = self.nn();
        let mut re = vec![0.0; self.width];
        let mut im = vec![0.0; self.width];
        for &(idx, w) in terms {
            re[idx] += w.re;
            re[nn + idx] -= w.im;
            im[idx] += w.im;
            im[nn + idx] += w.re;
        }
        self.push_real(re, b.re, label);
        self.push_real(im, b.im, label);
    }

    fn hermiticity(&mut self) {
        let size = self.dim_in * self.dim_out;
        let nn = self.nn();
        for r in 0..size {
            for c in r..size {
                if r != c {
                    let mut row = vec![0.0; self.width];
                    row[r * size + c] = 1.0;
                    row[c * size + r] = -1.0;
                    self.push_real(row, 0.0, "hermiticity");
                }
                let mut row = vec![0.0; self.width];
                row[nn + r * size + c] += 1.0;
                row[nn + c * size + r] += 1.0;
                self.push_real(row, 0.0, "hermiticity");
            }
        }
    }

    fn unitality(&mut self) {
        let (n, m) = (self.dim_in, self.dim_out);
        for k in 0..m {
            for l in 0..m {
                let terms: Vec<(usize, C64)> = (0..n)
                    .map(|i| (self.s_index(k * m + l, i * n + i), C64::new(1.0, 0.0)))
                    .collect();
                let b = C64::new(if k == l { 1.0 } else { 0.0 }, 0.0);
                self.push_complex(&terms, b, "unitality");
            }
        }
    }

    /// `Tr(η E(e_ij)) = ζ_ji`.
    fn intertwining(&mut self, source: &FaithfulState, target: &FaithfulState) {
        let (n, m) = (self.dim_in, self.dim_out);
        let eta = target.density();
        for i in 0..n {
            for j in 0..n {
                let mut terms = Vec::with_capacity(m * m);
                for k in 0..m {
                    for l in 0..m {
                        let w = eta[(l, k)];
                        if w != C64::new(0.0, 0.0) {
                            terms.push((self.s_index(k * m + l, i * n + j), w));
                        }
                    }
                }
                self.push_complex(&terms, source.density()[(j, i)], "intertwining");
            }
        }
    }

    /// `S·A − B·S = 0` for input superoperator `A` and output superoperator `B`.
    fn covariance(&mut self, input: &LinearMap, output: &LinearMap, label: &str) {
        let (n, m) = (self.dim_in, self.dim_out);
        let (a, b) = (input.superop(), output.superop());
        let zero = C64::new(0.0, 0.0);
        for p in 0..m * m {
            for q in 0..n * n {
                let mut terms = Vec::with_capacity(n * n + m * m);
                for r in 0..n * n {
                    let w = a[(r, q)];
                    if w != zero {
                        terms.push((self.s_index(p, r), w));
                    }
                }
                for r in 0..m * m {
                    let w = b[(p, r)];
                    if w != zero {
                        terms.push((self.s_index(r, q), -w));
                    }
                }
                self.push_complex(&terms, zero, label);
            }
        }
    }
}

/// The affine system `A x = b` over Choi coordinates, with one provenance
/// label per row and a known feasible point (the product coupling).
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    row_labels: Vec<String>,
    dim_in: usize,
    dim_out: usize,
    feasible_point: DVector<f64>,
}

/// Checks that both systems index their dynamics by the same labels and
/// sample tags, and pairs the members up.
fn matched_members<'a>(
    a: &'a GenSystem,
    b: &'a GenSystem,
) -> Result<(Vec<(String, &'a UcpMap, &'a UcpMap)>, Vec<(String, &'a CMatrix, &'a CMatrix)>)> {
    if a.dynamics.labels() != b.dynamics.labels() {
        return Err(Error::LabelMismatch(format!(
            "{:?} vs {:?}",
            a.dynamics.labels(),
            b.dynamics.labels()
        )));
    }
    let mut maps = Vec::new();
    for ea in a.dynamics.sampled() {
        let eb = b
            .dynamics
            .sampled()
            .iter()
            .find(|e| e.label == ea.label)
            .ok_or_else(|| Error::LabelMismatch(format!("'{}' is sampled on one side only", ea.label)))?;
        if ea.samples.len() != eb.samples.len() {
            return Err(Error::LabelMismatch(format!("'{}' has different sample counts", ea.label)));
        }
        for ((za, ma), (zb, mb)) in ea.samples.iter().zip(&eb.samples) {
            if (za - zb).abs() > 1e-12 {
                return Err(Error::LabelMismatch(format!("'{}' sampled at {za} and {zb}", ea.label)));
            }
            maps.push((format!("{}@{}", ea.label, za), ma, mb));
        }
    }
    let mut gens = Vec::new();
    for ga in a.dynamics.generators() {
        let gb = b
            .dynamics
            .generators()
            .iter()
            .find(|g| g.label == ga.label)
            .ok_or_else(|| Error::LabelMismatch(format!("'{}' is a generator on one side only", ga.label)))?;
        gens.push((format!("{}@generator", ga.label), &ga.hamiltonian, &gb.hamiltonian));
    }
    Ok((maps, gens))
}

fn modular_rows_apply(a: &GenSystem, b: &GenSystem) -> bool {
    a.include_modular || b.include_modular
}

impl ConstraintSet {
    /// Builds the rows for `T(A,B)` (plain) or `T_σ(A,B)` (modular).
    pub fn assemble(a: &GenSystem, b: &GenSystem, variant: Variant) -> Result<Self> {
        let (n, m) = (a.dim(), b.dim());
        let (maps, gens) = matched_members(a, b)?;
        let mut builder = RowBuilder::new(n, m);
        builder.hermiticity();
        builder.unitality();
        builder.intertwining(&a.state, &b.state);
        for (label, ma, mb) in &maps {
            builder.covariance(ma.as_linear(), mb.as_linear(), &format!("balance[{label}]"));
        }
        for (label, ha, hb) in &gens {
            let (ga, gb) = (LinearMap::commutator_with(ha), LinearMap::commutator_with(hb));
            builder.covariance(&ga, &gb, &format!("balance[{label}]"));
        }
        if variant == Variant::Modular {
            for (label, ma, mb) in &maps {
                let da = kms_dual_of(ma, &a.state)?;
                let db = kms_dual_of(mb, &b.state)?;
                builder.covariance(da.as_linear(), db.as_linear(), &format!("kms_dual_balance[{label}]"));
            }
            for (label, ha, hb) in &gens {
                let ga = LinearMap::commutator_with(&(-(*ha).clone()));
                let gb = LinearMap::commutator_with(&(-(*hb).clone()));
                builder.covariance(&ga, &gb, &format!("kms_dual_balance[{label}]"));
            }
            if modular_rows_apply(a, b) {
                builder.covariance(&a.state.modular_generator(), &b.state.modular_generator(), "modular_balance");
            }
        }
        let rows = builder.rhs.len();
        let matrix = DMatrix::from_row_slice(rows, builder.width, &builder.data);
        let product = TransportPlan::product(&a.state, &b.state);
        let feasible_point = choi_to_coords(product.channel().choi());
        let set = Self {
            matrix,
            rhs: DVector::from_vec(builder.rhs),
            row_labels: builder.labels,
            dim_in: n,
            dim_out: m,
            feasible_point,
        };
        let residual = set.residual(&set.feasible_point);
        debug_assert!(residual <= FEASIBILITY_TOL, "product coupling infeasible: {residual:e}");
        Ok(set)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_in, self.dim_out)
    }

    pub fn choi_size(&self) -> usize {
        self.dim_in * self.dim_out
    }

    pub fn num_variables(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Coordinates of the product coupling's Choi matrix.
    pub fn feasible_point(&self) -> &DVector<f64> {
        &self.feasible_point
    }

    /// `‖A x − b‖_∞`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.matrix * x - &self.rhs).amax()
    }

    /// Distinct provenance labels with their row counts, in first-seen order.
    pub fn provenance(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for label in &self.row_labels {
            match out.iter_mut().find(|(l, _)| l == label) {
                Some((_, count)) => *count += 1,
                None => out.push((label.clone(), 1)),
            }
        }
        out
    }

    /// Rows whose label starts with `prefix`.
    pub fn rows_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.row_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }

    /// Keeps a linearly independent subset of the rows spanning the same row
    /// space (greedy Gram–Schmidt with reorthogonalization).
    pub fn reduce_rows(&self) -> ConstraintSet {
        let width = self.matrix.ncols();
        let scale = self.matrix.amax().max(1.0);
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut keep = Vec::new();
        for r in 0..self.matrix.nrows() {
            let mut v = self.matrix.row(r).transpose();
            if v.norm() <= RANK_TOL * scale {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let d = q.dot(&v);
                    v.axpy(-d, q, 1.0);
                }
            }
            let rest = v.norm();
            if rest > RANK_TOL * scale {
                basis.push(v / rest);
                keep.push(r);
            }
            if basis.len() == width {
                break;
            }
        }
        let matrix = DMatrix::from_fn(keep.len(), width, |i, j| self.matrix[(keep[i], j)]);
        Self {
            matrix,
            rhs: DVector::from_fn(keep.len(), |i, _| self.rhs[keep[i]]),
            row_labels: keep.iter().map(|&i| self.row_labels[i].clone()).collect(),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            feasible_point: self.feasible_point.clone(),
        }
    }

    /// Numerical rank of the constraint matrix.
    pub fn rank(&self) -> usize {
        self.num_variables() - self.nullspace().ncols()
    }

    /// Orthonormal basis (columns) of `{x : A x = 0}`.
    ///
    /// Hermiticity rows are handled by starting from a Hermitian basis; the
    /// remaining rows are absorbed label by label, each step shrinking the
    /// basis to the nullspace of the rows restricted to it.
    pub fn nullspace(&self) -> DMatrix<f64> {
        let size = self.choi_size();
        let herm = self.rows_with_prefix("hermiticity");
        let mut basis = if herm.len() == size * size {
            hermitian_basis(size)
        } else {
            DMatrix::identity(self.num_variables(), self.num_variables())
        };
        let others: Vec<usize> = if herm.len() == size * size {
            (0..self.num_rows()).filter(|r| !herm.contains(r)).collect()
        } else {
            (0..self.num_rows()).collect()
        };
        let scale = self.matrix.amax().max(1.0);
        let mut start = 0;
        while start < others.len() && basis.ncols() > 0 {
            let label = &self.row_labels[others[start]];
            let mut end = start;
            while end < others.len() && &self.row_labels[others[end]] == label {
                end += 1;
            }
            let chunk = DMatrix::from_fn(end - start, self.num_variables(), |i, j| self.matrix[(others[start + i], j)]);
            let restricted = &chunk * &basis;
            let inner = small_nullspace(&restricted, RANK_TOL * scale);
            if inner.ncols() < basis.ncols() {
                basis = &basis * inner;
            }
            start = end;
        }
        basis
    }

    /// Whether both sets describe the same affine subspace.
    pub fn same_feasible_set(&self, other: &ConstraintSet) -> bool {
        if self.num_variables() != other.num_variables() {
            return false;
        }
        if self.residual(&other.feasible_point) > FEASIBILITY_TOL
            || other.residual(&self.feasible_point) > FEASIBILITY_TOL
        {
            return false;
        }
        let (n1, n2) = (self.nullspace(), other.nullspace());
        if n1.ncols() != n2.ncols() {
            return false;
        }
        let proj = &n2 * (n2.transpose() * &n1);
        (&n1 - proj).amax() <= 1e-8
    }

    /// Which entries of the coupling density `κ` are constant on the affine
    /// feasible set, and their values there.
    pub fn kappa_pattern(&self, target: &FaithfulState) -> KappaPattern {
        let (n, m) = (self.dim_in, self.dim_out);
        let size = n * m;
        let nn = size * size;
        let g = linalg::kron(&linalg::identity(n), target.sqrt_density());
        let null = self.nullspace();
        let kappa0 = kappa_from_coords(&self.feasible_point, target, n);
        let mut free = vec![vec![false; size]; size];
        for a in 0..size {
            for b in 0..size {
                // κ_ab = (G C G)_ba = Σ G_{b r} C_{r c} G_{c a}
                let mut re = DVector::zeros(2 * nn);
                let mut im = DVector::zeros(2 * nn);
                for r in 0..size {
                    for c in 0..size {
                        let w = g[(b, r)] * g[(c, a)];
                        if w != C64::new(0.0, 0.0) {
                            re[r * size + c] += w.re;
                            re[nn + r * size + c] -= w.im;
                            im[r * size + c] += w.im;
                            im[nn + r * size + c] += w.re;
                        }
                    }
                }
                let moves = (null.transpose() * &re).amax().max((null.transpose() * &im).amax());
                free[a][b] = moves > 1e-8;
            }
        }
        KappaPattern { free, at_product: kappa0 }
    }
}

/// Nullspace of a small dense matrix via QR followed by SVD of the
/// triangular factor.
fn small_nullspace(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let d = m.ncols();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded = if m.nrows() < d {
        let mut p = DMatrix::zeros(d, d);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let r = padded.qr().r();
    let svd = r.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let keep: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] <= tol).collect();
    DMatrix::from_fn(d, keep.len(), |i, j| v_t[(keep[j], i)])
}

/// Coupling density of the Choi point `x`.
pub fn kappa_from_coords(x: &DVector<f64>, target: &FaithfulState, dim_in: usize) -> CMatrix {
    let size = dim_in * target.dim();
    let g = linalg::kron(&linalg::identity(dim_in), target.sqrt_density());
    (&g * coords_to_choi(x, size) * &g).transpose()
}

/// Freedom pattern of `κ` over the affine feasible set.
#[derive(Debug, Clone)]
pub struct KappaPattern {
    /// `free[a][b]`: whether `κ_ab` varies over the feasible set.
    pub free: Vec<Vec<bool>>,
    /// `κ` of the product coupling.
    pub at_product: CMatrix,
}

impl KappaPattern {
    /// Whether `κ_ab` is forced to vanish on the feasible set.
    pub fn forced_zero(&self, a: usize, b: usize) -> bool {
        !self.free[a][b] && self.at_product[(a, b)].norm() <= 1e-12
    }

    /// Off-diagonal entries that are not forced to vanish, upper triangle,
    /// zero-based.
    pub fn free_off_diagonal(&self) -> Vec<(usize, usize)> {
        let size = self.free.len();
        let mut out = Vec::new();
        for a in 0..size {
            for b in a + 1..size {
                if !self.forced_zero(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Per-condition residuals of a plan against two systems.
#[derive(Debug, Clone, Default)]
pub struct BalanceReport {
    pub entries: Vec<(String, f64)>,
}

impl BalanceReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Evaluates every defining condition of `T(A,B)` / `T_σ(A,B)` on a plan,
/// in covariance form.
pub fn check(plan: &TransportPlan, a: &GenSystem, b: &GenSystem, variant: Variant) -> Result<BalanceReport> {
    let (maps, gens) = matched_members(a, b)?;
    let e = plan.channel().as_linear();
    let mut report = BalanceReport::default();
    report.entries.push(("unitality".into(), e.unitality_residual()));
    report
        .entries
        .push(("intertwining".into(), e.intertwining_residual(&a.state, &b.state)));
    report.entries.push(("marginals".into(), plan.marginal_residual()));
    let cov = |input: &LinearMap, output: &LinearMap| -> Result<f64> {
        Ok(e.compose(input)?.distance(&output.compose(e)?))
    };
    for (label, ma, mb) in &maps {
        report
            .entries
            .push((format!("balance[{label}]"), cov(ma.as_linear(), mb.as_linear())?));
    }
    for (label, ha, hb) in &gens {
        let r = cov(&LinearMap::commutator_with(ha), &LinearMap::commutator_with(hb))?;
        report.entries.push((format!("balance[{label}]"), r));
    }
    if variant == Variant::Modular {
        for (label, ma, mb) in &maps {
            let da = kms_dual_of(ma, &a.state)?;
            let db = kms_dual_of(mb, &b.state)?;
            report
                .entries
                .push((format!("kms_dual_balance[{label}]"), cov(da.as_linear(), db.as_linear())?));
        }
        if modular_rows_apply(a, b) {
            let r = cov(&a.state.modular_generator(), &b.state.modular_generator())?;
            report.entries.push(("modular_balance".into(), r));
        }
    }
    Ok(report)
}

//! Dense complex matrix kernel.
//!
//! Conventions used throughout the crate:
//!
//! * `kron(a, b)` puts the first factor on the outer index, so entry
//!   `((i, k), (j, l))` of `a ⊗ b` sits at `(i * rows(b) + k, j * cols(b) + l)`.
//! * `vec` stacks the rows of a matrix, which makes
//!   `(A ⊗ B) vec(C) = vec(A C Bᵀ)` hold exactly. Every formula downstream
//!   (standard vectors, coupling densities, Choi matrices) assumes this.
//!
//! Dimensions are assumed small (`n ≤ 64`); everything is dense.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Hermiticity tolerance (Frobenius norm).
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Matrix unit `e_{ij}` in `M_n` (zero-based indices).
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(i, j)] = cr(1.0);
    e
}

pub fn real_diag(entries: &[f64]) -> CMatrix {
    let n = entries.len();
    let mut d = CMatrix::zeros(n, n);
    for (i, &x) in entries.iter().enumerate() {
        d[(i, i)] = cr(x);
    }
    d
}

/// Builds a complex matrix from row-major real entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| cr(entries[i * cols + j]))
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_diagonal(a: &CMatrix, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
            .all(|(i, j)| i == j || a[(i, j)].norm() <= tol)
}

/// `‖a − a*‖_F`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

/// `(a + a*) / 2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * cr(0.5)
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }
}

/// Checks squareness, finiteness and Hermiticity within the relative
/// tolerance, and returns the symmetrized matrix.
pub fn checked_hermitian(a: &CMatrix) -> Result<CMatrix> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let deviation = hermitian_deviation(a);
    if deviation > HERMITIAN_TOL * frobenius(a).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(symmetrize(a))
}

/// Spectral decomposition `A = V Λ V*` of a Hermitian matrix, eigenvalues
/// ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V f(Λ) V*` for an arbitrary scalar map on the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = self.dim();
        let mut scaled = v.clone();
        for j in 0..n {
            let fj = f(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(cr)
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    let h = checked_hermitian(a)?;
    Ok(herm_eig_unchecked(h))
}

/// Eigendecomposition of a matrix the caller already knows to be Hermitian
/// (for example the symmetrized iterate inside the solver).
pub(crate) fn herm_eig_unchecked(h: CMatrix) -> HermEig {
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    HermEig {
        eigenvalues,
        eigenvectors,
    }
}

/// `f(a)` for Hermitian `a`, computed through the spectral decomposition.
///
/// Fails with [`Error::SpectrumOutOfDomain`] when `f` returns a non-finite
/// value on some eigenvalue (e.g. `ln` of a singular matrix).
pub fn mat_func(a: &CMatrix, f: impl Fn(f64) -> C64) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    for &lambda in eig.eigenvalues.iter() {
        let y = f(lambda);
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::SpectrumOutOfDomain { eigenvalue: lambda });
        }
    }
    Ok(eig.map_spectrum(f))
}

/// Kronecker product, first factor outer.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Tensor factor selector for [`partial_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Traces out `side` of a matrix on `C^n ⊗ C^m`, `dims = (n, m)`.
pub fn partial_trace(x: &CMatrix, side: Factor, dims: (usize, usize)) -> Result<CMatrix> {
    let (n, m) = dims;
    ensure_square(x)?;
    if x.nrows() != n * m {
        return Err(Error::DimensionMismatch {
            context: "partial_trace",
            expected: n * m,
            found: x.nrows(),
        });
    }
    Ok(match side {
        Factor::Second => CMatrix::from_fn(n, n, |i, j| {
            (0..m).map(|k| x[(i * m + k, j * m + k)]).sum()
        }),
        Factor::First => CMatrix::from_fn(m, m, |k, l| {
            (0..n).map(|i| x[(i * m + k, i * m + l)]).sum()
        }),
    })
}

/// Row-stacking vectorization: `vec(c)[i * cols + j] = c[(i, j)]`.
pub fn vec(c: &CMatrix) -> CVector {
    let (rows, cols) = c.shape();
    CVector::from_fn(rows * cols, |idx, _| c[(idx / cols, idx % cols)])
}

pub fn unvec(v: &CVector, dims: (usize, usize)) -> Result<CMatrix> {
    let (rows, cols) = dims;
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "unvec",
            expected: rows * cols,
            found: v.len(),
        });
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

/// Nearest positive semidefinite matrix in Frobenius norm (eigenvalue
/// clipping at zero).
pub fn psd_project(a: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    Ok(eig.map_spectrum(|x| cr(x.max(0.0))))
}

pub(crate) fn psd_project_unchecked(h: CMatrix) -> (CMatrix, f64) {
    let eig = herm_eig_unchecked(h);
    let min = eig.min_eigenvalue();
    if min >= 0.0 {
        return (eig.reconstruct(), min);
    }
    (eig.map_spectrum(|x| cr(x.max(0.0))), min)
}

pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    Ok(herm_eig(a)?.min_eigenvalue())
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> CMatrix {
        from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let eig = herm_eig(&real_diag(&[2.0, 1.0])).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn eig_of_pauli_x() {
        let eig = herm_eig(&pauli_x()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // columns (1, -1)/√2 and (1, 1)/√2 up to phase
        let v0 = eig.eigenvectors.column(0);
        let v1 = eig.eigenvectors.column(1);
        assert!(((v0[0] * v0[1].conj()).re + 0.5).abs() < 1e-12);
        assert!(((v1[0] * v1[1].conj()).re - 0.5).abs() < 1e-12);
        assert!((v0[0].norm() - s).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=16 {
            let a = random_hermitian(&mut rng, n);
            let eig = herm_eig(&a).unwrap();
            let resid = frobenius(&(&a - eig.reconstruct()));
            assert!(resid <= 1e-10 * (1.0 + frobenius(&a)), "n={n} resid={resid}");
            let v = &eig.eigenvectors;
            let gram = v.adjoint() * v;
            assert!(max_abs_diff(&gram, &identity(n)) < 1e-10);
            assert!(eig
                .eigenvalues
                .as_slice()
                .windows(2)
                .all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_rejects_bad_input() {
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(herm_eig(&rect), Err(Error::NotSquare { .. })));
        let skew = from_real_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(herm_eig(&skew), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = mat_func(&real_diag(&[4.0, 9.0]), |x| cr(x.sqrt())).unwrap();
        assert!(max_abs_diff(&r, &real_diag(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn imaginary_powers_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zeta = random_psd(&mut rng, 4) + identity(4) * cr(0.1);
        let t0 = 0.7;
        let u = mat_func(&zeta, |x| cr(x).powc(c(0.0, t0))).unwrap();
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(4)) < 1e-10);
    }

    #[test]
    fn exp_of_diagonal_generator() {
        let h = real_diag(&[1.0, 2.0]);
        let t = 0.3;
        let u = mat_func(&h, |x| c(0.0, x * t).exp()).unwrap();
        assert!((u[(0, 0)] - c(0.0, t).exp()).norm() < 1e-14);
        assert!((u[(1, 1)] - c(0.0, 2.0 * t).exp()).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn log_of_singular_matrix_fails() {
        let r = mat_func(&real_diag(&[1.0, 0.0]), |x| cr(x.ln()));
        assert!(matches!(r, Err(Error::SpectrumOutOfDomain { .. })));
    }

    #[test]
    fn composed_functions_in_common_eigenbasis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_psd(&mut rng, 5) + identity(5);
        let f = |x: f64| cr(x.ln());
        let g = |x: f64| cr(x * x + 1.0);
        let fg = mat_func(&a, |x| f(x * x + 1.0)).unwrap();
        let ga = mat_func(&a, g).unwrap();
        let f_of_ga = mat_func(&ga, f).unwrap();
        assert!(max_abs_diff(&fg, &f_of_ga) < 1e-10);
    }

    #[test]
    fn kron_examples() {
        let p = 0.3;
        let k = kron(&real_diag(&[p, 1.0 - p]), &identity(2));
        assert!(max_abs_diff(&k, &real_diag(&[p, p, 1.0 - p, 1.0 - p])) < 1e-15);

        let k = kron(&matrix_unit(2, 0, 0), &matrix_unit(2, 1, 1));
        // semantic index ((1,2),(1,2)) with one-based labels
        assert_eq!(k[(1, 1)], cr(1.0));
        assert_eq!(k.iter().filter(|z| z.norm() > 0.0).count(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 2, 2);
        assert!((trace(&kron(&a, &b)) - trace(&a) * trace(&b)).norm() < 1e-12);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let [a, b, cm, d] = std::array::from_fn(|_| random_matrix(&mut rng, 2, 2));
            let lhs = kron(&a, &b) * kron(&cm, &d);
            let rhs = kron(&(&a * &cm), &(&b * &d));
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let ab = kron(&a, &b);
        let second = partial_trace(&ab, Factor::Second, (2, 3)).unwrap();
        assert!(max_abs_diff(&second, &(&a * trace(&b))) < 1e-12);
        let first = partial_trace(&ab, Factor::First, (2, 3)).unwrap();
        assert!(max_abs_diff(&first, &(&b * trace(&a))) < 1e-12);
        assert!(matches!(
            partial_trace(&ab, Factor::First, (2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_trace_preserves_trace_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let x = random_psd(&mut rng, 6);
            for side in [Factor::First, Factor::Second] {
                let r = partial_trace(&x, side, (2, 3)).unwrap();
                assert!((trace(&r) - trace(&x)).norm() < 1e-10);
                assert!(min_eigenvalue(&r).unwrap() > -1e-10);
            }
        }
    }

    #[test]
    fn vec_conventions() {
        let v = vec(&identity(2));
        let expect = [1.0, 0.0, 0.0, 1.0];
        for (z, e) in v.iter().zip(expect) {
            assert_eq!(*z, cr(e));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let [a, b, cm] = std::array::from_fn(|_| random_matrix(&mut rng, 2, 2));
            let lhs = kron(&a, &b) * vec(&cm);
            let rhs = vec(&(&a * &cm * b.transpose()));
            assert!((lhs - rhs).camax() < 1e-12);
            assert_eq!(unvec(&vec(&cm), (2, 2)).unwrap(), cm);
        }
        assert!(unvec(&vec(&identity(2)), (3, 2)).is_err());
    }

    #[test]
    fn psd_projection() {
        let r = psd_project(&real_diag(&[1.0, -1.0])).unwrap();
        assert!(max_abs_diff(&r, &real_diag(&[1.0, 0.0])) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = random_psd(&mut rng, 4);
        assert!(max_abs_diff(&psd_project(&p).unwrap(), &p) < 1e-12 * (1.0 + frobenius(&p)));

        let a = random_hermitian(&mut rng, 4);
        let proj = psd_project(&a).unwrap();
        let best = frobenius(&(&a - &proj));
        for _ in 0..200 {
            let q = random_psd(&mut rng, 4) * cr(0.5);
            assert!(best <= frobenius(&(&a - q)) + 1e-12);
        }
        let skew = from_real_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(psd_project(&skew).is_err());
    }
}

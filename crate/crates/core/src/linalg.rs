//! Dense linear-algebra helpers shared by the synthesis code.

use nalgebra::{Complex, DMatrix, DVector, Schur};

/// Eigenvalues of a general square matrix.
///
/// nalgebra's unbounded Schur iteration can stall on matrices with many equal
/// eigenvalues (Hamiltonians of identical sub-networks are a typical case), so
/// the iteration is capped and retried after a fixed orthogonal similarity and
/// with a looser deflation threshold.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    let cap = 200 * n.max(1);
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, cap) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    for (k, eps) in [
        (1.0, 4.0 * f64::EPSILON),
        (2.0, 1e-14),
        (3.0, 1e-12),
        (4.0, 1e-10),
    ] {
        let q = mixing_rotation(n, k);
        let t = q.transpose() * m * &q;
        if let Some(s) = Schur::try_new(t, eps, cap) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    panic!("Schur iteration failed to converge on a {n}x{n} matrix");
}

// Householder reflection along a fixed dense direction.
fn mixing_rotation(n: usize, k: f64) -> DMatrix<f64> {
    let v = DVector::from_fn(n, |i, _| (k * (i as f64 + 1.0) + 0.5).sin() + 1.5);
    let v = &v / v.norm();
    DMatrix::identity(n, n) - &v * v.transpose() * 2.0
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    eigenvalues(m).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    spectral_abscissa(m) < 0.0
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Relative asymmetry `||M - M^T||_F / max(||M||_F, 1)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.is_square() && symmetrize(m).cholesky().is_some()
}

/// Solves `M^T X + X M + C = 0` for `X`.
///
/// Dense Kronecker formulation; the systems here have at most a few dozen
/// states, so the `n^2 x n^2` LU is cheap. Returns `None` when `M` and `-M`
/// share an eigenvalue (singular Lyapunov operator).
pub fn solve_lyapunov(m: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    // column-major vec: vec(M^T X) = (I (x) M^T) vec X, vec(X M) = (M^T (x) I) vec X
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, c.iter().map(|v| -v));
    let sol = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some(symmetrize(&x))
}

/// Matrix sign function by scaled Newton iteration.
///
/// Stops once the update is below `tol` relative to the iterate, or when the
/// quadratic phase has stagnated at rounding level. Returns `Ok(None)` if an
/// iterate becomes singular, which happens when the argument has
/// (numerically) an eigenvalue on the imaginary axis, and `Err(iterations)`
/// when the cap is reached.
pub fn matrix_sign(
    m: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Option<DMatrix<f64>>, usize> {
    let dim = m.nrows() as f64;
    let mut s = m.clone();
    let mut scale = true;
    let mut prev_change = f64::INFINITY;
    for _ in 0..max_iter {
        let lu = s.clone().lu();
        let det = lu.determinant();
        let Some(inv) = lu.try_inverse() else {
            return Ok(None);
        };
        let c = if scale && det.is_finite() && det != 0.0 {
            det.abs().powf(-1.0 / dim)
        } else {
            1.0
        };
        let next = (&s * c + inv / c) * 0.5;
        let change = (&next - &s).norm();
        let size = next.norm();
        if !size.is_finite() {
            return Ok(None);
        }
        s = next;
        if change <= tol * size {
            return Ok(Some(s));
        }
        if !scale && change < 1e-6 * size && change >= prev_change {
            return Ok(Some(s));
        }
        // determinant scaling only pays off far from convergence
        if change < 1e-2 * size {
            scale = false;
        }
        prev_change = change;
    }
    Err(max_iter)
}

/// Popov-Belevitch-Hautus test: `(A, B)` is stabilizable iff
/// `rank [A - lambda I, B] = n` for every eigenvalue with `Re(lambda) >= 0`.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let ac: DMatrix<Complex<f64>> = a.map(|v| Complex::new(v, 0.0));
    let bc: DMatrix<Complex<f64>> = b.map(|v| Complex::new(v, 0.0));
    let scale = a.norm().max(b.norm()).max(1.0);
    eigenvalues(a)
        .iter()
        .filter(|l| l.re >= -1e-12 * scale)
        .all(|&l| {
            let mut pbh = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
            let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * l;
            pbh.view_mut((0, 0), (n, n)).copy_from(&shifted);
            pbh.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
            let sv = pbh.singular_values();
            sv.iter().filter(|s| **s > 1e-10 * scale).count() == n
        })
}

/// `(A, C)` detectable iff `(A^T, C^T)` stabilizable.
pub fn is_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> bool {
    is_stabilizable(&a.transpose(), &c.transpose())
}

pub fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && m.iter()
            .enumerate()
            .all(|(k, v)| k % m.nrows() == k / m.nrows() || *v == 0.0)
}

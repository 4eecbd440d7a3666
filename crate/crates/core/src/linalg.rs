//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Scalar;

pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (m + m.transpose()) * half
}

pub fn min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b))
}

pub fn max_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues
        .iter()
        .copied()
        .fold(T::min_value().unwrap(), |a, b| a.max(b))
}

/// Cholesky factor of `m + jitter·I`, trying `jitters` in order.
pub fn cholesky_with_jitter<T: Scalar>(
    m: &DMatrix<T>,
    jitters: &[T],
    what: &'static str,
) -> Result<Cholesky<T, Dyn>> {
    for &j in jitters {
        let mut a = m.clone();
        if j > T::zero() {
            for i in 0..a.nrows() {
                a[(i, i)] += j;
            }
        }
        if let Some(ch) = Cholesky::new(a) {
            if ch.l_dirty().iter().all(|v| v.is_finite()) {
                return Ok(ch);
            }
        }
    }
    Err(Error::NotPositiveDefinite {
        what,
        min_eig: min_eigenvalue(m).to_f64_lossy(),
    })
}

pub fn cholesky<T: Scalar>(m: &DMatrix<T>, what: &'static str) -> Result<Cholesky<T, Dyn>> {
    cholesky_with_jitter(m, &[T::zero()], what)
}

/// Cholesky with jitter escalation `1e-12 → 1e-6` (scaled by the mean diagonal).
pub fn cholesky_escalating<T: Scalar>(
    m: &DMatrix<T>,
    what: &'static str,
) -> Result<Cholesky<T, Dyn>> {
    let n = m.nrows().max(1);
    let scale = (m.trace() / T::from_usize_lossy(n))
        .abs()
        .max(T::lit(1e-30));
    let jitters: Vec<T> = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6]
        .iter()
        .map(|&j| T::lit(j) * scale)
        .collect();
    cholesky_with_jitter(m, &jitters, what)
}

/// Low-rank square-root factor of a PSD matrix: `m ≈ U·diag(d)·Uᵀ` keeping eigenvalues
/// above `rel_tol · max_eig`. Returns `(U, d)` with `U` having orthonormal columns.
pub fn psd_factor<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> (DMatrix<T>, DVector<T>) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DVector::zeros(0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let cutoff = max * rel_tol;
    // descending order keeps the factorization deterministic
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > cutoff && eig.eigenvalues[i] > T::zero())
        .collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u = DMatrix::zeros(n, idx.len());
    let mut d = DVector::zeros(idx.len());
    for (c, &i) in idx.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(i));
        d[c] = eig.eigenvalues[i];
    }
    (u, d)
}

/// Symmetric square root with negative eigenvalues clipped to zero.
pub fn psd_sqrt<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut root = DMatrix::zeros(n, n);
    for i in 0..n {
        let lam = eig.eigenvalues[i].max(T::zero()).sqrt();
        let v = eig.eigenvectors.column(i);
        root += &v * v.transpose() * lam;
    }
    root
}

/// Projects a symmetric matrix onto the PSD cone (eigenvalue floor at zero).
pub fn psd_project<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam > T::zero() {
            let v = eig.eigenvectors.column(i);
            out += &v * v.transpose() * lam;
        }
    }
    symmetrize(&out)
}

/// Numerical rank and thin SVD pieces `(U_r, s_r, V_r)` of `m`.
pub fn thin_svd<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> (DMatrix<T>, DVector<T>, DMatrix<T>) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (
            DMatrix::zeros(rows, 0),
            DVector::zeros(0),
            DMatrix::zeros(cols, 0),
        );
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let cutoff = smax * rel_tol;
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff && svd.singular_values[i] > T::zero())
        .collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let r = idx.len();
    let mut ur = DMatrix::zeros(rows, r);
    let mut sr = DVector::zeros(r);
    let mut vr = DMatrix::zeros(cols, r);
    for (c, &i) in idx.iter().enumerate() {
        ur.set_column(c, &u.column(i));
        sr[c] = svd.singular_values[i];
        vr.set_column(c, &vt.row(i).transpose());
    }
    (ur, sr, vr)
}

/// Log-determinant from a Cholesky factor.
pub fn chol_logdet<T: Scalar>(ch: &Cholesky<T, Dyn>) -> T {
    let l = ch.l_dirty();
    let mut s = T::zero();
    for i in 0..l.nrows() {
        s += l[(i, i)].ln();
    }
    s + s
}

/// Solves `L x = b` for lower-triangular `L` held in a Cholesky factor.
pub fn chol_solve_lower<T: Scalar>(ch: &Cholesky<T, Dyn>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut x = b.clone();
    ch.l_dirty().solve_lower_triangular_mut(&mut x);
    x
}

pub fn identity<T: Scalar>(n: usize) -> DMatrix<T> {
    DMatrix::identity(n, n)
}

/// Row-major flattening.
pub fn flatten_row_major<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn from_row_major<T: Scalar>(rows: usize, cols: usize, data: &[T]) -> DMatrix<T> {
    DMatrix::from_row_slice(rows, cols, data)
}

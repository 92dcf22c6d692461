//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(m: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    *vals.last().expect("nonempty matrix")
}

/// Principal eigenpair (largest eigenvalue) of a Hermitian matrix.
pub fn principal_eigenvector(m: &CMatrix) -> (f64, CVector) {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    (vals[n - 1], vecs.column(n - 1).into_owned())
}

/// Hermitian square root of a PSD matrix. Eigenvalues in `[-floor, 0)` are
/// clipped to zero; anything more negative is reported as `None`.
pub fn psd_sqrt(m: &CMatrix, floor: f64) -> Option<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    let scale = vals.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let mut d = CMatrix::zeros(vals.len(), vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v < -floor * scale {
            return None;
        }
        d[(i, i)] = C64::new(v.max(0.0).sqrt(), 0.0);
    }
    Some(&vecs * d * vecs.adjoint())
}

/// `(M + Mᴴ)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Orthonormal basis (as columns) of the orthogonal complement of `h`.
pub fn null_space_basis(h: &CVector) -> CMatrix {
    let n = h.len();
    let norm_sq = h.norm_squared();
    let proj = CMatrix::identity(n, n) - (h * h.adjoint()).unscale(norm_sq);
    let (vals, vecs) = hermitian_eigen(&proj);
    // the projector has eigenvalue 0 once (along h) and 1 on the complement
    let cols: Vec<CVector> = vals
        .iter()
        .zip(vecs.column_iter())
        .filter(|(v, _)| **v > 0.5)
        .map(|(_, c)| c.into_owned())
        .collect();
    CMatrix::from_columns(&cols)
}

/// Projector onto the orthogonal complement of `h`.
pub fn null_projector(h: &CVector) -> CMatrix {
    let n = h.len();
    CMatrix::identity(n, n) - (h * h.adjoint()).unscale(h.norm_squared())
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| C64::new(v, 0.0)),
    ))
}

/// Real trace of a (Hermitian) matrix.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `xᴴ M x`, real part.
pub fn quad_form(m: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(m * x)).re
}

//! Small complex dense-matrix helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// exp(i s H) for Hermitian H.
pub fn exp_i_hermitian(h: &CMat, s: f64) -> CMat {
    let (vals, v) = hermitian_eigen(h);
    let n = h.nrows();
    let mut vd = v.clone();
    for j in 0..n {
        let ph = Complex64::from_polar(1.0, s * vals[j]);
        for i in 0..n {
            vd[(i, j)] *= ph;
        }
    }
    vd * v.adjoint()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &CMat) -> f64 {
    hermitian_eigen(h).0.first().copied().unwrap_or(0.0)
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_pauli_z() {
        let sz = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let u = exp_i_hermitian(&sz, 0.3);
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, 0.3)).norm() < 1e-14);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, -0.3)).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn exp_is_unitary_and_matches_series() {
        let h = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.5, 0.0),
                c(0.1, 0.2),
                c(-0.3, 0.0),
                c(0.1, -0.2),
                c(-0.2, 0.0),
                c(0.0, 0.4),
                c(-0.3, 0.0),
                c(0.0, -0.4),
                c(0.7, 0.0),
            ],
        );
        let u = exp_i_hermitian(&h, 1.0);
        let id = CMat::identity(3, 3);
        assert!(max_abs(&(&u * u.adjoint() - &id)) < 1e-13);
        // Taylor series oracle
        let ih = h.map(|z| z * I);
        let mut term = id.clone();
        let mut sum = id.clone();
        for k in 1..40 {
            term = &term * &ih / c(k as f64, 0.0);
            sum += &term;
        }
        assert!(max_abs(&(u - sum)) < 1e-13);
    }
}

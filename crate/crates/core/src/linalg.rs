//! Small dense complex linear algebra shared by the gate and certification
//! code. Two-qubit operators are 4x4, Choi and chi matrices 16x16.

use nalgebra::{DMatrix, SMatrix, SVector};
pub use num_complex::Complex64 as C64;

pub type Op2 = SMatrix<C64, 2, 2>;
pub type Op4 = SMatrix<C64, 4, 4>;
pub type Op16 = SMatrix<C64, 16, 16>;
pub type Ket4 = SVector<C64, 4>;
pub type Ket16 = SVector<C64, 16>;

/// Comparison tolerance for amplitudes and operators.
pub const TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entry-wise deviation of `m^† m` from the identity.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let g = m.adjoint() * m;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - re(target)).norm());
        }
    }
    worst
}

pub fn max_abs_diff<const R: usize, const C: usize>(
    a: &SMatrix<C64, R, C>,
    b: &SMatrix<C64, R, C>,
) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is discarded).
pub fn hermitian_eigenvalues<const N: usize>(m: &SMatrix<C64, N, N>) -> Vec<f64> {
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let dynamic = DMatrix::from_iterator(N, N, h.iter().copied());
    let mut ev: Vec<f64> = dynamic.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// `W` with `m = W W^†`: eigenvectors scaled by the square roots of their
/// eigenvalues. Eigenvalues below `floor` are treated as exact zeros.
pub fn psd_factor<const N: usize>(m: &SMatrix<C64, N, N>, floor: f64) -> SMatrix<C64, N, N> {
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let dynamic = DMatrix::from_iterator(N, N, h.iter().copied());
    let eig = dynamic.symmetric_eigen();
    let mut out = SMatrix::<C64, N, N>::zeros();
    for k in 0..N {
        let mu = eig.eigenvalues[k];
        if mu < floor {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for i in 0..N {
            out[(i, k)] = v[i] * mu.sqrt();
        }
    }
    out
}

/// Rotates a global phase out of `m` so that its largest-magnitude entry is
/// real and positive. Ties (within 1e-12) resolve to the first entry in
/// row-major order.
pub fn fix_global_phase<const R: usize, const C: usize>(
    m: &SMatrix<C64, R, C>,
) -> SMatrix<C64, R, C> {
    let max = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return *m;
    }
    let mut pivot = C64::new(1.0, 0.0);
    'search: for i in 0..R {
        for j in 0..C {
            if m[(i, j)].norm() >= max - 1e-12 {
                pivot = m[(i, j)];
                break 'search;
            }
        }
    }
    let phase = pivot.conj() / pivot.norm();
    m.map(|z| z * phase)
}

pub fn kron2(a: &Op2, b: &Op2) -> Op4 {
    Op4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Choi vector `|K>> = sum_i |i> (x) K|i>`, indexed as `4 * input + output`.
pub fn choi_vector(k: &Op4) -> Ket16 {
    Ket16::from_fn(|idx, _| k[(idx % 4, idx / 4)])
}

pub fn trace<const N: usize>(m: &SMatrix<C64, N, N>) -> C64 {
    (0..N).map(|i| m[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_phase_fix_makes_pivot_positive() {
        let m = Op2::new(c(0.0, -0.5), re(0.0), re(0.0), c(0.0, 0.5));
        let f = fix_global_phase(&m);
        assert!((f[(0, 0)] - re(0.5)).norm() < 1e-15);
        assert!((f[(1, 1)] - re(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let v = Ket4::new(re(0.5), c(0.0, 0.5), re(0.5), re(-0.5));
        let m = v * v.adjoint() * re(0.7) + Op4::identity() * re(0.075);
        let w = psd_factor(&m, 0.0);
        assert!(max_abs_diff(&(w * w.adjoint()), &m) < 1e-12);
        let pure = v * v.adjoint();
        let w = psd_factor(&pure, 1e-13);
        assert_eq!(w.iter().filter(|z| z.norm() > 0.0).count(), 4);
    }

    #[test]
    fn choi_vector_of_identity_is_unnormalized_bell() {
        let v = choi_vector(&Op4::identity());
        for idx in 0..16 {
            let expected = if idx % 4 == idx / 4 { 1.0 } else { 0.0 };
            assert_eq!(v[idx], re(expected));
        }
    }
}

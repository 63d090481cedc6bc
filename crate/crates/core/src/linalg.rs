//! Dense complex helpers shared by every module.
//!
//! Vectorization is column-stacking throughout: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`,
//! so the superoperator of `X ↦ K X K†` is `conj(K) ⊗ K`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn vec_cols(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, n: usize) -> CMat {
    assert_eq!(v.len(), n * n, "vector length is not a square");
    CMat::from_column_slice(n, n, v.as_slice())
}

/// Superoperator of `X ↦ Σ_k K_k X K_k†`.
pub fn superop_from_kraus(kraus: &[CMat]) -> CMat {
    let n = kraus[0].nrows();
    let mut s = CMat::zeros(n * n, n * n);
    for k in kraus {
        s += kron(&k.map(|z| z.conj()), k);
    }
    s
}

/// Superoperator of `X ↦ U X U†`.
pub fn conjugation_superop(u: &CMat) -> CMat {
    kron(&u.map(|z| z.conj()), u)
}

pub fn apply_superop(s: &CMat, x: &CMat) -> CMat {
    unvec(&(s * vec_cols(x)), x.nrows())
}

/// Trace over the second factor of a `d1 ⊗ d2` operator.
pub fn partial_trace_second(m: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = CMat::zeros(d1, d1);
    for a in 0..d1 {
        for b in 0..d1 {
            let mut acc = ZERO;
            for x in 0..d2 {
                acc += m[(a * d2 + x, b * d2 + x)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Trace over the first factor of a `d1 ⊗ d2` operator.
pub fn partial_trace_first(m: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = CMat::zeros(d2, d2);
    for x in 0..d2 {
        for y in 0..d2 {
            let mut acc = ZERO;
            for a in 0..d1 {
                acc += m[(a * d2 + x, a * d2 + y)];
            }
            out[(x, y)] = acc;
        }
    }
    out
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(m.nrows(), m.ncols());
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a general square matrix from its complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = schur(m);
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Complex Schur form `(Q, T)`, with the same tightened threshold as [`svd`].
pub fn schur(m: &CMat) -> (CMat, CMat) {
    nalgebra::linalg::Schur::try_new(m.clone(), 1e-18, 100_000)
        .unwrap_or_else(|| nalgebra::linalg::Schur::new(m.clone()))
        .unpack()
}

/// SVD with a convergence threshold below machine epsilon; the default
/// threshold leaves nearly rank-deficient complex inputs unconverged.
pub fn svd(m: &CMat, compute_u: bool, compute_v: bool) -> nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn> {
    nalgebra::SVD::try_new(m.clone(), compute_u, compute_v, 1e-18, 100_000)
        .unwrap_or_else(|| m.clone().svd(compute_u, compute_v))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    svd(m, false, false).singular_values.iter().copied().collect()
}

/// Right singular vector for the smallest singular value, i.e. the best null vector.
pub fn null_vector(m: &CMat) -> (CVec, f64) {
    let svd = svd(m, false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let (k, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let v = v_t.row(k).transpose().map(|z| z.conj());
    (v, s)
}

/// Eigen-decomposition of a unitary. Phases are in `[0, 2π)`, sorted ascending;
/// columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn unitary_eigen(u: &CMat) -> (Vec<f64>, CMat) {
    let (q, t) = schur(u);
    let n = u.nrows();
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let mut p = t[(k, k)].arg();
            if p < -1e-12 {
                p += 2.0 * PI;
            }
            (p.max(0.0), k)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vecs = CMat::zeros(n, n);
    for (col, &(_, k)) in pairs.iter().enumerate() {
        vecs.set_column(col, &q.column(k));
    }
    (pairs.iter().map(|p| p.0).collect(), vecs)
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    (u.adjoint() * u - identity(u.nrows())).norm()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn matrix_power(m: &CMat, mut n: usize) -> CMat {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Shift `|z⟩ ↦ |z+1 mod D⟩`.
pub fn weyl_x(dim: usize) -> CMat {
    let mut x = CMat::zeros(dim, dim);
    for z in 0..dim {
        x[((z + 1) % dim, z)] = ONE;
    }
    x
}

/// Clock `|z⟩ ↦ e^{2πiz/D}|z⟩`.
pub fn weyl_z(dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for z in 0..dim {
        m[(z, z)] = C64::from_polar(1.0, 2.0 * PI * z as f64 / dim as f64);
    }
    m
}

/// `X^a Z^b`.
pub fn weyl(dim: usize, a: usize, b: usize) -> CMat {
    matrix_power(&weyl_x(dim), a) * matrix_power(&weyl_z(dim), b)
}

pub fn pauli() -> [CMat; 3] {
    [
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) / 2f64.sqrt()
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase fix on R's diagonal).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let qr = ginibre(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(n, |_, _| gaussian_complex(rng));
    let norm = v.norm();
    v / C64::from(norm)
}

pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = ginibre(n, n, rng);
    let rho = &g * g.adjoint();
    let t = rho.trace();
    rho / t
}

pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Shortest distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Real matrix helper for tests and model construction.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_slice(rows, cols, &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

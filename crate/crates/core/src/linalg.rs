//! Dense complex linear algebra shared by every module: Hermitian functional
//! calculus, Kronecker products and tensor-axis bookkeeping.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenvalues at or below this magnitude are treated as exactly zero.
pub const EIG_CLAMP: f64 = 1e-12;

/// Hermiticity tolerance accepted by the functional calculus.
pub const HERM_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry of |M - M†|.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// (M + M†) / 2.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h.clone());
    let (raw_vals, raw_vecs) = if eig.eigenvalues.iter().all(|x| x.is_finite()) {
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    } else {
        jacobi_eigh(h)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[b].total_cmp(&raw_vals[a]));
    let vals = order.iter().map(|&k| raw_vals[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &raw_vecs.column(src));
    }
    (vals, vecs)
}

/// Cyclic Jacobi for Hermitian matrices. The QR-based solver occasionally
/// returns NaN on highly degenerate structured inputs; this is the fallback.
fn jacobi_eigh(mut a: CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let mut v = identity(n);
    let scale = a.norm_squared().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[(p, q)];
                let r = b.norm();
                if r <= 1e-300 {
                    continue;
                }
                // phase so that a[p, q] becomes real and positive
                let ph = b / r;
                for k in 0..n {
                    a[(k, q)] *= ph.conj();
                    v[(k, q)] *= ph.conj();
                }
                for k in 0..n {
                    a[(q, k)] *= ph;
                }
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (kp, kq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = kp * cs - kq * sn;
                    a[(k, q)] = kp * sn + kq * cs;
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vp * cs - vq * sn;
                    v[(k, q)] = vp * sn + vq * cs;
                }
                for k in 0..n {
                    let (pk, qk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = pk * cs - qk * sn;
                    a[(q, k)] = pk * sn + qk * cs;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|x| !x.is_finite()) {
        vals = jacobi_eigh(h).0;
    }
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Scalar functions applied through the spectral decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HermitianFn {
    Log2,
    Sqrt,
    /// λ ↦ λ^z for complex z, defined on the support only.
    Power(Complex64),
    /// Support-restricted inverse square root.
    PinvSqrt,
}

impl HermitianFn {
    fn eval(self, lambda: f64) -> Complex64 {
        if lambda <= EIG_CLAMP {
            return cr(0.0);
        }
        match self {
            HermitianFn::Log2 => cr(lambda.log2()),
            HermitianFn::Sqrt => cr(lambda.sqrt()),
            HermitianFn::PinvSqrt => cr(1.0 / lambda.sqrt()),
            HermitianFn::Power(z) => {
                let ln = lambda.ln();
                (z * ln).exp()
            }
        }
    }
}

/// Apply `f` to a Hermitian matrix via its eigendecomposition.
///
/// Eigenvalues below [`EIG_CLAMP`] map to zero, which encodes both
/// 0·log 0 = 0 and pinv(0) = 0.
pub fn hermitian_apply(m: &CMat, f: HermitianFn) -> Result<CMat> {
    let dev = hermiticity_deviation(m);
    if dev > HERM_TOL {
        return Err(Error::HermiticityViolation(dev));
    }
    let (vals, vecs) = eigh(m);
    Ok(spectral_map(&vals, &vecs, |l| f.eval(l)))
}

/// Σ f(λ_k) |v_k⟩⟨v_k|.
pub fn spectral_map(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (k, &l) in vals.iter().enumerate() {
        let fk = f(l);
        for i in 0..n {
            scaled[(i, k)] *= fk;
        }
    }
    scaled * vecs.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|l| l.abs()).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Orthonormalize the columns of `x` by Householder QR, fixing the phase so
/// that the triangular factor has a positive real diagonal. This makes the
/// factorization unique and the result a deterministic function of `x`.
pub fn orthonormalize(x: &CMat) -> CMat {
    let (rows, cols) = x.shape();
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = CMat::zeros(rows, cols);
    for k in 0..cols {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { cr(1.0) };
        for i in 0..rows {
            out[(i, k)] = q[(i, k)] * phase;
        }
    }
    out
}

/// Closest isometry in Frobenius norm (polar factor U W† of U Σ W†).
pub fn polar_isometry(x: &CMat) -> CMat {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Max-entry deviation of V†V from the identity.
pub fn isometry_deviation(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    max_abs(&(g - identity(v.ncols())))
}

/// Mixed-radix strides (row-major, first axis most significant).
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For a tensor with axis sizes `dims`, return `map` with
/// `map[old_flat] = new_flat`, where the new axis `k` is old axis `order[k]`.
pub fn axis_permutation_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    let new_strides = strides(&new_dims);
    // stride in the new flat index contributed by each old axis
    let mut contrib = vec![0usize; dims.len()];
    for (k, &a) in order.iter().enumerate() {
        contrib[a] = new_strides[k];
    }
    (0..total)
        .map(|flat| {
            let mut acc = 0;
            for a in 0..dims.len() {
                let digit = (flat / old_strides[a]) % dims[a];
                acc += digit * contrib[a];
            }
            acc
        })
        .collect()
}

/// Re-index a matrix acting on a tensor space so the axes follow `order`.
pub fn permute_matrix(m: &CMat, dims: &[usize], order: &[usize]) -> CMat {
    let map = axis_permutation_map(dims, order);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    out
}

pub fn permute_vector(v: &CVec, dims: &[usize], order: &[usize]) -> CVec {
    let map = axis_permutation_map(dims, order);
    let mut out = CVec::zeros(v.len());
    for i in 0..v.len() {
        out[map[i]] = v[i];
    }
    out
}

fn complement(n_axes: usize, keep: &[usize]) -> Vec<usize> {
    (0..n_axes).filter(|a| !keep.contains(a)).collect()
}

/// Partial trace keeping the axes in `keep` (in that order).
pub fn reduce_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let rest = complement(dims.len(), keep);
    let mut order = keep.to_vec();
    order.extend_from_slice(&rest);
    let map = axis_permutation_map(dims, &order);
    let total = m.nrows();
    let mut inv = vec![0usize; total];
    for (old, &new) in map.iter().enumerate() {
        inv[new] = old;
    }
    let dk: usize = keep.iter().map(|&a| dims[a]).product();
    let dt = total / dk.max(1);
    let mut out = CMat::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut s = cr(0.0);
            for t in 0..dt {
                s += m[(inv[a * dt + t], inv[b * dt + t])];
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// Reshape a pure vector into a `d_keep × d_rest` matrix with `keep` axes on
/// the rows (in the given order) and the remaining axes on the columns.
pub fn bipartition_matrix(v: &CVec, dims: &[usize], keep: &[usize]) -> CMat {
    let rest = complement(dims.len(), keep);
    let mut order = keep.to_vec();
    order.extend_from_slice(&rest);
    let pv = permute_vector(v, dims, &order);
    let dk: usize = keep.iter().map(|&a| dims[a]).product();
    let dt = v.len() / dk.max(1);
    // row-major flat index a*dt + t → matrix (a, t)
    CMat::from_fn(dk, dt, |a, t| pv[a * dt + t])
}

/// Inverse of [`bipartition_matrix`].
pub fn unbipartition_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> CVec {
    let rest = complement(dims.len(), keep);
    let mut order = keep.to_vec();
    order.extend_from_slice(&rest);
    let (dk, dt) = m.shape();
    let flat = CVec::from_fn(dk * dt, |i, _| m[(i / dt, i % dt)]);
    let new_dims: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    // inverse permutation: new axis order → original
    let mut inv_order = vec![0usize; order.len()];
    for (k, &a) in order.iter().enumerate() {
        inv_order[a] = k;
    }
    permute_vector(&flat, &new_dims, &inv_order)
}

/// Reduced density matrix of a pure vector on `keep`.
pub fn pure_marginal(v: &CVec, dims: &[usize], keep: &[usize]) -> CMat {
    let m = bipartition_matrix(v, dims, keep);
    &m * m.adjoint()
}

/// Shannon entropy in bits of a spectrum, with eigenvalues ≤ EIG_CLAMP dropped.
pub fn spectrum_entropy(vals: &[f64]) -> f64 {
    vals.iter()
        .filter(|&&l| l > EIG_CLAMP)
        .map(|&l| -l * l.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_random_hermitian() {
        let n = 7;
        let x = CMat::from_fn(n, n, |i, j| c((i * 3 + j) as f64 % 5.0 - 2.0, (i as f64 - j as f64) * 0.3));
        let h = hermitian_part(&x);
        let (vals, v) = jacobi_eigh(h.clone());
        let recon = &v * CMat::from_diagonal(&CVec::from_iterator(n, vals.iter().map(|&l| cr(l)))) * v.adjoint();
        assert!(max_abs(&(recon - &h)) < 1e-10);
        assert!(isometry_deviation(&v) < 1e-10);
    }

    #[test]
    fn eigh_survives_sparse_rank_one() {
        // structured 64-dim rank-one projector on which the QR solver yields NaN
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
        let mut v = CVec::zeros(64);
        for (i, row) in amps.iter().enumerate() {
            for (ac, &a) in row.iter().enumerate() {
                v[(((ac / 2) * 4 + i) * 2 + ac % 2) * 4 + i] += cr(0.5 * a);
            }
        }
        let (vals, _) = eigh(&(&v * v.adjoint()));
        assert!(vals.iter().all(|x| x.is_finite()));
        assert!((vals[0] - 1.0).abs() < 1e-12 && vals[1].abs() < 1e-12);
    }

    #[test]
    fn log2_of_identity_is_zero() {
        let l = hermitian_apply(&identity(3), HermitianFn::Log2).unwrap();
        assert!(max_abs(&l) < 1e-14);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let mut m = zeros(2, 2);
        m[(0, 0)] = cr(4.0);
        m[(1, 1)] = cr(9.0);
        let s = hermitian_apply(&m, HermitianFn::Sqrt).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((s[(1, 1)].re - 3.0).abs() < 1e-12);
        assert!(s[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn pinv_sqrt_of_projector_is_projector() {
        let v = CVec::from_vec(vec![cr(1.0), cr(1.0), cr(0.0)]) / cr(2f64.sqrt());
        let p = &v * v.adjoint();
        let q = hermitian_apply(&p, HermitianFn::PinvSqrt).unwrap();
        assert!(max_abs(&(q - &p)) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = zeros(2, 2);
        m[(0, 1)] = cr(1.0);
        assert!(matches!(
            hermitian_apply(&m, HermitianFn::Sqrt),
            Err(Error::HermiticityViolation(_))
        ));
    }

    #[test]
    fn power_zero_is_support_projector() {
        let mut m = zeros(3, 3);
        m[(0, 0)] = cr(0.5);
        m[(1, 1)] = cr(0.5);
        let p = hermitian_apply(&m, HermitianFn::Power(c(0.0, 0.0))).unwrap();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(p[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn axis_map_roundtrip() {
        let dims = [2, 3, 2];
        let order = [2, 0, 1];
        let map = axis_permutation_map(&dims, &order);
        let mut seen = map.clone();
        seen.sort();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn bipartition_roundtrip() {
        let dims = [2, 3, 2];
        let v = CVec::from_fn(12, |i, _| c(i as f64, -(i as f64) * 0.5));
        let m = bipartition_matrix(&v, &dims, &[2, 0]);
        let back = unbipartition_matrix(&m, &dims, &[2, 0]);
        assert!((back - v).norm() < 1e-14);
    }

    #[test]
    fn orthonormalize_is_unique_isometry() {
        let x = CMat::from_fn(4, 2, |i, j| c((i + 2 * j) as f64 * 0.3 + 1.0, (i * j) as f64 - 0.7));
        let q = orthonormalize(&x);
        assert!(isometry_deviation(&q) < 1e-12);
        // applying a positive diagonal rescale does not change the result
        let scaled = &x * CMat::from_diagonal(&CVec::from_vec(vec![cr(2.0), cr(0.5)]));
        assert!((orthonormalize(&scaled) - &q).norm() < 1e-12);
    }
}

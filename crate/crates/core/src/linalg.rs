//! Dense kernels for the small per-point matrices carried by every field.
//!
//! Matrices are row-major `&[C64]` slices. Ranks in this crate are tiny
//! (1 to 4), so everything here is written for low overhead rather than
//! asymptotic speed; the Hermitian eigensolver defers to nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `out = a (m×k) · b (k×n)`.
pub fn mul_into(a: &[C64], b: &[C64], out: &mut [C64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for j in 0..n {
            let mut acc = ZERO;
            for l in 0..k {
                acc += a[i * k + l] * b[l * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

pub fn mul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    mul_into(a, b, &mut out, m, k, n);
    out
}

/// Square product, the common case.
pub fn mul_sq(a: &[C64], b: &[C64], r: usize) -> Vec<C64> {
    mul(a, b, r, r, r)
}

pub fn identity(r: usize) -> Vec<C64> {
    let mut m = vec![ZERO; r * r];
    for i in 0..r {
        m[i * r + i] = ONE;
    }
    m
}

/// Conjugate transpose of an `m×n` matrix.
pub fn adjoint(a: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j].conj();
        }
    }
    out
}

pub fn trace(a: &[C64], r: usize) -> C64 {
    (0..r).map(|i| a[i * r + i]).sum()
}

/// Frobenius norm squared.
pub fn frob2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Gauss–Jordan inverse with partial pivoting. `None` when singular.
pub fn inverse(a: &[C64], r: usize) -> Option<Vec<C64>> {
    match r {
        1 => {
            if a[0].norm() == 0.0 {
                None
            } else {
                Some(vec![ONE / a[0]])
            }
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det.norm() <= 1e-300 {
                return None;
            }
            let inv = ONE / det;
            Some(vec![a[3] * inv, -a[1] * inv, -a[2] * inv, a[0] * inv])
        }
        _ => {
            let mut m = a.to_vec();
            let mut inv = identity(r);
            for col in 0..r {
                let piv = (col..r)
                    .max_by(|&i, &j| m[i * r + col].norm().total_cmp(&m[j * r + col].norm()))
                    .unwrap();
                if m[piv * r + col].norm() <= 1e-300 {
                    return None;
                }
                if piv != col {
                    for j in 0..r {
                        m.swap(piv * r + j, col * r + j);
                        inv.swap(piv * r + j, col * r + j);
                    }
                }
                let d = ONE / m[col * r + col];
                for j in 0..r {
                    m[col * r + j] *= d;
                    inv[col * r + j] *= d;
                }
                for i in 0..r {
                    if i != col {
                        let f = m[i * r + col];
                        if f != ZERO {
                            for j in 0..r {
                                let mv = m[col * r + j];
                                let iv = inv[col * r + j];
                                m[i * r + j] -= f * mv;
                                inv[i * r + j] -= f * iv;
                            }
                        }
                    }
                }
            }
            Some(inv)
        }
    }
}

pub fn det(a: &[C64], r: usize) -> C64 {
    match r {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let mut m = a.to_vec();
            let mut d = ONE;
            for col in 0..r {
                let piv = (col..r)
                    .max_by(|&i, &j| m[i * r + col].norm().total_cmp(&m[j * r + col].norm()))
                    .unwrap();
                if m[piv * r + col].norm() == 0.0 {
                    return ZERO;
                }
                if piv != col {
                    for j in 0..r {
                        m.swap(piv * r + j, col * r + j);
                    }
                    d = -d;
                }
                let p = m[col * r + col];
                d *= p;
                for i in col + 1..r {
                    let f = m[i * r + col] / p;
                    for j in col..r {
                        let v = m[col * r + j];
                        m[i * r + j] -= f * v;
                    }
                }
            }
            d
        }
    }
}

/// `(a + a†)/2` in place.
pub fn hermitize(a: &mut [C64], r: usize) {
    for i in 0..r {
        a[i * r + i] = C64::new(a[i * r + i].re, 0.0);
        for j in i + 1..r {
            let avg = (a[i * r + j] + a[j * r + i].conj()) * 0.5;
            a[i * r + j] = avg;
            a[j * r + i] = avg.conj();
        }
    }
}

/// Largest deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &[C64], r: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            worst = worst.max((a[i * r + j] - a[j * r + i].conj()).norm());
        }
    }
    worst
}

/// True when the Hermitian matrix `a` admits a Cholesky factorization,
/// i.e. is positive definite.
pub fn is_positive_definite(a: &[C64], r: usize) -> bool {
    let mut l = vec![ZERO; r * r];
    for j in 0..r {
        let mut d = a[j * r + j].re;
        for k in 0..j {
            d -= l[j * r + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let dj = d.sqrt();
        l[j * r + j] = C64::new(dj, 0.0);
        for i in j + 1..r {
            let mut s = a[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k].conj();
            }
            l[i * r + j] = s / dj;
        }
    }
    true
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors stored as columns (row-major `r×r`).
pub fn herm_eig(a: &[C64], r: usize) -> (Vec<f64>, Vec<C64>) {
    if r == 1 {
        return (vec![a[0].re], vec![ONE]);
    }
    let m = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            C64::new(a[i * r + j].re, 0.0)
        } else if i < j {
            a[i * r + j]
        } else {
            a[j * r + i].conj()
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = vec![ZERO; r * r];
    for (c, &i) in order.iter().enumerate() {
        for row in 0..r {
            vecs[row * r + c] = eig.eigenvectors[(row, i)];
        }
    }
    (vals, vecs)
}

/// Eigenvalues only; closed form for rank ≤ 2.
pub fn herm_eigenvalues(a: &[C64], r: usize) -> Vec<f64> {
    match r {
        1 => vec![a[0].re],
        2 => {
            let p = a[0].re;
            let q = a[3].re;
            let off = a[1].norm_sqr().max(a[2].norm_sqr());
            let mean = 0.5 * (p + q);
            let half = (0.25 * (p - q) * (p - q) + off).sqrt();
            vec![mean - half, mean + half]
        }
        _ => herm_eig(a, r).0,
    }
}

pub fn herm_max_eig(a: &[C64], r: usize) -> f64 {
    *herm_eigenvalues(a, r).last().unwrap()
}

/// Spectral calculus `V diag(f(λ)) V†` on a Hermitian matrix.
pub fn herm_apply(a: &[C64], r: usize, f: impl Fn(f64) -> f64) -> Vec<C64> {
    let (vals, vecs) = herm_eig(a, r);
    from_spectrum(&vals.iter().map(|&l| f(l)).collect::<Vec<_>>(), &vecs, r)
}

/// Rebuilds `V diag(vals) V†`.
pub fn from_spectrum(vals: &[f64], vecs: &[C64], r: usize) -> Vec<C64> {
    let mut out = vec![ZERO; r * r];
    for i in 0..r {
        for j in 0..r {
            let mut acc = ZERO;
            for k in 0..r {
                acc += vecs[i * r + k] * vecs[j * r + k].conj() * vals[k];
            }
            out[i * r + j] = acc;
        }
    }
    out
}

/// Operator norm of a (not necessarily Hermitian) matrix via `A†A`.
pub fn op_norm(a: &[C64], r: usize) -> f64 {
    let ata = mul_sq(&adjoint(a, r, r), a, r);
    herm_max_eig(&ata, r).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inverse_roundtrip_rank3() {
        let a = vec![
            c(2.0, 0.0),
            c(0.5, 1.0),
            c(0.0, -0.3),
            c(0.1, 0.0),
            c(3.0, 0.2),
            c(1.0, 1.0),
            c(-1.0, 0.0),
            c(0.0, 0.5),
            c(1.5, 0.0),
        ];
        let inv = inverse(&a, 3).unwrap();
        let prod = mul_sq(&a, &inv, 3);
        let id = identity(3);
        for (p, q) in prod.iter().zip(&id) {
            assert!((p - q).norm() < 1e-12);
        }
        let d = det(&a, 3);
        let d_inv = det(&inv, 3);
        assert!((d * d_inv - ONE).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_closed_form_matches_nalgebra() {
        let a = vec![c(2.0, 0.0), c(0.3, -0.4), c(0.3, 0.4), c(-1.0, 0.0)];
        let closed = herm_eigenvalues(&a, 2);
        let (full, vecs) = herm_eig(&a, 2);
        for (x, y) in closed.iter().zip(&full) {
            assert!((x - y).abs() < 1e-12);
        }
        let back = from_spectrum(&full, &vecs, 2);
        for (p, q) in back.iter().zip(&a) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_detects_indefinite() {
        assert!(is_positive_definite(&[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)], 2));
        assert!(!is_positive_definite(&[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)], 2));
    }
}

//! Small dense symmetric-matrix helpers (row-major `d × d` slices).

use crate::prelude::*;
use nalgebra::DMatrix;

/// `m · v`.
pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum())
        .collect()
}

/// `aᵀ m b`.
pub fn quad_form(a: &[f64], m: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[i * d + j] * b[j];
        }
        s += a[i] * row;
    }
    s
}

/// Frobenius pairing `Σ_ij a_ij b_ij`.
pub fn frobenius(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues (ascending) and eigenvectors (columns, row-major) of a symmetric matrix.
pub fn sym_eigen(m: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mat = DMatrix::from_row_slice(d, d, m);
    let eig = mat.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = vec![0.0; d * d];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..d {
            vectors[row * d + col] = eig.eigenvectors[(row, k)];
        }
    }
    (values, vectors)
}

/// Symmetric square root of a PSD matrix; negative eigenvalues are clamped to 0.
pub fn psd_sqrt(m: &[f64], d: usize) -> Vec<f64> {
    if d == 2 {
        // Closed form for 2×2: sqrt(A) = (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
        let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
        let tr = a + c;
        let mut det = a * c - b * b;
        if det.abs() <= 1e-14 * tr * tr {
            det = 0.0;
        }
        if det >= 0.0 && tr >= 0.0 {
            let s = det.sqrt();
            let t = (tr + 2.0 * s).sqrt();
            if t == 0.0 {
                return vec![0.0; 4];
            }
            return vec![(a + s) / t, b / t, b / t, (c + s) / t];
        }
    }
    let (values, vectors) = sym_eigen(m, d);
    let top = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut out = vec![0.0; d * d];
    for (k, &lam) in values.iter().enumerate() {
        let r = if lam <= 1e-14 * top { 0.0 } else { lam.sqrt() };
        if r == 0.0 {
            continue;
        }
        for i in 0..d {
            let vi = vectors[i * d + k] * r;
            for j in 0..d {
                out[i * d + j] += vi * vectors[j * d + k];
            }
        }
    }
    out
}

/// Orthonormal basis of the tangent space `{v : Σ v = 0}` (Helmert vectors),
/// returned as `d - 1` vectors of length `d`.
pub fn tangent_basis(d: usize) -> Vec<Vec<f64>> {
    (1..d)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut v = vec![0.0; d];
            for item in v.iter_mut().take(k) {
                *item = 1.0 / norm;
            }
            v[k] = -(k as f64) / norm;
            v
        })
        .collect()
}

/// Largest eigenvalue of a symmetric matrix restricted to `{v : Σ v = 0}`.
pub fn tangent_max_eigenvalue(m: &[f64], d: usize) -> f64 {
    let basis = tangent_basis(d);
    let k = d - 1;
    let mut r = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let q = quad_form(&basis[a], m, &basis[b]);
            r[a * k + b] = q;
            r[b * k + a] = q;
        }
    }
    if k == 1 {
        return r[0];
    }
    let (values, _) = sym_eigen(&r, k);
    values[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(m: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| m[i * d + k] * m[k * d + j]).sum();
            }
        }
        out
    }

    #[test]
    fn sqrt_of_rank_one_2x2() {
        let m = [0.25, -0.25, -0.25, 0.25];
        let s = psd_sqrt(&m, 2);
        for (a, b) in square(&s, 2).iter().zip(&m) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sqrt_of_wright_fisher_3x3() {
        let x = [0.2, 0.3, 0.5];
        let mut m = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 3 + j] = x[i] * (if i == j { 1.0 } else { 0.0 } - x[j]);
            }
        }
        let s = psd_sqrt(&m, 3);
        for (a, b) in square(&s, 3).iter().zip(&m) {
            assert!((a - b).abs() < 1e-12);
        }
        let ones = mat_vec(&s, &[1.0, 1.0, 1.0]);
        assert!(ones.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn negative_eigenvalues_are_clamped() {
        let m = [1.0, 0.0, 0.0, -1.0];
        let s = psd_sqrt(&m, 2);
        assert!((s[0] - 1.0).abs() < 1e-14 && s[3].abs() < 1e-14);
    }

    #[test]
    fn tangent_eigenvalue_of_identity_is_one() {
        let mut m = vec![0.0; 16];
        for i in 0..4 {
            m[i * 4 + i] = 1.0;
        }
        assert!((tangent_max_eigenvalue(&m, 4) - 1.0).abs() < 1e-12);
        // all-ones direction is invisible to the tangent space
        let ones = vec![1.0; 16];
        assert!(tangent_max_eigenvalue(&ones, 4).abs() < 1e-12);
    }
}

//! Small dense linear algebra on `f64` slices.
//!
//! Matrices are square, row-major `Vec<f64>`. Everything here is sized for
//! ambient dimensions up to 16, so clarity wins over blocking or SIMD.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Sum of a slice by pairwise (tree) reduction in index order.
///
/// The grouping depends only on the length, so the result is the same bit
/// pattern no matter how the values were produced.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            tree_sum(&values[..mid]) + tree_sum(&values[mid..])
        }
    }
}

/// Volume of the unit ball in R^k.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / k as f64 * unit_ball_volume(k - 2),
    }
}

/// Surface area of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn mat_vec(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], x)).collect()
}

/// Frobenius norm of a square matrix.
pub fn frobenius(m: &[f64]) -> f64 {
    norm(m)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues sorted in descending order.
    pub values: Vec<f64>,
    /// Eigenvectors, `vectors[i]` pairs with `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigensolver for a symmetric `n x n` row-major matrix.
///
/// Rotations sweep the strict upper triangle row by row in a fixed order,
/// so identical input always produces identical output.
pub fn sym_eigen(matrix: &[f64], n: usize) -> SymEigen {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    let mut v = identity(n);
    let scale = frobenius(&a);
    if scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off.sqrt() <= 1e-17 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        a[r * n + p] = c * arp - s * arq;
                        a[r * n + q] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let apr = a[p * n + r];
                        let aqr = a[q * n + r];
                        a[p * n + r] = c * apr - s * aqr;
                        a[q * n + r] = s * apr + c * aqr;
                    }
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r * n + i]).collect())
        .collect();
    SymEigen { values, vectors }
}

/// Largest absolute eigenvalue of a symmetric matrix, i.e. its spectral norm.
pub fn sym_spectral_norm(matrix: &[f64], n: usize) -> f64 {
    sym_eigen(matrix, n)
        .values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Fails when a vector loses more than `1 - 1e-8` of its norm to the span of
/// its predecessors.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let original = norm(v);
        if original == 0.0 || !original.is_finite() {
            return Err(Error::DependentDirections { residual: 0.0 });
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let residual = norm(&w) / original;
        if residual < 1e-8 {
            return Err(Error::DependentDirections { residual });
        }
        let inv = 1.0 / norm(&w);
        w.iter_mut().for_each(|x| *x *= inv);
        basis.push(w);
    }
    Ok(basis)
}

/// Completes an orthonormal family to an orthonormal basis of R^n and returns
/// only the added vectors.
pub fn complement_basis(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut added = Vec::new();
    for e in 0..n {
        if all.len() == n {
            break;
        }
        let mut w = vec![0.0; n];
        w[e] = 1.0;
        for _ in 0..2 {
            for b in &all {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let len = norm(&w);
        if len > 1e-6 {
            w.iter_mut().for_each(|x| *x /= len);
            all.push(w.clone());
            added.push(w);
        }
    }
    added
}

/// Determinant of a small square matrix by partial-pivot elimination.
pub fn determinant(matrix: &[f64], n: usize) -> f64 {
    let mut a = matrix.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    det
}

/// Solves `A x = b` for a small square system; `None` if singular.
pub fn solve(matrix: &[f64], n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}

/// k-dimensional volume of the simplex spanned by `vertices` (k + 1 points).
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let k = vertices.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let edges: Vec<Vec<f64>> = vertices[1..].iter().map(|v| sub(v, vertices[0])).collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            gram[i * k + j] = dot(&edges[i], &edges[j]);
        }
    }
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    determinant(&gram, k).max(0.0).sqrt() / factorial
}

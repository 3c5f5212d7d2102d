//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigvals: Vec<f64>,
    /// Orthogonal matrix, column `q` pairs with `eigvals[q]`.
    pub eigvecs: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigvals));
        &self.eigvecs * d * self.eigvecs.transpose()
    }
}

/// Full decomposition of a symmetric matrix.
///
/// Uses cyclic Jacobi rotations with a relative off-diagonal threshold, which
/// keeps small eigenvalues accurate relative to their own size. Eigenvectors
/// are normalized so that their first non-negligible component is positive;
/// exact eigenvalue ties are ordered lexicographically by eigenvector.
pub fn eigh_sorted(w: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = w.nrows();
    if n != w.ncols() {
        return Err(Error::invalid(format!("eigh_sorted: matrix is {}x{}, not square", n, w.ncols())));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("eigh_sorted: non-finite entry"));
    }
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (w[(i, j)] - w[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "eigh_sorted: matrix not symmetric at ({i},{j}): {} vs {}",
                    w[(i, j)],
                    w[(j, i)]
                )));
            }
        }
    }

    // Row-major working copy, symmetrized.
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (w[(i, j)] + w[(j, i)]);
        }
    }
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = n <= 1;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        return Err(Error::NoConvergence { sweeps, off_norm: off });
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|q| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k * n + q]).collect();
            normalize_sign(&mut col);
            (a[q * n + q], col)
        })
        .collect();
    pairs.sort_by(|x, y| {
        x.0.total_cmp(&y.0).then_with(|| {
            x.1.iter()
                .zip(&y.1)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let eigvals = pairs.iter().map(|p| p.0).collect();
    let eigvecs = DMatrix::from_fn(n, n, |i, q| pairs[q].1[i]);
    Ok(SymmetricEigen { eigvals, eigvecs })
}

fn normalize_sign(col: &mut [f64]) {
    let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * max) {
        if *first < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

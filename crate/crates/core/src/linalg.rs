//! Small dense linear algebra: covariance estimation, positive-definiteness
//! checks, symmetric eigenvalues and quadratic minimization on the simplex.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::shape(format!(
                "{} values do not form a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Largest absolute asymmetry `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    /// Correlation matrix; fails on non-positive variances.
    pub fn correlation(&self) -> Result<Self> {
        let sd: Vec<f64> = self.diag().iter().map(|v| math::sqrt(*v)).collect();
        if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Numerical(format!(
                "asset {i} has non-positive variance"
            )));
        }
        let mut c = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                c[(i, j)] = if i == j {
                    1.0
                } else {
                    (self[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
                };
            }
        }
        Ok(c)
    }

    /// Lower Cholesky factor; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = math::sqrt(s);
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(l)
    }

    /// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.data.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum();
            let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
            if off <= 1e-30 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / math::sqrt(t * t + 1.0);
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
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Population (1/T) covariance of a row-major `T × n` block.
pub fn covariance(rows: &[f64], n: usize) -> Result<Matrix> {
    if n == 0 || !rows.len().is_multiple_of(n) || rows.len() / n < 2 {
        return Err(Error::shape(format!(
            "covariance needs at least 2 rows of {n} columns"
        )));
    }
    let t = rows.len() / n;
    let means = column_means(rows, n);
    let mut cov = Matrix::zeros(n);
    for row in rows.chunks_exact(n) {
        for i in 0..n {
            let di = row[i] - means[i];
            for j in i..n {
                cov.data[i * n + j] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov.data[i * n + j] / t as f64;
            cov.data[i * n + j] = v;
            cov.data[j * n + i] = v;
        }
    }
    Ok(cov)
}

pub fn column_means(rows: &[f64], n: usize) -> Vec<f64> {
    let t = rows.len() / n;
    let mut means = vec![0.0; n];
    for row in rows.chunks_exact(n) {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= t as f64);
    means
}

/// Euclidean projection onto `{w ≥ 0, Σw = 1}` (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Outcome of [`minimize_quadratic_on_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
}

/// Minimizes `½ wᵀQw + cᵀw` over the simplex by accelerated projected
/// gradient with adaptive restart. Stops when the gradient-mapping norm is
/// below `tol`.
pub fn minimize_quadratic_on_simplex(
    q: &Matrix,
    c: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SimplexSolution> {
    let n = q.dim();
    if c.len() != n || n == 0 {
        return Err(Error::shape("quadratic and linear terms disagree"));
    }
    let objective = |w: &[f64]| 0.5 * q.quad_form(w) + c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let grad = |w: &[f64]| -> Vec<f64> {
        q.mul_vec(w).iter().zip(c).map(|(a, b)| a + b).collect()
    };
    // Gershgorin bound on the largest eigenvalue
    let lipschitz = (0..n)
        .map(|i| q.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;

    let mut x = vec![1.0 / n as f64; n];
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut fx = objective(&x);
    for it in 0..max_iter {
        let gy = grad(&y);
        let x_next = project_to_simplex(
            &y.iter().zip(&gy).map(|(a, g)| a - step * g).collect::<Vec<_>>(),
        );
        let f_next = objective(&x_next);
        if f_next > fx + 1e-15 * fx.abs().max(1.0) && momentum > 1.0 {
            // restart momentum from the last accepted iterate
            y = x.clone();
            momentum = 1.0;
            continue;
        }
        let m_next = 0.5 * (1.0 + math::sqrt(1.0 + 4.0 * momentum * momentum));
        let beta = (momentum - 1.0) / m_next;
        y = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        x = x_next;
        fx = f_next;
        momentum = m_next;

        let gm = gradient_mapping_norm(&x, &grad(&x), step);
        if gm < tol {
            return Ok(SimplexSolution {
                weights: x,
                iterations: it + 1,
                gradient_mapping_norm: gm,
            });
        }
    }
    let gm = gradient_mapping_norm(&x, &grad(&x), step);
    Err(Error::Numerical(format!(
        "simplex solver did not converge in {max_iter} iterations \
         (gradient mapping {gm:e}); try more covariance shrinkage"
    )))
}

fn gradient_mapping_norm(x: &[f64], g: &[f64], step: f64) -> f64 {
    let p = project_to_simplex(&x.iter().zip(g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
    math::sqrt(x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()) / step
}

/// KKT residual of `w` for minimizing a function with gradient `g` on the
/// simplex: `max_i |min(w_i, g_i − min_j g_j)|` over the support, plus any
/// negative reduced cost.
pub fn simplex_kkt_residual(w: &[f64], g: &[f64]) -> f64 {
    // multiplier: smallest gradient among held assets
    let nu = w
        .iter()
        .zip(g)
        .filter(|(wi, _)| **wi > 0.0)
        .map(|(_, gi)| *gi)
        .fold(f64::INFINITY, f64::min);
    w.iter()
        .zip(g)
        .map(|(wi, gi)| {
            let reduced = gi - nu;
            if *wi > 0.0 {
                reduced.abs().min(*wi)
            } else {
                (-reduced).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_to_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn covariance_population() {
        let rows = [1.0, 2.0, 3.0, 6.0];
        let c = covariance(&rows, 2).unwrap();
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(1, 1)], 4.0);
        assert_eq!(c[(0, 1)], 2.0);
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        let m = Matrix::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = m.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        assert!(m.cholesky().is_some());
        let singular = Matrix::from_rows(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(singular.cholesky().is_none());
    }

    #[test]
    fn solver_diagonal_closed_form() {
        let q = Matrix::diagonal(&[0.08, 0.02]);
        let s = minimize_quadratic_on_simplex(&q.scaled(25.0), &[0.0, 0.0], 1e-10, 10_000).unwrap();
        assert!((s.weights[0] - 0.2).abs() < 1e-9);
        assert!((s.weights[1] - 0.8).abs() < 1e-9);
    }
}

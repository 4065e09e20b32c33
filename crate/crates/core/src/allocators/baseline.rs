//! Equal weight and the simplex-constrained variance solvers.

use alloc::format;
use alloc::vec;

use crate::linalg::{minimize_quadratic_on_simplex, Matrix, SimplexSolution};
use crate::losses::CovarianceEstimate;
use crate::{validate_weights, Error, Result, WeightVector};

/// Gradient-mapping tolerance of the GMV/MVP solver.
pub const SIMPLEX_TOLERANCE: f64 = 1e-10;
pub const SIMPLEX_MAX_ITER: usize = 10_000;

pub fn equal_weight(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::shape("equal weight over zero assets"));
    }
    validate_weights(&vec![1.0 / n as f64; n])
}

/// `N / tr(Σ)`, so the scaled matrix has unit average variance.
fn normalizer(sigma: &Matrix) -> Result<f64> {
    let tr = sigma.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Numerical(
            "covariance has non-positive trace; try more covariance shrinkage".into(),
        ));
    }
    Ok(sigma.dim() as f64 / tr)
}

fn require_pd(sigma: &Matrix) -> Result<()> {
    if sigma.cholesky().is_none() {
        return Err(Error::Numerical(
            "covariance is not positive definite; try more covariance shrinkage".into(),
        ));
    }
    Ok(())
}

pub(crate) fn gmv_solution(sigma: &Matrix) -> Result<SimplexSolution> {
    require_pd(sigma)?;
    let q = sigma.scaled(normalizer(sigma)?);
    minimize_quadratic_on_simplex(&q, &vec![0.0; q.dim()], SIMPLEX_TOLERANCE, SIMPLEX_MAX_ITER)
}

pub(crate) fn mvp_solution(mu: &[f64], sigma: &Matrix, risk_aversion: f64) -> Result<SimplexSolution> {
    if mu.len() != sigma.dim() {
        return Err(Error::shape(format!(
            "{} expected returns for {} assets",
            mu.len(),
            sigma.dim()
        )));
    }
    if !(risk_aversion > 0.0 && risk_aversion.is_finite()) {
        return Err(Error::Domain(format!("risk aversion {risk_aversion} must be > 0")));
    }
    require_pd(sigma)?;
    // minimize (γ/2)wᵀΣw − μᵀw, divided through by γ·tr(Σ)/N
    let s = normalizer(sigma)?;
    let q = sigma.scaled(s);
    let c: alloc::vec::Vec<f64> = mu.iter().map(|m| -m * s / risk_aversion).collect();
    minimize_quadratic_on_simplex(&q, &c, SIMPLEX_TOLERANCE, SIMPLEX_MAX_ITER)
}

/// Minimum-variance weights on the long-only simplex.
pub fn gmv_weights(sigma: &CovarianceEstimate) -> Result<WeightVector> {
    super::normalize(gmv_solution(sigma.matrix())?.weights)
}

/// Maximizes `μᵀw − (γ/2)·wᵀΣw` on the long-only simplex.
pub fn mvp_weights(mu: &[f64], sigma: &CovarianceEstimate, risk_aversion: f64) -> Result<WeightVector> {
    super::normalize(mvp_solution(mu, sigma.matrix(), risk_aversion)?.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::simplex_kkt_residual;
    use crate::losses::shrink_covariance;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn est(m: Matrix) -> CovarianceEstimate {
        shrink_covariance(&m, 0.0).unwrap()
    }

    /// Best point of a 0.001-resolution grid over the 3-simplex.
    fn grid_oracle(f: impl Fn(&[f64]) -> f64) -> [f64; 3] {
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=1000 {
            for j in 0..=(1000 - i) {
                let w = [i as f64 / 1000.0, j as f64 / 1000.0, (1000 - i - j) as f64 / 1000.0];
                let v = f(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        best.1
    }

    fn fixture(seed: u64) -> Matrix {
        // A·Aᵀ + 0.01·I from a deterministic A
        let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..9).map(|_| 0.4 * next()).collect();
        let mut m = Matrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = (0..3).map(|k| a[i * 3 + k] * a[j * 3 + k]).sum::<f64>()
                    + if i == j { 0.01 } else { 0.0 };
            }
        }
        m
    }

    #[test]
    fn equal_weight_examples() {
        assert_eq!(equal_weight(4).unwrap().weights(), &[0.25; 4]);
        assert_eq!(equal_weight(1).unwrap().weights(), &[1.0]);
        let s: f64 = equal_weight(50).unwrap().weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(matches!(equal_weight(0), Err(Error::Shape(_))));
    }

    #[test]
    fn gmv_diagonal_closed_form() {
        let w = gmv_weights(&est(Matrix::diagonal(&[0.04, 0.01]))).unwrap();
        assert!((w.weights()[0] - 0.2).abs() < 1e-9);
        assert!((w.weights()[1] - 0.8).abs() < 1e-9);
        let w = gmv_weights(&est(Matrix::diagonal(&[0.3; 5]))).unwrap();
        for x in w.weights() {
            assert!((x - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn gmv_and_mvp_match_grid_oracle() {
        for seed in 1..6 {
            let m = fixture(seed);
            let w = gmv_weights(&est(m.clone())).unwrap();
            let g = grid_oracle(|x| m.quad_form(x));
            for (a, b) in w.weights().iter().zip(g) {
                assert!((a - b).abs() < 0.005, "seed {seed}: {a} vs {b}");
            }

            let mu = [0.002, -0.001, 0.004];
            let gamma = 5.0;
            let w = mvp_weights(&mu, &est(m.clone()), gamma).unwrap();
            let g = grid_oracle(|x| {
                0.5 * gamma * m.quad_form(x) - mu.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            });
            for (a, b) in w.weights().iter().zip(g) {
                assert!((a - b).abs() < 0.005, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mvp_limits() {
        let m = fixture(7);
        let gmv = gmv_weights(&est(m.clone())).unwrap();
        let flat = mvp_weights(&[0.01; 3], &est(m.clone()), 2.0).unwrap();
        for (a, b) in gmv.weights().iter().zip(flat.weights()) {
            assert!((a - b).abs() < 1e-8);
        }
        let iso = est(Matrix::diagonal(&[0.04; 3]));
        let w = mvp_weights(&[0.05, 0.0, 0.0], &iso, 1e-6).unwrap();
        assert!(w.weights()[0] > 0.99);
        assert!(matches!(mvp_weights(&[0.0; 3], &iso, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn singular_covariance_is_numerical_error() {
        let m = Matrix::from_rows(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let err = gmv_weights(&est(m)).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref s) if s.contains("shrinkage")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn solver_terminates_at_kkt_point(seed in 0u64..100_000, shrink in 0.0f64..0.5) {
            let m = shrink_covariance(&fixture(seed), shrink).unwrap();
            let sol = gmv_solution(m.matrix()).unwrap();
            let q = m.matrix().scaled(3.0 / m.matrix().trace());
            let g = q.mul_vec(&sol.weights);
            prop_assert!(simplex_kkt_residual(&sol.weights, &g) < 1e-8);
            prop_assert!(validate_weights(&sol.weights).is_ok());
        }
    }
}

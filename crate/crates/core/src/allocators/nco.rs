//! Nested clustered optimization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::{gmv_solution, mvp_solution};
use super::hrp::correlation_distance;
use crate::linalg::Matrix;
use crate::{Error, Result, WeightVector};

/// Optimizer applied inside and across clusters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NcoObjective {
    #[default]
    MinVariance,
    MeanVariance { risk_aversion: f64 },
}

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 100;
/// Squared embedding distance below which two assets count as identical.
const DUPLICATE_SQ_DIST: f64 = 1e-14;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One k-means++ run; returns labels and inertia.
fn kmeans_once(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].to_vec()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .map(|d| if d < DUPLICATE_SQ_DIST { 0.0 } else { d })
            .collect();
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Clustering(format!(
                "only {} distinct assets for {k} clusters",
                centers.len()
            )));
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, d) in d2.iter().enumerate() {
            if *d > 0.0 && u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        centers.push(points[pick].to_vec());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&&[f64]> = points.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                return Err(Error::Clustering(format!("cluster {c} became empty")));
            }
            for (j, x) in center.iter_mut().enumerate() {
                *x = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, l)| sq_dist(p, &centers[*l])).sum();
    Ok((labels, inertia))
}

/// Clusters of asset indices, each sorted, ordered by smallest member.
pub(crate) fn kmeans_clusters(embedding: &Matrix, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = embedding.dim();
    if k == 0 || k > n {
        return Err(Error::Clustering(format!("{k} clusters for {n} assets")));
    }
    let points: Vec<&[f64]> = (0..n).map(|i| embedding.row(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (labels, inertia) = kmeans_once(&points, k, &mut rng)?;
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((labels, inertia));
        }
    }
    let labels = best.expect("at least one restart").0;
    let mut clusters: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..n).filter(|i| labels[*i] == c).collect())
        .collect();
    if clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::Clustering("empty cluster after assignment".into()));
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

fn solve(mu: &[f64], cov: &Matrix, objective: NcoObjective) -> Result<Vec<f64>> {
    Ok(match objective {
        NcoObjective::MinVariance => gmv_solution(cov)?.weights,
        NcoObjective::MeanVariance { risk_aversion } => mvp_solution(mu, cov, risk_aversion)?.weights,
    })
}

/// Intra-cluster optimal weights composed with inter-cluster optimal
/// weights on the reduced covariance.
pub fn nco_weights(
    mu: &[f64],
    cov: &Matrix,
    n_clusters: usize,
    objective: NcoObjective,
    seed: u64,
) -> Result<WeightVector> {
    let n = cov.dim();
    if n < 2 {
        return Err(Error::shape(format!("NCO needs at least 2 assets, got {n}")));
    }
    if mu.len() != n {
        return Err(Error::shape(format!("{} expected returns for {n} assets", mu.len())));
    }
    let clusters = kmeans_clusters(&correlation_distance(cov)?, n_clusters, seed)?;
    let k = clusters.len();

    // intra[c] holds full-length weights supported on cluster c
    let mut intra: Vec<Vec<f64>> = Vec::with_capacity(k);
    for members in &clusters {
        let sub_mu: Vec<f64> = members.iter().map(|i| mu[*i]).collect();
        let w = solve(&sub_mu, &cov.submatrix(members), objective)?;
        let mut full = vec![0.0; n];
        for (i, wi) in members.iter().zip(w) {
            full[*i] = wi;
        }
        intra.push(full);
    }
    let mut reduced = Matrix::zeros(k);
    for a in 0..k {
        let sa = cov.mul_vec(&intra[a]);
        for b in 0..k {
            reduced[(a, b)] = intra[b].iter().zip(&sa).map(|(x, y)| x * y).sum();
        }
    }
    // exact symmetry for the solver
    for a in 0..k {
        for b in 0..a {
            let v = 0.5 * (reduced[(a, b)] + reduced[(b, a)]);
            reduced[(a, b)] = v;
            reduced[(b, a)] = v;
        }
    }
    let reduced_mu: Vec<f64> = intra
        .iter()
        .map(|w| w.iter().zip(mu).map(|(a, b)| a * b).sum())
        .collect();
    let inter = solve(&reduced_mu, &reduced, objective)?;

    let mut w = vec![0.0; n];
    for (c, members) in clusters.iter().enumerate() {
        for i in members {
            w[*i] = intra[c][*i] * inter[c];
        }
    }
    super::normalize(w)
}

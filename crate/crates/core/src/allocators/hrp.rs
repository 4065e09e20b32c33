//! Hierarchical risk parity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math;
use crate::{Error, Result, WeightVector};

/// Inter-cluster distance used by the agglomerative clustering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Single,
    Complete,
    Average,
}

const PSD_TOLERANCE: f64 = 1e-10;

struct Node {
    members: Vec<usize>,
    children: Option<(usize, usize)>,
}

/// `d = sqrt((1 − ρ)/2)` from a covariance matrix.
pub(crate) fn correlation_distance(cov: &Matrix) -> Result<Matrix> {
    let corr = cov.correlation()?;
    let n = corr.dim();
    let mut d = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] = math::sqrt(((1.0 - corr[(i, j)]) / 2.0).max(0.0));
        }
    }
    Ok(d)
}

fn linkage_distance(d: &Matrix, a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|i| b.iter().map(move |j| d[(*i, *j)]));
    match linkage {
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(f64::NEG_INFINITY, f64::max),
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
    }
}

/// Builds the dendrogram; returns nodes with the root last.
fn cluster(d: &Matrix, linkage: Linkage) -> Vec<Node> {
    let n = d.dim();
    let mut nodes: Vec<Node> = (0..n)
        .map(|i| Node { members: vec![i], children: None })
        .collect();
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let dist = linkage_distance(d, &nodes[a].members, &nodes[b].members, linkage);
                // ties: the pair whose smallest members are lexicographically lowest
                let key = |p: (usize, usize)| {
                    let (ma, mb) = (nodes[p.0].members[0], nodes[p.1].members[0]);
                    (ma.min(mb), ma.max(mb))
                };
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => match dist.total_cmp(&bd) {
                        Ordering::Less => true,
                        Ordering::Equal => key((a, b)) < key((ba, bb)),
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some((dist, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two active clusters");
        let mut members = [nodes[a].members.as_slice(), nodes[b].members.as_slice()].concat();
        members.sort_unstable();
        nodes.push(Node { members, children: Some((a, b)) });
        active.retain(|x| *x != a && *x != b);
        active.push(nodes.len() - 1);
    }
    nodes
}

/// Variance of the inverse-variance portfolio on `members`.
fn cluster_variance(cov: &Matrix, members: &[usize]) -> f64 {
    let inv: Vec<f64> = members.iter().map(|i| 1.0 / cov[(*i, *i)]).collect();
    let total: f64 = inv.iter().sum();
    let w: Vec<f64> = inv.iter().map(|x| x / total).collect();
    cov.submatrix(members).quad_form(&w)
}

/// Leaf order of the dendrogram. Of two siblings, the one with the lower
/// cluster variance comes first; equal variances fall back to the lower
/// original asset index.
fn quasi_diagonal(nodes: &[Node], root: usize, cov: &Matrix, out: &mut Vec<usize>) {
    match nodes[root].children {
        None => out.push(nodes[root].members[0]),
        Some((a, b)) => {
            let va = cluster_variance(cov, &nodes[a].members);
            let vb = cluster_variance(cov, &nodes[b].members);
            let a_first = match va.total_cmp(&vb) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => nodes[a].members[0] < nodes[b].members[0],
            };
            let (first, second) = if a_first { (a, b) } else { (b, a) };
            quasi_diagonal(nodes, first, cov, out);
            quasi_diagonal(nodes, second, cov, out);
        }
    }
}

fn check_psd(cov: &Matrix) -> Result<()> {
    if cov.asymmetry() > PSD_TOLERANCE {
        return Err(Error::Numerical("covariance is not symmetric".into()));
    }
    let scale = cov.trace().abs().max(1.0);
    let min_ev = cov.symmetric_eigenvalues().first().copied().unwrap_or(0.0);
    if min_ev < -PSD_TOLERANCE * scale {
        return Err(Error::Numerical(format!(
            "covariance is not positive semi-definite (smallest eigenvalue {min_ev:e})"
        )));
    }
    Ok(())
}

/// Hierarchical risk parity weights from a sample covariance.
pub fn hrp_weights(sample_cov: &Matrix, linkage: Linkage) -> Result<WeightVector> {
    let n = sample_cov.dim();
    if n < 2 {
        return Err(Error::shape(format!("HRP needs at least 2 assets, got {n}")));
    }
    check_psd(sample_cov)?;
    let d = correlation_distance(sample_cov)?;
    let nodes = cluster(&d, linkage);
    let mut order = Vec::with_capacity(n);
    quasi_diagonal(&nodes, nodes.len() - 1, sample_cov, &mut order);

    let mut w = vec![1.0; n];
    let mut pending = vec![order];
    while let Some(c) = pending.pop() {
        if c.len() < 2 {
            continue;
        }
        let (left, right) = c.split_at(c.len() / 2);
        let (vl, vr) = (cluster_variance(sample_cov, left), cluster_variance(sample_cov, right));
        let alpha = 1.0 - vl / (vl + vr);
        left.iter().for_each(|i| w[*i] *= alpha);
        right.iter().for_each(|i| w[*i] *= 1.0 - alpha);
        pending.push(right.to_vec());
        pending.push(left.to_vec());
    }
    super::normalize(w)
}

//! Non-dominated selection on two higher-is-better axes.

use alloc::vec::Vec;

fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Indices (ascending) of the points no other point dominates. Points are
/// `(sharpe, cvar)` with CVaR as a signed return, so less negative is
/// better on both axes.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|i| !points.iter().any(|p| dominates(*p, points[*i])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(pareto_frontier(&[(0.1, -1.0)]), vec![0]);
        assert_eq!(pareto_frontier(&[(0.3, -2.8), (0.2, -3.0)]), vec![0]);
        assert_eq!(pareto_frontier(&[(0.3, -3.0), (0.2, -2.5)]), vec![0, 1]);
        assert_eq!(pareto_frontier(&[(0.2, -2.0), (0.2, -2.0)]), vec![0, 1]);
        assert!(pareto_frontier(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn frontier_properties(pts in proptest::collection::vec((-1.0f64..1.0, -5.0f64..0.0), 1..30)) {
            let f = pareto_frontier(&pts);
            prop_assert!(!f.is_empty());
            for i in &f {
                for j in &f {
                    prop_assert!(!dominates(pts[*i], pts[*j]));
                }
            }
            let best_x = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let best_y = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(f.iter().any(|i| pts[*i].0 == best_x));
            prop_assert!(f.iter().any(|i| pts[*i].1 == best_y));
        }
    }
}

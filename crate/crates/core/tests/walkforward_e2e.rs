use chrono::{Duration, NaiveDate};
use folio_core::allocators::{AllocatorKind, AllocatorSpec, TrainedAllocator};
use folio_core::walkforward::{apply_cost_first_day, run_walkforward, transaction_cost, turnover, WalkForwardPlan};
use folio_core::{validate_weights, FeaturePanel, ReturnsPanel, SpreadPanel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Calendar-day panel with one trending asset, returns as features.
fn panel(n: usize, t: usize, seed: u64) -> (ReturnsPanel, SpreadPanel, FeaturePanel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let dates: Vec<NaiveDate> = (0..t).map(|i| start + Duration::days(i as i64)).collect();
    let tickers: Vec<String> = (0..n).map(|j| format!("A{j}")).collect();
    let returns: Vec<f64> = (0..t * n)
        .map(|k| if k % n == 0 { 0.001 } else { 0.0 } + rng.random_range(-0.02..0.02))
        .collect();
    let spreads: Vec<f64> = (0..t * n).map(|_| rng.random_range(0.0005..0.002)).collect();
    let names: Vec<String> = tickers.iter().map(|s| format!("ret_{s}")).collect();
    (
        ReturnsPanel::new(dates.clone(), tickers.clone(), returns.clone()).unwrap(),
        SpreadPanel::new(dates.clone(), tickers, spreads).unwrap(),
        FeaturePanel::new(dates, names, returns).unwrap(),
    )
}

#[test]
fn every_allocator_completes_the_protocol() {
    let (r, s, f) = panel(5, 400, 1);
    let plan = WalkForwardPlan { t_in: 10, t_out: 30, k: 3, ..WalkForwardPlan::default() };
    let kinds = [
        AllocatorKind::EqualWeight,
        AllocatorKind::Gmv,
        AllocatorKind::Mvp,
        AllocatorKind::Hrp,
        AllocatorKind::Nco,
        AllocatorKind::TrainableLinear,
        AllocatorKind::TrainableRecurrent,
    ];
    for kind in kinds {
        let mut spec = AllocatorSpec::trainable(kind, 3);
        spec.training.epochs = 2;
        spec.training.hidden_size = 4;
        let b = run_walkforward(&spec, &f, &r, &s, &plan).unwrap();
        assert_eq!(b.net.len(), 90, "{}", kind.name());
        assert_eq!(b.net.dates(), &r.dates()[310..]);
        assert_eq!(b.steps.len(), 3);
        for st in &b.steps {
            let sum: f64 = st.weights.weights().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9 && st.weights.weights().iter().all(|w| *w >= 0.0));
            assert!(st.cost >= 0.0);
            assert_eq!(st.weights.tickers(), r.tickers());
        }
        // Reruns are bit-identical.
        assert_eq!(run_walkforward(&spec, &f, &r, &s, &plan).unwrap(), b, "{}", kind.name());
    }
}

#[test]
fn misaligned_panels_are_rejected() {
    let (r, s, f) = panel(3, 200, 2);
    let short = SpreadPanel::new(s.dates()[1..].to_vec(), s.tickers().to_vec(), s.values()[3..].to_vec()).unwrap();
    let plan = WalkForwardPlan { t_in: 5, t_out: 20, k: 2, ..WalkForwardPlan::default() };
    let err = run_walkforward(&AllocatorSpec::new(AllocatorKind::EqualWeight), &f, &r, &short, &plan).unwrap_err();
    assert!(err.to_string().contains("2020-01-01"), "{err}");
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.001f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn cost_is_bounded_by_the_widest_spread(
        (a, b, spreads) in (2usize..8).prop_flat_map(|n| (simplex(n), simplex(n), proptest::collection::vec(0.0f64..0.05, n)))
    ) {
        let wa = validate_weights(&a).unwrap();
        let wb = validate_weights(&b).unwrap();
        let delta = turnover(&wb, Some(&wa)).unwrap();
        let cost = transaction_cost(&delta, &spreads).unwrap();
        let widest = spreads.iter().cloned().fold(0.0, f64::max);
        prop_assert!(cost >= 0.0);
        prop_assert!(cost <= widest + 1e-15);
        prop_assert_eq!(transaction_cost(&turnover(&wa, Some(&wa)).unwrap(), &spreads).unwrap(), 0.0);
    }

    #[test]
    fn cost_only_touches_the_first_day(
        gross in proptest::collection::vec(-0.1f64..0.1, 1..50),
        cost in 0.0f64..0.01,
    ) {
        let net = apply_cost_first_day(&gross, cost).unwrap();
        prop_assert_eq!(&net[1..], &gross[1..]);
        prop_assert!((net[0] - ((1.0 + gross[0]) * (1.0 - cost) - 1.0)).abs() <= 1e-15);
    }

    #[test]
    fn untrained_models_emit_simplex_weights(
        seed in 0u64..1000,
        recurrent in any::<bool>(),
        window in proptest::collection::vec(-5.0f64..5.0, 12),
    ) {
        let kind = if recurrent { AllocatorKind::TrainableRecurrent } else { AllocatorKind::TrainableLinear };
        let mut spec = AllocatorSpec::trainable(kind, seed);
        spec.training.hidden_size = 3;
        let m = TrainedAllocator::initialize(&spec, 4, 3, 4).unwrap();
        let w = m.predict_weights(&window).unwrap();
        prop_assert!((w.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.weights().iter().all(|x| *x > 0.0));
    }
}

//! Statistical checks of the gossip oracle against direct simulation.

use gossip_core::oracle::{gossip_mean_map, gossip_round};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn one_round_mean_matches_mean_map() {
    let n = 100_000u64;
    let runs = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for y in [1u64, 1_000, 5_000, 20_000, 50_000, 90_000] {
        let next: Vec<f64> = (0..runs)
            .map(|_| gossip_round(y, n, &mut rng) as f64)
            .collect();
        let mean = next.iter().sum::<f64>() / runs as f64;
        let var = next.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        let expected = gossip_mean_map(y as f64, n as f64).unwrap();
        // Targets exclude the sender, which lifts the mean above G(y) by
        // at most y / (n - 1).
        let tol = 3.0 * se + y as f64 / (n - 1) as f64;
        assert!(
            (mean - expected).abs() <= tol,
            "y = {y}: mean {mean}, G(y) = {expected}, se {se}"
        );
    }
}

fn y_in(n: f64) -> impl Strategy<Value = f64> {
    (0.0..=1.0f64).prop_map(move |u| 1.0 + u * (n - 1.0))
}

proptest! {
    #[test]
    fn mean_map_range_and_bounds(n in prop::sample::select(vec![10.0, 1e3, 1e6]), u in 0.0..=1.0f64) {
        let y = 1.0 + u * (n - 1.0);
        let g = gossip_mean_map(y, n).unwrap();
        let tol = 1e-9 * n;
        prop_assert!(g >= 2.0 - 1.0 / n - tol && g <= n + tol);
        prop_assert!(g + tol >= 2.0 * y * (1.0 - y / n));
        prop_assert!(n - g <= (n - y) * (-y / n).exp() + tol);
    }

    #[test]
    fn mean_map_monotone_and_lipschitz(a in y_in(1e3), b in y_in(1e3)) {
        let n = 1e3;
        let (ga, gb) = (gossip_mean_map(a, n).unwrap(), gossip_mean_map(b, n).unwrap());
        if a < b {
            prop_assert!(ga < gb);
        }
        prop_assert!((ga - gb).abs() <= 2.0 * (a - b).abs() * (1.0 + 1e-9));
    }
}

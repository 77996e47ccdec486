mod common;

use common::{grid_best, grid_best_symmetric};
use tfqss_core::*;

fn oc() -> OptimizerConfig {
    OptimizerConfig::default()
}

#[test]
fn symmetric_channel_needs_no_asymmetry() {
    let sp = SecurityParams::default();
    for l in [20.0, 75.0, 120.0] {
        let ch = ChannelParams::with_lengths(l, l);
        let free = optimize_rate(&ch, &sp, &oc()).unwrap();
        let sym = optimize_rate(&ch, &sp, &oc().symmetric()).unwrap();
        assert_eq!(sym.best_mu_a, sym.best_mu_b);
        assert!(
            ((free.best_rate - sym.best_rate) / free.best_rate).abs() < 1e-2,
            "l {l}"
        );
        let (oracle, _) = grid_best_symmetric(&ch, &sp, 2_000, 1e-4, 0.499);
        assert!(sym.best_rate >= oracle * (1.0 - 1e-2));
    }
}

#[test]
fn asymmetric_channel_beats_brute_force_grid() {
    let sp = SecurityParams::default();
    let ch = ChannelParams::with_total(100.0, 50.0);
    let r = optimize_rate(&ch, &sp, &oc()).unwrap();
    let (oracle, a, b) = grid_best(&ch, &sp, 200, 1e-4, 0.499);
    assert!(oracle > 0.0);
    assert!(
        r.best_rate >= oracle * (1.0 - 1e-2),
        "{} vs {oracle} at ({a}, {b})",
        r.best_rate
    );
}

#[test]
fn constraint_never_helps() {
    let sp = SecurityParams::default();
    for (total, delta) in [(60.0, 10.0), (120.0, 14.0), (80.0, 30.0), (200.0, 5.0)] {
        let ch = ChannelParams::with_total(total, delta);
        let free = optimize_rate(&ch, &sp, &oc()).unwrap();
        let sym = optimize_rate(&ch, &sp, &oc().symmetric()).unwrap();
        assert!(
            sym.best_rate <= free.best_rate * (1.0 + 1e-6),
            "L {total} delta {delta}"
        );
    }
}

#[test]
fn sweep_points_map_to_channel_lengths() {
    let sp = SecurityParams::default();
    let grid = distance_grid(20.0, 40.0, 10.0).unwrap();
    let sweep = sweep_distance(&ChannelParams::default(), 14.0, &grid, &sp, &oc()).unwrap();
    assert!(sweep.skipped.is_empty());
    assert_eq!(sweep.rows.len(), 3);
    for row in &sweep.rows {
        assert_eq!(row.channel.l_a, (row.total_km - 14.0) / 2.0);
        assert_eq!(row.channel.l_b, (row.total_km + 14.0) / 2.0);
    }
    let short = sweep_distance(&ChannelParams::default(), 14.0, &[10.0, 20.0], &sp, &oc()).unwrap();
    assert_eq!(short.rows.len(), 1);
    assert_eq!(short.skipped.len(), 1);
    assert_eq!(short.skipped[0].0, 10.0);
}

#[test]
fn single_point_sweep_equals_direct_optimization() {
    let sp = SecurityParams::default();
    let sweep = sweep_distance(&ChannelParams::default(), 10.0, &[90.0], &sp, &oc()).unwrap();
    let direct = optimize_rate(&ChannelParams::with_total(90.0, 10.0), &sp, &oc()).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    assert_eq!(sweep.rows[0].result, direct);
}

#[test]
fn top_finite_size_curve_decays_with_distance() {
    let sp = SecurityParams::default();
    let grid = distance_grid(20.0, 400.0, 20.0).unwrap();
    let sweep = sweep_distance(&ChannelParams::default(), 0.0, &grid, &sp, &oc()).unwrap();
    let rates: Vec<f64> = sweep.rows.iter().map(|r| r.result.best_rate).collect();
    assert!(rates[0] > 0.0 && rates[1] > 0.0);
    for w in rates.windows(2) {
        assert!(w[1] <= w[0], "{rates:?}");
    }
    assert!(rates.last().unwrap() < &(rates[0] * 1e-3));
}

#[test]
fn no_offset_no_gain() {
    let sp = SecurityParams::default();
    let grid = distance_grid(20.0, 300.0, 40.0).unwrap();
    let cmp = compare_protocols(&ChannelParams::default(), 0.0, &grid, &sp, &oc()).unwrap();
    assert!(cmp.ratios.iter().any(|(_, r)| r.is_some()));
    for &(l, r) in &cmp.ratios {
        if let Some(r) = r {
            assert!((r - 1.0).abs() <= 0.05, "L {l}: ratio {r}");
        }
    }
}

#[test]
fn large_offset_kills_the_baseline() {
    let sp = SecurityParams::default();
    let grid = distance_grid(50.0, 400.0, 10.0).unwrap();
    let cmp = compare_protocols(&ChannelParams::default(), 50.0, &grid, &sp, &oc()).unwrap();
    assert!(cmp.baseline.rows.iter().all(|r| r.result.best_rate == 0.0));
    assert!(cmp.asymmetric.rows.iter().any(|r| r.result.best_rate > 0.0));
    assert!(cmp.max_ratio.is_none());
}

#[test]
fn optimizer_is_deterministic() {
    let sp = SecurityParams::default();
    let ch = ChannelParams::with_total(150.0, 14.0);
    assert_eq!(
        optimize_rate(&ch, &sp, &oc()).unwrap(),
        optimize_rate(&ch, &sp, &oc()).unwrap()
    );
    let other = OptimizerConfig {
        rng_seed: 12345,
        ..oc()
    };
    let r = optimize_rate(&ch, &sp, &other).unwrap();
    assert!(r.best_mu_a >= other.mu_bounds.0 && r.best_mu_a <= other.mu_bounds.1);
}

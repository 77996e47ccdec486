use tfqss_core::*;

fn nominal(seed: u64, n_slots: u64) -> SimConfig {
    SimConfig::new(
        ChannelParams::with_lengths(50.0, 50.0),
        SourceParams::symmetric(0.05).unwrap(),
        n_slots,
        seed,
    )
}

#[test]
fn nominal_point_matches_closed_form() {
    let rep = empirical_vs_analytic(&nominal(7, 10_000_000), DEFAULT_SIGMA_THRESHOLD).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(!rep.wide_interval);
}

#[test]
fn vacuum_source_sees_only_dark_counts() {
    let ch = ChannelParams {
        p_d: 1e-3,
        ..ChannelParams::with_lengths(50.0, 50.0)
    };
    let cfg = SimConfig::new(
        ch,
        SourceParams {
            mu_a: 0.0,
            mu_b: 0.0,
        },
        2_000_000,
        3,
    );
    let rep = empirical_vs_analytic(&cfg, 4.0).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!((rep.analytic.q_mu - (2e-3 - 1e-6)).abs() < 1e-15);
    assert_eq!(rep.analytic.e_mu, 0.5);
}

#[test]
fn mismatched_intensities_raise_the_error_rate() {
    let matched = empirical_vs_analytic(&nominal(11, 4_000_000), 4.0).unwrap();
    let cfg = SimConfig {
        source: SourceParams::new(0.2, 0.05).unwrap(),
        ..nominal(11, 4_000_000)
    };
    let mismatched = empirical_vs_analytic(&cfg, 4.0).unwrap();
    assert!(matched.pass && mismatched.pass);
    let gap = mismatched.sim.e_emp - matched.sim.e_emp;
    let sigma = (matched.sim.stderr_e.powi(2) + mismatched.sim.stderr_e.powi(2)).sqrt();
    assert!(gap > 10.0 * sigma, "gap {gap}, sigma {sigma}");
}

#[test]
fn short_runs_are_flagged_not_failed() {
    let rep = empirical_vs_analytic(&nominal(1, 1_000), 4.0).unwrap();
    assert!(rep.wide_interval);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = SimConfig {
        chunk_size: 10_000,
        ..nominal(99, 500_000)
    };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_detailed(&cfg).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_detailed(&cfg).unwrap());
    assert_eq!(serial.result, parallel.result);
    assert_eq!(serial.detections, parallel.detections);
}

#[test]
fn click_counts_are_conserved() {
    let run = run_detailed(&nominal(5, 1_000_000)).unwrap();
    let t = run.result.tally;
    assert_eq!(t.n_click, t.n_lone_d1 + t.n_lone_d2 + t.n_double);
    assert_eq!(t.n_click as usize, run.detections.len());
    let recorded_errors = run.detections.iter().filter(|d| d.is_error()).count();
    assert_eq!(recorded_errors as u64, t.n_error);
}

#[test]
fn clean_lone_clicks_follow_the_xor_rule() {
    // Without dark counts and with matched arrivals the dark port never
    // fires, so every lone click is in the constructive port.
    let ch = ChannelParams {
        p_d: 0.0,
        ..ChannelParams::with_lengths(50.0, 50.0)
    };
    let cfg = SimConfig::new(ch, SourceParams::symmetric(0.05).unwrap(), 2_000_000, 21);
    let run = run_detailed(&cfg).unwrap();
    let clean: Vec<_> = run
        .detections
        .iter()
        .filter(|d| d.kind != ClickKind::Double && !d.misaligned)
        .collect();
    assert!(clean.len() > 1_000);
    for d in clean {
        assert_eq!(charlie_bit(d.recorded, d.slot), d.charlie);
        assert_eq!(d.charlie, d.alice ^ d.bob, "{d:?}");
    }
}

#[test]
fn ideal_protocol_has_no_xor_violations() {
    let ch = ChannelParams {
        p_d: 0.0,
        e_d: 0.0,
        ..ChannelParams::with_lengths(20.0, 20.0)
    };
    let cfg = SimConfig::new(ch, SourceParams::symmetric(0.01).unwrap(), 1_000_000, 4);
    let run = run_detailed(&cfg).unwrap();
    let doubles = run
        .detections
        .iter()
        .filter(|d| d.kind == ClickKind::Double)
        .count();
    let v = sift_and_xor_check(
        &run.alice_bits(),
        &run.bob_bits(),
        &run.charlie_bits(),
        &run.detected_slots(),
    )
    .unwrap();
    if doubles == 0 {
        assert_eq!(v, 0);
    } else {
        assert!(v <= doubles);
    }
    assert!(run.result.tally.n_click > 0);
}

#[test]
fn nominal_violation_rate_matches_qber() {
    let run = run_detailed(&nominal(8, 10_000_000)).unwrap();
    let v = sift_and_xor_check(
        &run.alice_bits(),
        &run.bob_bits(),
        &run.charlie_bits(),
        &run.detected_slots(),
    )
    .unwrap();
    let n = run.detections.len() as f64;
    let e = analytic_point(&nominal(8, 1).channel, &nominal(8, 1).source)
        .unwrap()
        .e_mu;
    let sigma = (e * (1.0 - e) / n).sqrt();
    assert!((v as f64 / n - e).abs() <= 4.0 * sigma);
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(matches!(
        sift_and_xor_check(&[true, false], &[true], &[false, false], &[0, 1]),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn same_seed_same_result() {
    let a = run_simulation(&nominal(42, 300_000)).unwrap();
    let b = run_simulation(&nominal(42, 300_000)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, run_simulation(&nominal(43, 300_000)).unwrap());
}

#[test]
fn inflated_eps_small_sample_exceeds() {
    let cfg = SimConfig {
        source: SourceParams::new(0.2, 0.05).unwrap(),
        ..nominal(1, 1)
    };
    let plan = SamplingPlan {
        n_detected: 1_000,
        k_test: 10,
        eps_rs: 0.5,
        repeats: 10_000,
    };
    let rep = qber_sampling_experiment(&cfg, &plan).unwrap();
    assert!(rep.exceedances > 0, "{rep:?}");
    assert_eq!(rep.repeats, 10_000);
}

#[test]
fn fully_tested_sample_never_exceeds() {
    let plan = SamplingPlan {
        n_detected: 500,
        k_test: 500,
        eps_rs: 0.5,
        repeats: 2_000,
    };
    let rep = qber_sampling_experiment(&nominal(2, 1), &plan).unwrap();
    assert_eq!(rep.exceedances, 0);
}

#[test]
fn sampling_report_is_deterministic() {
    let plan = SamplingPlan {
        n_detected: 2_000,
        k_test: 200,
        eps_rs: 1e-3,
        repeats: 500,
    };
    let a = qber_sampling_experiment(&nominal(3, 1), &plan).unwrap();
    let b = qber_sampling_experiment(&nominal(3, 1), &plan).unwrap();
    assert_eq!(a, b);
    assert!((a.mean_sample_error - a.mean_remainder_error).abs() < 0.01);
}

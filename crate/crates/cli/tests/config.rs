use tfqss_cli::*;

const RATE_DOC: &str = "mode = \"rate\"\nl_a = 50\nl_b = 50\nmu_a = 0.05\nmu_b = 0.05\n";

#[test]
fn defaults_fill_an_explicit_rate_document() {
    let cfg = parse_config(RATE_DOC).unwrap();
    assert_eq!(cfg.mode, Mode::Rate);
    assert_eq!(cfg.l_a, Some(50.0));
    assert_eq!(
        (cfg.eta_d, cfg.p_d, cfg.alpha, cfg.f_e),
        (0.55, 1e-8, 0.165, 1.15)
    );
    assert_eq!(
        [cfg.eps_rs, cfg.eps_bar, cfg.eps_ec, cfg.eps_pa],
        [1e-10; 4]
    );
    assert_eq!(cfg.e_d, 0.02);
    assert_eq!(cfg.test_fraction, 0.1);
}

#[test]
fn out_of_range_values_name_their_key() {
    for (key, bad) in [
        ("eta_d", "1.5"),
        ("mu_a", "1.2"),
        ("e_d", "0.7"),
        ("eps_pa", "0"),
        ("test_fraction", "1"),
    ] {
        let doc = format!("{RATE_DOC}{key} = {bad}\n").replace(&format!("{key} = 0.05\n"), "");
        let err = format!("{:#}", parse_config(&doc).unwrap_err());
        assert!(err.contains(key), "{key}: {err}");
    }
}

#[test]
fn unknown_and_mistyped_keys_are_rejected() {
    let err = format!(
        "{:#}",
        parse_config(&format!("{RATE_DOC}eta = 0.5\n")).unwrap_err()
    );
    assert!(err.contains("eta"), "{err}");
    let err = format!(
        "{:#}",
        parse_config(&format!("{RATE_DOC}n_slots = \"many\"\n")).unwrap_err()
    );
    assert!(err.contains("n_slots"), "{err}");
    assert!(parse_config("mode = ").is_err());
}

#[test]
fn modes_demand_their_keys() {
    let err = format!(
        "{:#}",
        parse_config("mode = \"rate\"\nl_a = 1\nl_b = 1\nmu_a = 0.1\n").unwrap_err()
    );
    assert!(err.contains("mu_b"), "{err}");
    let err = format!(
        "{:#}",
        parse_config("mode = \"optimize\"\nl_a = 1\n").unwrap_err()
    );
    assert!(err.contains("l_b"), "{err}");
    assert!(parse_config("mode = \"sweep\"\n").is_ok());
    assert!(parse_config("l_a = 1\n")
        .unwrap_err()
        .to_string()
        .contains("mode"));
}

#[test]
fn serialization_is_a_normal_form() {
    for doc in [
        RATE_DOC.to_string(),
        "mode = \"compare\"\ndelta_km = 14\nl_step = 5\nn_pulses = 1e10\n".to_string(),
        "mode = \"simulate\"\nl_a = 3.25\nl_b = 0\nmu_a = 0.1\nmu_b = 0.3\nn_slots = 1000\nrng_seed = 9\np_d = 1.5e-7\n".into(),
    ] {
        let cfg = parse_config(&doc).unwrap();
        let normal = serialize(&cfg).unwrap();
        assert_eq!(parse_config(&normal).unwrap(), cfg);
        assert_eq!(serialize(&parse_config(&normal).unwrap()).unwrap(), normal);
    }
}

#[test]
fn later_layers_win_and_origins_are_tracked() {
    let file = Layer::parse(RATE_DOC, Origin::ConfigFile).unwrap();
    let mut cli = Layer::new(Origin::CommandLine);
    cli.set("e_d", 0.03);
    let r = resolve(&[file, cli]).unwrap();
    assert_eq!(r.config.e_d, 0.03);
    assert_eq!(r.origins["e_d"], Origin::CommandLine);
    assert_eq!(r.origins["mu_a"], Origin::ConfigFile);
    assert_eq!(r.origins["eta_d"], Origin::PublishedDefault);
    assert_eq!(r.origins["n_slots"], Origin::DesignDefault);
    let text = r.annotated().unwrap();
    for line in text.lines() {
        assert!(line.contains('#'), "{line}");
    }
    assert!(text.contains("published"));
    assert!(text.contains("design choice"));
    // The annotated dump is itself a valid scenario.
    assert_eq!(parse_config(&text).unwrap(), r.config);
}

#[test]
fn presets_match_their_figures() {
    let resolve_all = |name: &str| -> Vec<ScenarioConfig> {
        preset(name)
            .unwrap()
            .into_iter()
            .map(|p| resolve(&[p.layer]).unwrap().config)
            .collect()
    };
    let fig3 = resolve_all("fig3");
    assert_eq!(
        fig3.iter().map(|c| c.n_pulses).collect::<Vec<_>>(),
        [1e8, 1e10, 1e12]
    );
    assert!(fig3
        .iter()
        .all(|c| c.delta_km == 0.0 && c.mode == Mode::Sweep));
    let fig4 = resolve_all("fig4");
    assert_eq!(
        fig4.iter().map(|c| c.delta_km).collect::<Vec<_>>(),
        [10.0, 50.0, 100.0]
    );
    assert!(fig4
        .iter()
        .all(|c| c.n_pulses == 1e12 && c.mode == Mode::Sweep));
    let fig5 = resolve_all("fig5");
    assert_eq!(
        fig5.iter().map(|c| c.delta_km).collect::<Vec<_>>(),
        [10.0, 14.0]
    );
    assert!(fig5
        .iter()
        .all(|c| c.n_pulses == 1e12 && c.mode == Mode::Compare && c.l_min == c.delta_km));
    let err = preset("fig6").unwrap_err().to_string();
    assert!(PRESETS.iter().all(|p| err.contains(p)), "{err}");
}

#[test]
fn compare_outputs_sit_next_to_the_requested_path() {
    let (a, b) = compare_paths(std::path::Path::new("out/run.csv"));
    assert_eq!(a, std::path::Path::new("out/run_asymmetric.csv"));
    assert_eq!(b, std::path::Path::new("out/run_baseline.csv"));
}

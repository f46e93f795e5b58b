use wealthlab::config::{parse_config, RunConfig};
use wealthlab::experiments::{run, ExperimentReport, Status};
use wealthlab::inference::mean_and_stderr;

fn config(json: &str) -> RunConfig {
    parse_config(json).unwrap()
}

fn intervention(tax: f64, gamma_gov: f64) -> ExperimentReport {
    run(&config(&format!(
        r#"{{"experiment": "intervention", "engine": "exchange", "n_agents": 2000, "seed": 5,
            "replicas": 10, "burn_in": 20000, "steps": 20000, "stride": 1000,
            "exchange": {{"gamma": 0.9}},
            "channel": {{"tax_rate": {tax}, "gamma_gov": {gamma_gov}}}}}"#
    )))
    .unwrap()
}

#[test]
fn stationary_kesten_conserves_e_over_ten_thousand_strides() {
    let r = run(&config(
        r#"{"experiment": "conservation", "engine": "kesten", "n_agents": 1000, "seed": 11,
            "replicas": 20, "burn_in": 2000, "steps": 10000, "stride": 1, "negative_control": false,
            "kesten": {"alpha_target": 2.0}, "conserved": {"denominator": "lambda"}}"#,
    ))
    .unwrap();
    let v = r.verdict("conservation").unwrap();
    assert_eq!(v.status, Status::Pass, "{v:?}");
    assert_eq!(r.trajectories.len(), 10_001);
}

#[test]
fn negative_control_reports_drift() {
    let r = run(&config(
        r#"{"experiment": "conservation", "engine": "kesten", "n_agents": 2000, "seed": 3,
            "replicas": 4, "burn_in": 500, "steps": 200, "stride": 1,
            "kesten": {"alpha_target": 2.0}, "conserved": {"denominator": "lambda"}}"#,
    ))
    .unwrap();
    let v = r.verdict("negative_control_detects_drift").unwrap();
    assert!(v.note.contains("mean drift per stride"));
    assert_eq!(v.tolerance, Some(3.0));
}

#[test]
fn every_verdict_states_replicas_and_tolerance() {
    let r = intervention(0.4, 0.2);
    for v in &r.verdicts {
        assert_eq!(v.replicas, 10, "{v:?}");
        assert!(v.tolerance.is_some(), "{v:?}");
    }
    let steps: Vec<u64> = r.trajectories.iter().map(|p| p.step).collect();
    assert!(steps.windows(2).all(|w| w[1] - w[0] == 1000));
}

#[test]
fn zero_tax_treatment_equals_control() {
    let r = intervention(0.0, 0.0);
    for key in ["delta_e_s", "delta_alpha_s", "delta_gini_s"] {
        assert!(r.values(key).iter().all(|&d| d == 0.0), "{key}");
    }
    assert_eq!(r.verdict("null_intervention").unwrap().status, Status::Pass);
}

#[test]
fn intervention_is_monotone_in_tax_and_government_perfection() {
    let taxes = [0.0, 0.2, 0.4];
    let gammas = [0.2, 0.1, 0.0];
    let mut alpha = [[(0.0, 0.0); 3]; 3];
    let mut delta_e = [[(0.0, 0.0); 3]; 3];
    for (i, &t) in taxes.iter().enumerate() {
        for (j, &g) in gammas.iter().enumerate() {
            let r = intervention(t, g);
            alpha[i][j] = mean_and_stderr(&r.values("alpha_s_treatment"));
            delta_e[i][j] = mean_and_stderr(&r.values("delta_e_s"));
        }
    }
    let within = |next: (f64, f64), prev: (f64, f64)| next.0 <= prev.0 + 2.0 * (next.1.powi(2) + prev.1.powi(2)).sqrt();
    for i in 0..3 {
        for j in 0..3 {
            if i + 1 < 3 {
                assert!(within(alpha[i + 1][j], alpha[i][j]), "alpha_S rose with tax at ({i},{j}): {alpha:?}");
                assert!(within(delta_e[i + 1][j], delta_e[i][j]), "dE_S rose with tax at ({i},{j}): {delta_e:?}");
            }
            if j + 1 < 3 {
                assert!(within(alpha[i][j + 1], alpha[i][j]), "alpha_S rose as gamma_gov fell at ({i},{j}): {alpha:?}");
            }
        }
    }
}

#[test]
fn stronger_coupling_thermalizes_faster() {
    let gaps: Vec<f64> = [1, 10, 100]
        .iter()
        .map(|c| {
            let r = run(&config(&format!(
                r#"{{"experiment": "thermalization", "engine": "exchange", "n_agents": 2000, "seed": 8,
                    "replicas": 4, "burn_in": 50000, "steps": 50000, "stride": 1000,
                    "thermalization": {{"alpha_a": 2.0, "alpha_b": 1.2, "coupling": {c}}}}}"#
            )))
            .unwrap();
            mean_and_stderr(&r.values("final_gap")).0
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn identical_configs_give_identical_reports() {
    for text in [
        r#"{"experiment": "baseline", "engine": "exchange", "n_agents": 500, "seed": 1, "replicas": 3, "steps": 5000, "stride": 100}"#,
        r#"{"experiment": "intervention", "engine": "exchange", "n_agents": 500, "seed": 1, "replicas": 3, "burn_in": 2000, "steps": 2000, "stride": 100}"#,
    ] {
        let a = run(&config(text)).unwrap();
        let b = run(&config(text)).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn seeds_are_listed_per_replica() {
    let r = run(&config(
        r#"{"experiment": "baseline", "engine": "kesten", "n_agents": 300, "seed": 100, "replicas": 4, "burn_in": 50, "steps": 100, "stride": 50}"#,
    ))
    .unwrap();
    assert_eq!(r.seeds, vec![100, 101, 102, 103]);
    let seeds: Vec<u64> = r.replicas.iter().map(|s| s.seed).collect();
    assert_eq!(seeds, r.seeds);
}

#[test]
fn channel_stricter_than_market_is_rejected() {
    let err = parse_config(
        r#"{"experiment": "intervention", "engine": "exchange", "n_agents": 100, "seed": 1,
            "exchange": {"gamma": 0.5}, "channel": {"gamma_gov": 0.7}}"#,
    )
    .unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("channel.gamma_gov"));
}

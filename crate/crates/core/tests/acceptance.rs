//! Acceptance criteria. Prints one line per criterion and exits non-zero
//! when a criterion fails that is not listed in `KNOWN_RED`.
//!
//! Supplementary lines (prefixed `S`) report checks that sit next to a
//! criterion without being one.

use std::process::ExitCode;
use std::time::Instant;

use wealthlab::config::{parse_config, RunConfig};
use wealthlab::dynamics::{exchange_step, Economy, ExchangeParams};
use wealthlab::experiments::{run, ExperimentReport, Status};
use wealthlab::inference::mean_and_stderr;
use wealthlab::model::{gini, uniform_agents};
use wealthlab::netgen::WeightedNetwork;
use wealthlab::output::{read_summary, write_report, TIMESERIES_FILE};
use wealthlab::rng::{pareto_sample, seeded};

/// Criteria that fail by construction; see the project notes for the
/// analysis of each.
const KNOWN_RED: &[&str] = &["C5", "C7", "S1", "S2", "S3", "S4"];

const SEED: u64 = 42;

struct Line {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn config(json: &str) -> RunConfig {
    parse_config(json).unwrap_or_else(|e| panic!("bad acceptance config: {e}\n{json}"))
}

fn status(report: &ExperimentReport, verdict: &str) -> (bool, String) {
    match report.verdict(verdict) {
        Some(v) => (
            v.status == Status::Pass,
            format!("{verdict} {}/{} (need {})", v.passes, v.replicas, v.required),
        ),
        None => (false, format!("{verdict} missing")),
    }
}

fn c1_worked_example() -> Line {
    let clock = Instant::now();
    let mut net = WeightedNetwork::empty(2);
    net.add_edge(0, 1).unwrap();
    let agents = uniform_agents(2, 100.0);
    let mut econ = Economy::with_agents(net, agents, 100.0).unwrap();
    let lambda0 = econ.accounts.lambda;
    let params = ExchangeParams::new(1.0, 0.01).unwrap();
    let out = exchange_step(&mut econ, &params, &mut seeded(SEED)).unwrap();
    let d_omega = out.d_omega / 100.0;
    let growth = (econ.accounts.lambda - lambda0) / lambda0;
    let secs = clock.elapsed().as_secs_f64();
    Line {
        id: "C1",
        name: "worked single perfect exchange",
        pass: d_omega == 0.01 && growth == 0.5 * d_omega && secs < 1.0,
        detail: format!("dOmega/Omega = {d_omega}, mean-wealth growth = {growth}, {secs:.3}s"),
    }
}

fn c2_pareto_emergence() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.2, 1.5, 1.8, 2.0] {
        let clock = Instant::now();
        let report = run(&config(&format!(
            r#"{{"experiment": "baseline", "engine": "kesten", "n_agents": 100000, "seed": {SEED},
                "replicas": 10, "burn_in": 1000, "steps": 100, "stride": 100,
                "kesten": {{"alpha_target": {alpha}, "sigma": 0.1}}}}"#
        )))
        .unwrap();
        let secs = clock.elapsed().as_secs_f64();
        let (a, a_note) = status(&report, "alpha_recovery");
        let (k, k_note) = status(&report, "ks_fit");
        let hats: Vec<String> = report.values("alpha_hat").iter().map(|x| format!("{x:.3}")).collect();
        pass &= a && k && secs <= 300.0;
        parts.push(format!("alpha {alpha}: {a_note}, {k_note}, hats [{}], {secs:.0}s", hats.join(" ")));
    }
    Line {
        id: "C2",
        name: "Pareto emergence from the multiplicative engine",
        pass,
        detail: parts.join("; "),
    }
}

fn conservation_report() -> ExperimentReport {
    run(&config(&format!(
        r#"{{"experiment": "conservation", "engine": "kesten", "n_agents": 10000, "seed": {SEED},
            "replicas": 20, "burn_in": 2000, "steps": 1000, "stride": 1,
            "kesten": {{"alpha_target": 2.0, "sigma": 0.1}},
            "conserved": {{"denominator": "lambda"}}}}"#
    )))
    .unwrap()
}

fn c3_conservation(report: &ExperimentReport) -> Line {
    let (c, c_note) = status(report, "conservation");
    let (n, n_note) = status(report, "negative_control_detects_drift");
    Line {
        id: "C3",
        name: "conservation of E (total-wealth normalizer)",
        pass: c && n,
        detail: format!("{c_note}; {n_note}"),
    }
}

fn s3_conservation_omega(report: &ExperimentReport) -> Line {
    let (c, note) = status(report, "conservation_alt_omega");
    Line {
        id: "S3",
        name: "conservation of E (gross-product normalizer)",
        pass: c,
        detail: note,
    }
}

fn intervention(tax: f64, gamma_gov: f64) -> ExperimentReport {
    run(&config(&format!(
        r#"{{"experiment": "intervention", "engine": "exchange", "n_agents": 10000, "seed": {SEED},
            "replicas": 10, "burn_in": 100000, "steps": 100000, "stride": 1000,
            "exchange": {{"gamma": 0.9}},
            "channel": {{"tax_rate": {tax}, "gamma_gov": {gamma_gov}}}}}"#
    )))
    .unwrap()
}

const GRID: [(f64, f64); 4] = [(0.2, 0.0), (0.2, 0.2), (0.4, 0.0), (0.4, 0.2)];

fn c4_intervention(grid: &[ExperimentReport], null: &ExperimentReport, secs: f64) -> Line {
    let mut pass = secs <= 600.0;
    let mut parts = Vec::new();
    for ((tax, gg), r) in GRID.iter().zip(grid) {
        let (e, e_note) = status(r, "e_s_direction");
        let (a, a_note) = status(r, "alpha_degradation");
        pass &= e && a;
        parts.push(format!("tax {tax} gamma_gov {gg}: {e_note}, {a_note}"));
    }
    let (z, z_note) = status(null, "null_intervention");
    pass &= z;
    parts.push(format!("tax 0: {z_note}"));
    parts.push(format!("{secs:.0}s"));
    Line {
        id: "C4",
        name: "subsystem intervention lowers E_S and alpha_S",
        pass,
        detail: parts.join("; "),
    }
}

fn s4_equally_perfect_government() -> Line {
    let r = intervention(0.4, 0.9);
    let mut pass = true;
    let mut parts = Vec::new();
    for key in ["delta_e_s", "delta_alpha_s", "delta_gini_s"] {
        let (m, se) = mean_and_stderr(&r.values(key));
        pass &= m.abs() <= 2.0 * se;
        parts.push(format!("{key} {m:+.4} +- {se:.4}"));
    }
    Line {
        id: "S4",
        name: "government as perfect as the market leaves S unchanged",
        pass,
        detail: parts.join(", "),
    }
}

fn gini_gap(alpha: f64) -> f64 {
    let xs = pareto_sample(&mut seeded(SEED), 1_000_000, alpha, 1.0);
    gini(&xs).unwrap() - 1.0 / (2.0 * alpha - 1.0)
}

fn c5_equality(grid: &[ExperimentReport]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.5, 2.0] {
        let gap = gini_gap(alpha);
        pass &= gap.abs() <= 0.01;
        parts.push(format!("alpha {alpha}: gini - 1/(2a-1) = {gap:+.4}"));
    }
    for ((tax, gg), r) in GRID.iter().zip(grid) {
        let (g, note) = status(r, "equality_degradation");
        pass &= g;
        let d = r.values("delta_gini_s");
        let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
        parts.push(format!("tax {tax} gamma_gov {gg}: {note}, mean dGini_S {mean:+.4}"));
    }
    Line {
        id: "C5",
        name: "equality: Gini oracle and Gini_S rises under intervention",
        pass,
        detail: parts.join("; "),
    }
}

fn s1_gini_heavy_tail() -> Line {
    let gap = gini_gap(1.2);
    Line {
        id: "S1",
        name: "Gini oracle at alpha 1.2, n = 10^6",
        pass: gap.abs() <= 0.01,
        detail: format!("gini - 1/(2a-1) = {gap:+.4}"),
    }
}

fn c6_thermalization() -> Line {
    let report = run(&config(&format!(
        r#"{{"experiment": "thermalization", "engine": "exchange", "n_agents": 10000, "seed": {SEED},
            "replicas": 10, "burn_in": 100000, "steps": 200000, "stride": 1000,
            "thermalization": {{"alpha_a": 2.0, "alpha_b": 1.2, "coupling": 1}}}}"#
    )))
    .unwrap();
    let (p, note) = status(&report, "intermediacy");
    let joint: Vec<String> = report.values("alpha_union_final").iter().map(|x| format!("{x:.3}")).collect();
    Line {
        id: "C6",
        name: "thermalization of two joined economies",
        pass: p,
        detail: format!("{note}, joint alpha [{}]", joint.join(" ")),
    }
}

fn flow_report(gamma: f64) -> ExperimentReport {
    run(&config(&format!(
        r#"{{"experiment": "baseline", "engine": "exchange", "n_agents": 10000, "seed": {SEED},
            "replicas": 10, "burn_in": 200000, "steps": 200000, "stride": 1000,
            "exchange": {{"gamma": {gamma}}}}}"#
    )))
    .unwrap()
}

fn c7_flows(reports: &[(f64, ExperimentReport)]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (gamma, r) in reports {
        let (p, note) = status(r, "flow_alpha_recovery");
        pass &= p;
        let a = r.values("flow_alpha");
        let mean = a.iter().sum::<f64>() / a.len().max(1) as f64;
        parts.push(format!("gamma {gamma}: {note}, mean flow alpha {mean:.3}"));
    }
    Line {
        id: "C7",
        name: "flow regression recovers 1 + gamma",
        pass,
        detail: parts.join("; "),
    }
}

fn s2_perfect_exchange_gini(reports: &[(f64, ExperimentReport)]) -> Line {
    let r = &reports.iter().find(|(g, _)| *g == 1.0).expect("gamma 1 run").1;
    let (p, note) = status(r, "gini_pareto_band");
    let g = r.values("gini_global");
    let mean = g.iter().sum::<f64>() / g.len().max(1) as f64;
    Line {
        id: "S2",
        name: "perfect-exchange Gini in [0.30, 0.37]",
        pass: p,
        detail: format!("{note}, mean Gini {mean:.3}"),
    }
}

fn c8_determinism() -> Line {
    let configs = [
        r#"{"experiment": "baseline", "engine": "kesten", "n_agents": 2000, "seed": 7, "replicas": 3, "burn_in": 200, "steps": 500, "stride": 50}"#,
        r#"{"experiment": "baseline", "engine": "exchange", "n_agents": 1000, "seed": 7, "replicas": 3, "steps": 20000, "stride": 500}"#,
        r#"{"experiment": "conservation", "engine": "kesten", "n_agents": 1000, "seed": 7, "replicas": 3, "burn_in": 200, "steps": 100, "stride": 1}"#,
        r#"{"experiment": "intervention", "engine": "exchange", "n_agents": 1000, "seed": 7, "replicas": 3, "burn_in": 5000, "steps": 5000, "stride": 500}"#,
        r#"{"experiment": "thermalization", "engine": "exchange", "n_agents": 1000, "seed": 7, "replicas": 3, "burn_in": 5000, "steps": 10000, "stride": 500}"#,
    ];
    let mut pass = true;
    let mut mismatches = Vec::new();
    for text in configs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let cfg = config(text);
            let dir = tempfile::tempdir().unwrap();
            let mut report = run(&cfg).unwrap();
            write_report(&cfg, &mut report, dir.path(), None).unwrap();
            let csv = std::fs::read(dir.path().join(TIMESERIES_FILE)).unwrap();
            let summary = read_summary(&dir.path().join("summary.json")).unwrap();
            outputs.push((csv, cfg.digest(), summary.digest()));
        }
        if outputs[0] != outputs[1] {
            pass = false;
            mismatches.push(config(text).experiment);
        }
    }
    Line {
        id: "C8",
        name: "determinism of CSV output and digests",
        pass,
        detail: if mismatches.is_empty() {
            format!("{} configs byte-identical across two runs", configs.len())
        } else {
            format!("mismatch in {mismatches:?}")
        },
    }
}

fn report(line: &Line, unexpected: &mut Vec<&'static str>) {
    let tag = if line.pass { "PASS" } else { "FAIL" };
    let known = !line.pass && KNOWN_RED.contains(&line.id);
    println!(
        "{tag} {} {}{}: {}",
        line.id,
        line.name,
        if known { " [known]" } else { "" },
        line.detail
    );
    if !line.pass && !known {
        unexpected.push(line.id);
    }
}

fn main() -> ExitCode {
    // honour the test harness's filter argument loosely: `--list` prints nothing
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut unexpected = Vec::new();
    report(&c1_worked_example(), &mut unexpected);
    report(&c2_pareto_emergence(), &mut unexpected);
    let cons = conservation_report();
    report(&c3_conservation(&cons), &mut unexpected);
    let clock = Instant::now();
    let grid: Vec<ExperimentReport> = GRID.iter().map(|&(t, g)| intervention(t, g)).collect();
    let null = intervention(0.0, 0.0);
    let secs = clock.elapsed().as_secs_f64();
    report(&c4_intervention(&grid, &null, secs), &mut unexpected);
    report(&c5_equality(&grid), &mut unexpected);
    report(&c6_thermalization(), &mut unexpected);
    let flows: Vec<(f64, ExperimentReport)> = [0.25, 0.5, 0.75, 1.0].into_iter().map(|g| (g, flow_report(g))).collect();
    report(&c7_flows(&flows), &mut unexpected);
    report(&c8_determinism(), &mut unexpected);
    report(&s1_gini_heavy_tail(), &mut unexpected);
    report(&s2_perfect_exchange_gini(&flows), &mut unexpected);
    report(&s3_conservation_omega(&cons), &mut unexpected);
    report(&s4_equally_perfect_government(), &mut unexpected);
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}

//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! console; exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use subcover::cli;
use subcover::config::RunConfig;
use subcover::model::{JumpLaw, SubordinatorSpec};
use subcover::potential::{potential_best, potential_mc, potential_series};
use subcover::simulate::Engine;
use subcover::verify::{
    run_cor2, run_indices, run_lemma3, run_lemma4, run_lemma5, run_potential_table, run_q_identity, run_theorem1,
    Cor2Params, IndicesParams, Lemma3Params, Lemma4Params, Lemma5Params, PotentialTableParams,
    QIdentityParams, Theorem1Params,
};
use subcover::{count_covering_renewal, RngStream};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn cp_fixed() -> SubordinatorSpec {
    SubordinatorSpec::compound_poisson(1.0, JumpLaw::Fixed { size: 1.0 }, 1.0)
}

fn drift_oracle() -> Outcome {
    let spec = SubordinatorSpec::drift_only(1.0);
    let mut rng = RngStream::new(1, 0).rng();
    let n = count_covering_renewal(&spec, 1.0, 0.1, Engine::Events { epsilon: 0.0, compensate: true }, &mut rng)
        .unwrap()
        .renewals;
    let u = potential_best(&spec, 0.1).unwrap();
    let r = run_theorem1(&spec, &Theorem1Params::new(1.0, vec![0.1], 100), 1).unwrap();
    let row = &r.rows[0];
    let ok = n == 10
        && (u.value - 0.1).abs() < 1e-15
        && row.value == 1.0
        && row.extra["variance"] == 0.0
        && r.headlines[0].contains("mean U·N = 1.000000, exact");
    outcome(
        ok,
        format!("N = {n}, U = {}, mean U·N = {}, variance {}", u.value, row.value, row.extra["variance"]),
    )
}

fn closed_form_passage() -> Outcome {
    let spec = cp_fixed();
    let exact = 1.0 - (-0.5f64).exp();
    let mc = potential_mc(
        &spec,
        0.5,
        100_000,
        Engine::Events { epsilon: 0.0, compensate: true },
        &RngStream::new(2, 0),
    )
    .unwrap();
    let series = potential_series(&spec, &[0.5], 0.5 / 2000.0, 1e-12 * 0.5).unwrap().remove(0);
    let mc_ok = (mc.value - exact).abs() <= 3.0 * mc.stderr;
    let series_ok = (series.value - exact).abs() <= 1e-6 + series.stderr;
    outcome(
        mc_ok && series_ok,
        format!(
            "exact {exact:.6}; Monte Carlo {:.6} ± {:.6}; series {:.9} (|diff| {:.1e})",
            mc.value,
            mc.stderr,
            series.value,
            (series.value - exact).abs()
        ),
    )
}

fn theorem1_stable() -> Outcome {
    let p = Theorem1Params::new(1.0, vec![1e-2, 1e-3, 1e-4], 1000);
    let r = run_theorem1(&SubordinatorSpec::stable(0.5), &p, 3).unwrap();
    let last = r.rows.last().unwrap();
    outcome(
        r.passed(),
        format!(
            "mean U·N at δ=1e-4: {:.4} ± {:.4}; trends: deviation {}, variance {}",
            last.value,
            last.stderr.unwrap(),
            r.verdict("deviation-trend").unwrap().passed,
            r.verdict("variance-trend").unwrap().passed
        ),
    )
}

fn cor2_gamma() -> Outcome {
    let p = Cor2Params {
        tolerance: 0.15,
        ..Cor2Params::new(1.0, vec![1e-2, 1e-4, 1e-6], 1000)
    };
    let r = run_cor2(&SubordinatorSpec::gamma(1.0, 1.0), &p, 4).unwrap();
    let ratios: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.value)).collect();
    outcome(r.passed(), format!("N/(a ln(1/δ)) at δ = 1e-2, 1e-4, 1e-6: {}", ratios.join(", ")))
}

fn indices_stable() -> Outcome {
    let cases: [(f64, i32); 3] = [(0.3, 4), (0.5, 3), (0.7, 2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, top) in cases {
        let deltas: Vec<f64> = (top..=top + 4).map(|k| 10f64.powi(-k)).collect();
        let r = run_indices(&SubordinatorSpec::stable(alpha), &IndicesParams::new(1.0, deltas, 1000), 5).unwrap();
        let slope = r.rows.iter().find(|row| row.label == "slope").unwrap().value;
        ok &= r.passed() && (slope - alpha).abs() <= 0.05;
        parts.push(format!("α={alpha}: slope {slope:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn lemma4_tail() -> Outcome {
    let a = run_lemma4(&SubordinatorSpec::stable(0.5), &Lemma4Params::new(1.0, 1e-2, 100_000), 6).unwrap();
    let b = run_lemma4(&cp_fixed(), &Lemma4Params::new(1.0, 0.5, 100_000), 6).unwrap();
    outcome(
        a.passed() && b.passed(),
        format!(
            "stable(0.5) δ=1e-2: {}; compound Poisson + drift δ=0.5: {}",
            a.verdict("zero-violations").unwrap().detail,
            b.verdict("zero-violations").unwrap().detail
        ),
    )
}

fn potential_band() -> Outcome {
    let families = [
        SubordinatorSpec::drift_only(1.0),
        SubordinatorSpec::stable(0.3),
        SubordinatorSpec::stable(0.5),
        SubordinatorSpec::stable(0.7),
        SubordinatorSpec::gamma(1.0, 1.0),
        SubordinatorSpec::gamma(2.0, 0.5).with_drift(0.5),
        SubordinatorSpec::inverse_gaussian(1.0, 1.0),
        cp_fixed(),
        SubordinatorSpec::compound_poisson(2.0, JumpLaw::Exponential { rate: 3.0 }, 0.5),
    ];
    let deltas: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let mut ok = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for spec in &families {
        let p = PotentialTableParams {
            mc_replicas: 0,
            ..PotentialTableParams::new(deltas.clone())
        };
        let r = run_potential_table(spec, &p, 7).unwrap();
        ok &= r.verdict("band").unwrap().passed;
        for row in &r.rows {
            lo = lo.min(row.extra["U_phi"]);
            hi = hi.max(row.extra["U_phi"]);
        }
    }
    outcome(
        ok,
        format!("{} families × 6 δ: U·Φ(1/δ) ∈ [{lo:.4}, {hi:.4}] ⊂ [0.418, 2.71829]", families.len()),
    )
}

fn q_identity() -> Outcome {
    let p = QIdentityParams::new(0.1, vec![0.5, 1.0, 2.0], 10_000);
    let r = run_q_identity(&SubordinatorSpec::gamma(1.0, 1.0), &p, 8).unwrap();
    let lines: Vec<String> = r
        .rows
        .chunks(2)
        .map(|w| format!("q={}: {:.5} vs {:.5}", w[0].x.unwrap(), w[0].value, w[1].value))
        .collect();
    outcome(r.verdict("estimates-agree").unwrap().passed, lines.join("; "))
}

fn lemma3_splitting() -> Outcome {
    let spec = SubordinatorSpec::compound_poisson(3.0, JumpLaw::Exponential { rate: 4.0 }, 1.0);
    let p = Lemma3Params::new(1.0, vec![0.2, 0.05, 0.01], vec![2, 4, 8], 1000);
    let r = run_lemma3(&spec, &p, 9).unwrap();
    outcome(r.passed(), r.verdict("defect-bound").unwrap().detail.clone())
}

fn lemma5_variance() -> Outcome {
    let deltas = vec![1e-2, 1e-3, 1e-4, 1e-5];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in [("stable(0.5)", SubordinatorSpec::stable(0.5)), ("gamma(1,1)", SubordinatorSpec::gamma(1.0, 1.0))] {
        let r = run_lemma5(&spec, &Lemma5Params::new(1.0, deltas.clone(), 2000), 10).unwrap();
        ok &= r.passed();
        let vals: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.value)).collect();
        parts.push(format!("{name}: {}", vals.join(", ")));
    }
    outcome(ok, parts.join("; "))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "theorem1"
seed = 11
replicas = 300
deltas = [1e-2, 1e-3]
[spec]
family = "stable"
alpha = 0.5
"#;
    let cfg = RunConfig::parse(text, None).unwrap();
    let mut reports = Vec::new();
    for workers in [1, 3, 8] {
        let out = dir.path().join(format!("w{workers}"));
        cli::run(&cfg, Some(workers), &out).unwrap();
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    let ok = reports.windows(2).all(|w| w[0] == w[1]);
    outcome(ok, format!("report.json identical for 1, 3 and 8 workers ({} bytes)", reports[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("exact drift oracle", drift_oracle, Duration::from_secs(1)),
        ("closed-form first passage", closed_form_passage, Duration::from_secs(30)),
        ("U·N → t for stable(0.5)", theorem1_stable, Duration::from_secs(300)),
        ("gamma covering asymptotics", cor2_gamma, Duration::from_secs(300)),
        ("box-counting indices", indices_stable, Duration::from_secs(600)),
        ("covering tail bound", lemma4_tail, Duration::from_secs(120)),
        ("two-sided potential band", potential_band, Duration::from_secs(120)),
        ("q-potential identity", q_identity, Duration::from_secs(60)),
        ("splitting defect", lemma3_splitting, Duration::from_secs(60)),
        ("bounded normalised variance", lemma5_variance, Duration::from_secs(300)),
        ("worker-count reproducibility", reproducibility, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= *budget;
        let passed = o.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {} [{:.2}s of {}s]{}",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { " over time budget" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

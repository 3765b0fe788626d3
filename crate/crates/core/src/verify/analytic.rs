//! Experiments on the potential and on Φ itself.

use serde::Serialize;

use super::{check_deltas, check_positive, fmt_g, EngineSpec, ExperimentReport, Row, Table, Verdict};
use crate::error::{Error, Result};
use crate::model::{Family, SubordinatorSpec};
use crate::potential::{
    potential_asymptotic, potential_best, potential_mc, potential_q_two_ways, potential_quadrature, potential_series,
    PotentialEstimate, PotentialMethod, POTENTIAL_LOWER_CONSTANT, POTENTIAL_UPPER_CONSTANT, SERIES_CELLS, SERIES_TOL,
};
use crate::rng::RngStream;
use crate::stats::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialTableParams {
    pub deltas: Vec<f64>,
    /// Replicas of the Monte-Carlo column (0 or 1 to skip it).
    pub mc_replicas: u64,
    pub engine: EngineSpec,
}

impl PotentialTableParams {
    pub fn new(deltas: Vec<f64>) -> Self {
        PotentialTableParams {
            deltas,
            mc_replicas: 20_000,
            engine: EngineSpec::default(),
        }
    }
}

fn every_method(
    spec: &SubordinatorSpec,
    delta: f64,
    p: &PotentialTableParams,
    stream: &RngStream,
) -> Result<Vec<PotentialEstimate>> {
    let mut out = Vec::new();
    if spec.regular_variation().is_some() {
        out.push(potential_asymptotic(spec, delta)?);
    }
    if matches!(spec.family, Family::Gamma { .. } | Family::InverseGaussian { .. }) {
        out.push(potential_quadrature(spec, delta)?);
    }
    if spec.drift > 0.0 && !matches!(spec.family, Family::DriftOnly) {
        out.extend(potential_series(spec, &[delta], delta / SERIES_CELLS, SERIES_TOL * delta)?);
    }
    if p.mc_replicas >= 2 {
        out.push(potential_mc(spec, delta, p.mc_replicas, p.engine.resolve(spec, delta), stream)?);
    }
    Ok(out)
}

/// `U(δ)` by every applicable method, with the two-sided band `U·Φ(1/δ) ∈ [0.418, e]`.
pub fn run_potential_table(spec: &SubordinatorSpec, p: &PotentialTableParams, seed: u64) -> Result<ExperimentReport> {
    spec.require_eligible()?;
    check_deltas(&p.deltas)?;
    let stream = RngStream::new(seed, 0).substream(1);
    let mut report = ExperimentReport::new("potential-table", &spec.summary(), seed, p);
    let mut table = Table::new("potential", &["delta", "method", "value", "stderr", "U_phi"]);
    let mut best_values = Vec::new();
    let mut best_slack = Vec::new();
    let mut band_ok = true;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &delta) in p.deltas.iter().enumerate() {
        let phi = spec.phi(1.0 / delta)?;
        let sub = stream.substream(i as u64);
        let all = every_method(spec, delta, p, &sub)?;
        for u in &all {
            let product = u.value * phi;
            report.rows.push(
                Row::new("U", u.value)
                    .delta(delta)
                    .stderr(u.stderr)
                    .potential(u)
                    .with("U_phi", product),
            );
            table.push(vec![
                fmt_g(delta),
                u.method.label().to_string(),
                fmt_g(u.value),
                fmt_g(u.stderr),
                fmt_g(product),
            ]);
        }
        let best = match potential_best(spec, delta) {
            Ok(u) => u,
            Err(Error::Unsupported(_)) => all
                .iter()
                .find(|u| u.method == PotentialMethod::MonteCarlo)
                .cloned()
                .ok_or_else(|| {
                    Error::InvalidParameter("no deterministic potential applies; set mc_replicas ≥ 2".into())
                })?,
            Err(e) => return Err(e),
        };
        let slack = if best.method.is_deterministic() {
            if best.stderr.is_finite() {
                best.stderr
            } else {
                0.0
            }
        } else {
            3.0 * best.stderr
        };
        let product = best.value * phi;
        worst = (worst.0.min(product), worst.1.max(product));
        band_ok &= product + slack * phi >= POTENTIAL_LOWER_CONSTANT && product - slack * phi <= POTENTIAL_UPPER_CONSTANT;
        report.headlines.push(format!(
            "δ = {delta:e}: U = {:.6e} ({}), U·Φ(1/δ) = {product:.5}",
            best.value,
            best.method.label()
        ));
        best_values.push(best.value);
        best_slack.push(slack);
    }
    report.tables.push(table);
    report.verdicts.push(Verdict::new(
        "band",
        band_ok,
        format!(
            "U·Φ(1/δ) ranges over [{:.5}, {:.5}] within [{POTENTIAL_LOWER_CONSTANT:.5}, {POTENTIAL_UPPER_CONSTANT:.5}]",
            worst.0, worst.1
        ),
    ));
    let monotone = best_values
        .windows(2)
        .zip(best_slack.windows(2))
        .all(|(v, s)| v[1] <= v[0] + s[0] + s[1]);
    report.verdicts.push(Verdict::new(
        "monotone-in-delta",
        monotone,
        "U(δ) does not increase as δ decreases",
    ));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QIdentityParams {
    pub delta: f64,
    pub qs: Vec<f64>,
    pub replicas: u64,
    /// Skeleton step of the occupation-time estimate.
    pub step: f64,
    pub engine: EngineSpec,
}

impl QIdentityParams {
    pub fn new(delta: f64, qs: Vec<f64>, replicas: u64) -> Self {
        QIdentityParams {
            delta,
            qs,
            replicas,
            step: 1e-3,
            engine: EngineSpec::default(),
        }
    }
}

/// Occupation time versus `(1 − E e^{−qT})/q` for each `q`.
///
/// The skeleton estimate differs from the continuous occupation time by at most
/// one step, which is added to the agreement allowance.
pub fn run_q_identity(spec: &SubordinatorSpec, p: &QIdentityParams, seed: u64) -> Result<ExperimentReport> {
    spec.require_eligible()?;
    check_positive("delta", p.delta)?;
    check_positive("step", p.step)?;
    if p.qs.is_empty() {
        return Err(Error::InvalidParameter("the q list is empty".into()));
    }
    let base = RngStream::new(seed, 0);
    let engine = p.engine.resolve(spec, p.delta);
    let u0 = potential_best(spec, p.delta).ok();
    let mut report = ExperimentReport::new("q-identity", &spec.summary(), seed, p);
    let mut table = Table::new(
        "q_identity",
        &["q", "occupation", "occupation_se", "first_passage", "first_passage_se", "difference"],
    );
    let mut agree = true;
    let mut below_u = true;
    for (i, &q) in p.qs.iter().enumerate() {
        let (a, b) = potential_q_two_ways(spec, p.delta, q, p.replicas, p.step, engine, &base.substream(i as u64))?;
        let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        let diff = a.value - b.value;
        agree &= diff.abs() <= 3.0 * combined + p.step;
        if let Some(u) = &u0 {
            let slack = if u.stderr.is_finite() { u.stderr } else { 0.0 };
            below_u &= b.value <= u.value + 3.0 * b.stderr + slack;
        }
        for est in [&a, &b] {
            report.rows.push(
                Row::new("U_q", est.value)
                    .delta(p.delta)
                    .x(q)
                    .stderr(est.stderr)
                    .method(est.method.label())
                    .replicas(p.replicas),
            );
        }
        report.headlines.push(format!(
            "q = {q}: occupation {:.6} ± {:.6}, first passage {:.6} ± {:.6}",
            a.value, a.stderr, b.value, b.stderr
        ));
        table.push(vec![
            fmt_g(q),
            fmt_g(a.value),
            fmt_g(a.stderr),
            fmt_g(b.value),
            fmt_g(b.stderr),
            fmt_g(diff),
        ]);
    }
    report.tables.push(table);
    report.verdicts.push(Verdict::new(
        "estimates-agree",
        agree,
        format!("|A − B| ≤ 3 combined stderr + step ({}) for every q", p.step),
    ));
    if let Some(u) = &u0 {
        report.verdicts.push(Verdict::new(
            "below-potential",
            below_u,
            format!("U_q(δ) ≤ U(δ) = {:.6e} ({})", u.value, u.method.label()),
        ));
    }
    Ok(report)
}

/// `f(x) = L/Φ(L/x)` with `L = ln|ln x|`, for `0 < x < 1/e`.
pub fn hausdorff_f(spec: &SubordinatorSpec, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < (-1.0f64).exp()) {
        return Err(Error::Domain(format!("f(x) needs 0 < x < 1/e, got {x}")));
    }
    let l = x.ln().abs().ln();
    Ok(l / spec.phi(l / x)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffParams {
    pub xs: Vec<f64>,
}

/// Tabulates `f`, `Φ(x)·f(x)` and `Φ(1/x)·f(x)`.
///
/// Since `Φ(cλ) ≤ c·Φ(λ)` for `c ≥ 1`, the reciprocal profile is at least 1
/// wherever `ln|ln x| ≥ 1`, i.e. `x ≤ e^{−e}`; that is the binding check. The
/// literal profile `Φ(x)·f(x)` tends to zero and is reported only.
pub fn run_hausdorff(spec: &SubordinatorSpec, p: &HausdorffParams, seed: u64) -> Result<ExperimentReport> {
    spec.check_parameters()?;
    if p.xs.is_empty() {
        return Err(Error::InvalidParameter("the x list is empty".into()));
    }
    let threshold = (-std::f64::consts::E).exp();
    let mut report = ExperimentReport::new("hausdorff", &spec.summary(), seed, p);
    let mut table = Table::new("hausdorff", &["x", "f", "phi_x_f", "phi_inv_x_f"]);
    let mut ok = true;
    let mut checked = 0;
    let mut min_recip = f64::INFINITY;
    for &x in &p.xs {
        let f = hausdorff_f(spec, x)?;
        let literal = spec.phi(x)? * f;
        let reciprocal = spec.phi(1.0 / x)? * f;
        if x <= threshold {
            checked += 1;
            ok &= reciprocal >= 1.0 - 1e-12;
            min_recip = min_recip.min(reciprocal);
        }
        report.rows.push(
            Row::new("f", f)
                .x(x)
                .with("phi_x_f", literal)
                .with("phi_inv_x_f", reciprocal),
        );
        table.push(vec![fmt_g(x), fmt_g(f), fmt_g(literal), fmt_g(reciprocal)]);
    }
    report.tables.push(table);
    report.verdicts.push(Verdict::new(
        "reciprocal-profile",
        ok,
        format!("Φ(1/x)·f(x) ≥ 1 at {checked} points with x ≤ e^(−e); smallest {min_recip:.5}"),
    ));
    let lits: Vec<f64> = report.rows.iter().map(|r| r.extra["phi_x_f"]).collect();
    let below = lits.iter().filter(|&&v| v < 1.0).count();
    report.verdicts.push(Verdict::informational(
        "literal-profile",
        below == 0,
        format!(
            "Φ(x)·f(x) from {:.3e} to {:.3e} across the grid; below 1 at {below} of {} points",
            lits[0],
            lits[lits.len() - 1],
            lits.len()
        ),
    ));
    Ok(report)
}

/// Large-x behaviour of `g(x) = Φ(x)·ℓ/Φ(x·ℓ)`, `ℓ = ln ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionTrend {
    Diverging,
    Bounded,
    FiniteLimit,
}

impl ConditionTrend {
    pub fn label(&self) -> &'static str {
        match self {
            ConditionTrend::Diverging => "diverging",
            ConditionTrend::Bounded => "bounded",
            ConditionTrend::FiniteLimit => "finite-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionParams {
    /// Increasing grid, all above `e^e`, spanning at least three decades.
    pub xs: Vec<f64>,
}

fn condition_g(spec: &SubordinatorSpec, x: f64) -> Result<f64> {
    let l = x.ln().ln();
    Ok(spec.phi(x)? * l / spec.phi(x * l)?)
}

fn condition_fit(spec: &SubordinatorSpec, xs: &[f64]) -> Result<(ConditionTrend, f64, f64)> {
    let floor = std::f64::consts::E.exp();
    if xs.iter().any(|&x| !(x > floor && x.is_finite())) {
        return Err(Error::Domain(format!("the grid must lie above e^e ≈ {floor:.4}")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("the x grid must be strictly increasing".into()));
    }
    let top = xs[xs.len() - 1];
    if top / xs[0] < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("the x grid must span at least three decades".into()));
    }
    let tail: Vec<f64> = xs.iter().copied().filter(|&x| x >= top / 1e3 * (1.0 - 1e-12)).collect();
    let gs: Vec<f64> = tail.iter().map(|&x| condition_g(spec, x)).collect::<Result<_>>()?;
    let lx: Vec<f64> = tail.iter().map(|x| x.ln().ln().ln()).collect();
    let ly: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let slope = if tail.len() >= 2 { linear_fit(&lx, &ly).slope } else { 0.0 };
    let (lo, hi) = gs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    let range = (hi - lo) / hi.abs().max(f64::MIN_POSITIVE);
    let rising = gs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let trend = if range < 1e-3 {
        ConditionTrend::FiniteLimit
    } else if slope > 0.01 && rising {
        ConditionTrend::Diverging
    } else {
        ConditionTrend::Bounded
    };
    Ok((trend, slope, range))
}

/// Classifies `g` over the last three decades of `xs`.
///
/// `ln g` is regressed on `ln ℓ`; a steady rise means divergence (for
/// `Φ(λ) = λ^α` the slope is exactly `1 − α`), a relative spread below 1e−3
/// a finite limit, anything else a bounded but unsettled profile.
pub fn check_condition_2_4(spec: &SubordinatorSpec, xs: &[f64]) -> Result<ConditionTrend> {
    Ok(condition_fit(spec, xs)?.0)
}

/// Tabulates `g` and checks the classification against the declared index.
pub fn run_condition_2_4(spec: &SubordinatorSpec, p: &ConditionParams, seed: u64) -> Result<ExperimentReport> {
    spec.check_parameters()?;
    let (trend, slope, range) = condition_fit(spec, &p.xs)?;
    let mut report = ExperimentReport::new("condition-2-4", &spec.summary(), seed, p);
    let mut table = Table::new("condition", &["x", "lnln_x", "g"]);
    for &x in &p.xs {
        let g = condition_g(spec, x)?;
        report.rows.push(Row::new("g", g).x(x).with("lnln_x", x.ln().ln()));
        table.push(vec![fmt_g(x), fmt_g(x.ln().ln()), fmt_g(g)]);
    }
    report.tables.push(table);
    report.rows.push(Row::new("log-slope", slope).with("relative_range", range));
    report
        .headlines
        .push(format!("trend: {} (log-slope {slope:.4}, relative range {range:.3e})", trend.label()));
    match spec.regular_variation() {
        Some(rv) => {
            let expected_ok = if rv.index < 1.0 {
                trend == ConditionTrend::Diverging
            } else if matches!(spec.family, Family::DriftOnly) {
                trend == ConditionTrend::FiniteLimit
            } else {
                trend != ConditionTrend::Diverging
            };
            report.verdicts.push(Verdict::new(
                "consistent-with-index",
                expected_ok,
                format!("{} with index {}", trend.label(), rv.index),
            ));
        }
        None => report.verdicts.push(Verdict::informational(
            "consistent-with-index",
            true,
            format!("{}; no index declared", trend.label()),
        )),
    }
    Ok(report)
}

//! Experiment runners and their reports.
//!
//! Every runner is a pure function of `(spec, parameters, seed)`: replicas draw
//! from per-replica streams and are aggregated in replica order, so reports do
//! not depend on the number of worker threads.

mod analytic;
mod renewal;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covering::{path_counts, renewal_count_with};
use crate::error::{Error, Result};
use crate::model::SubordinatorSpec;
use crate::potential::{potential_best, potential_mc, PotentialEstimate};
use crate::rng::{replicate, RngStream};
use crate::simulate::{Engine, FirstPassageSampler};

pub use analytic::{
    check_condition_2_4, hausdorff_f, run_condition_2_4, run_hausdorff, run_potential_table, run_q_identity, ConditionParams,
    ConditionTrend, HausdorffParams, PotentialTableParams, QIdentityParams,
};
pub use renewal::{
    run_cor1, run_cor2, run_indices, run_lemma3, run_lemma4, run_lemma5, run_simulate_paths, run_theorem1,
    Cor1Params, Cor2Params, IndicesParams, Lemma3Params, Lemma4Params, Lemma5Params, SimulatePathsParams,
    Theorem1Params,
};

pub const REPORT_SCHEMA: &str = "subcover-report/1";

/// Experiment names accepted by the command line.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("theorem1", "mean and variance of U(δ)·N(t,δ) across δ; optional single long path"),
    ("lemma3", "splitting defect of literal covering counts over j equal pieces"),
    ("lemma4", "empirical survival of N(t,δ) against exp(2·C·t/U − x/8)"),
    ("lemma5", "Var N(t,δ)·U(δ)²/t² stays bounded across δ"),
    ("cor1", "N(t,δ)·U(δ)/t → 1 with U from the convolution series (d > 0)"),
    ("cor2", "N(t,δ)·δ^α/(t·Γ(1+α)·L(1/δ)) → 1 for regularly varying Φ"),
    ("indices", "regression slope of ln N against ln(1/δ) versus the index of Φ"),
    ("potential-table", "U(δ) by every available method and the band U·Φ(1/δ) ∈ [0.418, e]"),
    ("q-identity", "occupation-time and first-passage estimates of U_q(δ)"),
    ("hausdorff", "f(x) = L/Φ(L/x), L = ln|ln x|, and the Φ·f profiles"),
    ("condition-2-4", "growth of Φ(x)·lnln x / Φ(x·lnln x)"),
    ("simulate-paths", "dump sample paths as tables"),
];

/// Named pass/fail criterion. Non-binding verdicts are reported but do not
/// affect the exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub passed: bool,
    pub binding: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            criterion: criterion.to_string(),
            passed,
            binding: true,
            detail: detail.into(),
        }
    }

    pub fn informational(criterion: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            binding: false,
            ..Verdict::new(criterion, passed, detail)
        }
    }
}

/// One result line: a statistic at a given δ (or x) with its provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Row {
    pub fn new(label: &str, value: f64) -> Self {
        Row {
            label: label.to_string(),
            value,
            ..Default::default()
        }
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }

    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    pub fn potential(mut self, u: &PotentialEstimate) -> Self {
        self.potential = Some(u.value);
        self.method = Some(u.method.label().to_string());
        self
    }

    pub fn method(mut self, method: &str) -> Self {
        self.method = Some(method.to_string());
        self
    }

    pub fn replicas(mut self, n: u64) -> Self {
        self.replicas = Some(n);
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

/// Plot-ready table written as comma-separated text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub experiment: String,
    pub spec: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    /// Headline lines for the text summary.
    #[serde(skip)]
    pub headlines: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new<P: Serialize>(experiment: &str, spec: &str, seed: u64, parameters: &P) -> Self {
        ExperimentReport {
            schema: REPORT_SCHEMA.to_string(),
            experiment: experiment.to_string(),
            spec: spec.to_string(),
            seed,
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            rows: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
            headlines: Vec::new(),
            tables: Vec::new(),
        }
    }

    /// All binding verdicts passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.binding).all(|v| v.passed)
    }

    pub fn verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.experiment));
        out.push_str(&format!("spec:       {}\n", self.spec));
        out.push_str(&format!("seed:       {}\n", self.seed));
        out.push('\n');
        for h in &self.headlines {
            out.push_str(h);
            out.push('\n');
        }
        if !self.headlines.is_empty() {
            out.push('\n');
        }
        for v in &self.verdicts {
            let tag = match (v.passed, v.binding) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "NOTE",
            };
            out.push_str(&format!("[{tag}] {}: {}\n", v.criterion, v.detail));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out.push_str(&format!(
            "\noverall: {}\n",
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }

    /// Writes `report.json`, `summary.txt` and `tables/*.csv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("tables"))?;
        fs::write(dir.join("report.json"), self.to_json())?;
        fs::write(dir.join("summary.txt"), self.summary_text())?;
        for t in &self.tables {
            fs::write(dir.join("tables").join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        Ok(())
    }
}

/// How small jumps are handled when an experiment needs first passages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EngineSpec {
    /// Events engine. `epsilon` fixes the truncation; otherwise it is
    /// `rel_epsilon · δ` for infinite-activity specs and 0 (exact) for finite ones.
    Events {
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default = "default_rel_epsilon")]
        rel_epsilon: f64,
        #[serde(default = "default_true")]
        compensate: bool,
    },
    Skeleton { step: f64 },
}

fn default_rel_epsilon() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

impl Default for EngineSpec {
    fn default() -> Self {
        EngineSpec::relative(1e-3)
    }
}

impl EngineSpec {
    pub fn relative(rel_epsilon: f64) -> Self {
        EngineSpec::Events {
            epsilon: None,
            rel_epsilon,
            compensate: true,
        }
    }

    /// Concrete engine for the smallest level `delta` it must resolve.
    pub fn resolve(&self, spec: &SubordinatorSpec, delta: f64) -> Engine {
        match *self {
            EngineSpec::Events {
                epsilon,
                rel_epsilon,
                compensate,
            } => {
                let eps = match epsilon {
                    Some(e) => e,
                    None if !spec.infinite_activity() => 0.0,
                    None => rel_epsilon * delta,
                };
                Engine::Events {
                    epsilon: eps,
                    compensate,
                }
            }
            EngineSpec::Skeleton { step } => Engine::Skeleton { step },
        }
    }
}

/// Whether covering counts come from i.i.d. first passages or from one path per replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Counting {
    #[default]
    Renewal,
    Path,
}

pub(crate) fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("the δ list is empty".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter(format!("δ values must be positive: {deltas:?}")));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(format!("δ list must be strictly decreasing: {deltas:?}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Renewal counts `N(t, δ)` for every δ and replica, indexed `[δ][replica]`.
pub(crate) fn collect_counts(
    spec: &SubordinatorSpec,
    t: f64,
    deltas: &[f64],
    replicas: u64,
    engine: &EngineSpec,
    counting: Counting,
    stream: &RngStream,
) -> Result<Vec<Vec<u64>>> {
    spec.require_eligible()?;
    match counting {
        Counting::Renewal => deltas
            .iter()
            .enumerate()
            .map(|(i, &delta)| {
                let sampler = FirstPassageSampler::new(spec, delta, engine.resolve(spec, delta))?;
                Ok(replicate(&stream.substream(i as u64), replicas, |_, rng| {
                    renewal_count_with(&sampler, t, rng).renewals
                }))
            })
            .collect(),
        Counting::Path => {
            let smallest = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            let resolved = engine.resolve(spec, smallest);
            let per_replica = replicate(&stream.substream(u64::from(u32::MAX)), replicas, |_, rng| {
                path_counts(spec, t, deltas, resolved, rng).map(|cs| cs.into_iter().map(|c| c.renewals).collect::<Vec<_>>())
            });
            let mut out = vec![Vec::with_capacity(replicas as usize); deltas.len()];
            for r in per_replica {
                for (i, n) in r?.into_iter().enumerate() {
                    out[i].push(n);
                }
            }
            Ok(out)
        }
    }
}

/// Best deterministic `U(δ)`, or a Monte-Carlo estimate when none applies.
pub(crate) fn potential_or_mc(
    spec: &SubordinatorSpec,
    delta: f64,
    mc_replicas: u64,
    engine: &EngineSpec,
    stream: &RngStream,
) -> Result<PotentialEstimate> {
    match potential_best(spec, delta) {
        Err(Error::Unsupported(_)) => potential_mc(spec, delta, mc_replicas.max(2), engine.resolve(spec, delta), stream),
        other => other,
    }
}

pub(crate) fn fmt_g(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_is_schema_tagged_and_skips_tables() {
        let mut r = ExperimentReport::new("demo", "drift-only + drift 1", 7, &serde_json::json!({"t": 1.0}));
        r.rows.push(Row::new("x", 1.0).delta(0.1).replicas(3));
        r.tables.push(Table::new("demo", &["a", "b"]));
        r.verdicts.push(Verdict::informational("soft", false, "advisory"));
        let json = r.to_json();
        assert!(json.contains("\"schema\": \"subcover-report/1\""));
        assert!(!json.contains("tables"));
        assert!(r.passed());
        assert!(r.summary_text().contains("[NOTE] soft"));
    }

    #[test]
    fn table_csv_has_header() {
        let mut t = Table::new("t", &["delta", "value"]);
        t.push(vec![fmt_g(0.1), fmt_g(2.5)]);
        assert_eq!(t.to_csv(), "delta,value\n0.1,2.5\n");
    }

    #[test]
    fn delta_list_checks() {
        assert!(check_deltas(&[0.1, 0.01]).is_ok());
        assert!(check_deltas(&[0.01, 0.1]).is_err());
        assert!(check_deltas(&[]).is_err());
        assert!(check_deltas(&[0.1, -1.0]).is_err());
    }

    #[test]
    fn engine_resolution() {
        let e = EngineSpec::default();
        assert_eq!(
            e.resolve(&SubordinatorSpec::stable(0.5), 0.01),
            Engine::Events {
                epsilon: 1e-5,
                compensate: true
            }
        );
        let cp = SubordinatorSpec::compound_poisson(1.0, crate::model::JumpLaw::Fixed { size: 1.0 }, 1.0);
        assert_eq!(
            e.resolve(&cp, 0.01),
            Engine::Events {
                epsilon: 0.0,
                compensate: true
            }
        );
    }
}

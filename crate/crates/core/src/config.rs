//! Run configuration files.
//!
//! A configuration is a TOML document of flat keys plus one `[spec]` table:
//!
//! ```toml
//! experiment = "theorem1"
//! seed = 7
//! t = 1.0
//! replicas = 1000
//! deltas = [1e-2, 1e-3, 1e-4]
//!
//! [spec]
//! family = "stable"
//! alpha = 0.5
//! ```
//!
//! `[spec]` keys by family (`drift` is accepted by all and defaults to 0):
//!
//! | family             | keys                                                        |
//! |--------------------|-------------------------------------------------------------|
//! | `drift-only`       | `drift` (required)                                          |
//! | `stable`           | `alpha`, `scale` (default 1)                                |
//! | `gamma`            | `shape`, `rate`                                             |
//! | `inverse-gaussian` | `mean`, `shape`                                             |
//! | `compound-poisson` | `rate`, `jump` (`"fixed"` / `"exponential"`), `jump_size` / `jump_rate` |
//!
//! Instead of a table, `spec = "path.toml"` names a file holding the same keys
//! (at top level or under `[spec]`), resolved relative to the configuration.
//!
//! The δ levels come from exactly one of
//! `deltas = [...]`, `delta = x`, `delta_min`/`delta_max`/`per_decade`
//! (log-spaced, decreasing) or `delta_ratio`/`delta_levels` (levels with
//! `U(δ_j) = r^j`).
//!
//! The engine is `engine = "events"` (with `epsilon`, `rel_epsilon`,
//! `compensate`) or `engine = "skeleton"` (with `skeleton_step`).
//!
//! Other keys, all optional: `out`, `counting` (`"renewal"`/`"path"`),
//! `tolerance`, `trend_sigma`, `mc_replicas`, `single_path_horizon`, `c_a`,
//! `pieces`, `paths`, `qs`, `occupation_step`, `xs`, `horizon`,
//! `series_cells`, `series_tol`. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{Family, JumpLaw, SubordinatorSpec};
use crate::potential::solve_delta_grid;
use crate::verify::{
    self, ConditionParams, Cor1Params, Cor2Params, Counting, EngineSpec, ExperimentReport, HausdorffParams,
    IndicesParams, Lemma3Params, Lemma4Params, Lemma5Params, PotentialTableParams, QIdentityParams,
    SimulatePathsParams, Theorem1Params,
};

/// Parameters of one experiment, fully resolved with defaults.
#[derive(Debug, Clone)]
pub enum ExperimentParams {
    Theorem1(Theorem1Params),
    Lemma3(Lemma3Params),
    Lemma4(Lemma4Params),
    Lemma5(Lemma5Params),
    Cor1(Cor1Params),
    Cor2(Cor2Params),
    Indices(IndicesParams),
    PotentialTable(PotentialTableParams),
    QIdentity(QIdentityParams),
    Hausdorff(HausdorffParams),
    Condition(ConditionParams),
    SimulatePaths(SimulatePathsParams),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: String,
    pub spec: SubordinatorSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub params: ExperimentParams,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Parses a configuration; `base` resolves a spec given as a file name.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.message()))?;
        let mut doc = Doc::new(table);
        let experiment = doc.string("experiment")?.ok_or_else(|| Error::config("experiment", "missing"))?;
        if !verify::EXPERIMENTS.iter().any(|(name, _)| *name == experiment) {
            return Err(Error::config(
                "experiment",
                format!("unknown experiment {experiment:?}; see list-experiments"),
            ));
        }
        let spec = match doc.take("spec") {
            None => return Err(Error::config("spec", "missing")),
            Some(Value::Table(t)) => parse_spec_table(t, "spec.")?,
            Some(Value::String(file)) => {
                let path = base.map_or_else(|| PathBuf::from(&file), |b| b.join(&file));
                read_spec_file(&path).map_err(|e| match e {
                    Error::Config { key, message } => Error::Config {
                        key: if key.starts_with("spec") { key } else { format!("spec.{key}") },
                        message: format!("{message} (in {})", path.display()),
                    },
                    other => other,
                })?
            }
            Some(_) => return Err(Error::config("spec", "expected a table or a file name")),
        };
        let seed = doc.u64("seed")?.unwrap_or(0);
        let out = doc.string("out")?.map(PathBuf::from);
        let params = experiment_params(&experiment, &spec, &mut doc)?;
        doc.finish()?;
        Ok(RunConfig {
            experiment,
            spec,
            seed,
            out,
            params,
        })
    }

    pub fn execute(&self) -> Result<ExperimentReport> {
        let (spec, seed) = (&self.spec, self.seed);
        match &self.params {
            ExperimentParams::Theorem1(p) => verify::run_theorem1(spec, p, seed),
            ExperimentParams::Lemma3(p) => verify::run_lemma3(spec, p, seed),
            ExperimentParams::Lemma4(p) => verify::run_lemma4(spec, p, seed),
            ExperimentParams::Lemma5(p) => verify::run_lemma5(spec, p, seed),
            ExperimentParams::Cor1(p) => verify::run_cor1(spec, p, seed),
            ExperimentParams::Cor2(p) => verify::run_cor2(spec, p, seed),
            ExperimentParams::Indices(p) => verify::run_indices(spec, p, seed),
            ExperimentParams::PotentialTable(p) => verify::run_potential_table(spec, p, seed),
            ExperimentParams::QIdentity(p) => verify::run_q_identity(spec, p, seed),
            ExperimentParams::Hausdorff(p) => verify::run_hausdorff(spec, p, seed),
            ExperimentParams::Condition(p) => verify::run_condition_2_4(spec, p, seed),
            ExperimentParams::SimulatePaths(p) => verify::run_simulate_paths(spec, p, seed),
        }
    }
}

/// Reads a spec from a file with the `[spec]` keys at top level or under `[spec]`.
pub fn read_spec_file(path: &Path) -> Result<SubordinatorSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("spec", format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<SubordinatorSpec> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::config("spec", e.message()))?;
    match table.remove("spec") {
        Some(Value::Table(t)) if table.is_empty() => parse_spec_table(t, "spec."),
        Some(_) => Err(Error::config("spec", "expected only a [spec] table")),
        None => parse_spec_table(table, ""),
    }
}

/// Writes a spec in the format read by [`parse_spec`].
pub fn spec_to_toml(spec: &SubordinatorSpec) -> Result<String> {
    let mut t = Table::new();
    t.insert("family".into(), Value::String(spec.family.name().into()));
    let mut put = |k: &str, v: f64| {
        t.insert(k.into(), Value::Float(v));
    };
    match &spec.family {
        Family::DriftOnly => {}
        Family::Stable { alpha, scale } => {
            put("alpha", *alpha);
            put("scale", *scale);
        }
        Family::Gamma { shape, rate } => {
            put("shape", *shape);
            put("rate", *rate);
        }
        Family::InverseGaussian { mean, shape } => {
            put("mean", *mean);
            put("shape", *shape);
        }
        Family::CompoundPoisson { rate, jumps } => {
            put("rate", *rate);
            match jumps {
                JumpLaw::Fixed { size } => put("jump_size", *size),
                JumpLaw::Exponential { rate } => put("jump_rate", *rate),
            }
            let kind = if matches!(jumps, JumpLaw::Fixed { .. }) { "fixed" } else { "exponential" };
            t.insert("jump".into(), Value::String(kind.into()));
        }
        Family::TruncatedGeneral { .. } => {
            return Err(Error::Unsupported(
                "truncated-general specs carry a user function and cannot be written to a file".into(),
            ))
        }
    }
    t.insert("drift".into(), Value::Float(spec.drift));
    Ok(toml::to_string(&t).expect("plain table serialises"))
}

fn parse_spec_table(table: Table, prefix: &str) -> Result<SubordinatorSpec> {
    let mut doc = Doc::with_prefix(table, prefix);
    let family = doc.string("family")?.ok_or_else(|| doc.err("family", "missing"))?;
    let drift = doc.f64("drift")?;
    let family = match family.as_str() {
        "drift-only" => {
            if drift.is_none() {
                return Err(doc.err("drift", "required for drift-only"));
            }
            Family::DriftOnly
        }
        "stable" => Family::Stable {
            alpha: doc.req_f64("alpha")?,
            scale: doc.f64("scale")?.unwrap_or(1.0),
        },
        "gamma" => Family::Gamma {
            shape: doc.req_f64("shape")?,
            rate: doc.req_f64("rate")?,
        },
        "inverse-gaussian" => Family::InverseGaussian {
            mean: doc.req_f64("mean")?,
            shape: doc.req_f64("shape")?,
        },
        "compound-poisson" => {
            let rate = doc.req_f64("rate")?;
            let jumps = match doc.string("jump")?.as_deref() {
                Some("fixed") => JumpLaw::Fixed {
                    size: doc.req_f64("jump_size")?,
                },
                Some("exponential") => JumpLaw::Exponential {
                    rate: doc.req_f64("jump_rate")?,
                },
                Some(other) => return Err(doc.err("jump", format!("expected \"fixed\" or \"exponential\", got {other:?}"))),
                None => return Err(doc.err("jump", "missing")),
            };
            Family::CompoundPoisson { rate, jumps }
        }
        "truncated-general" => {
            return Err(doc.err(
                "family",
                "truncated-general needs a tail function and is only available through the library",
            ))
        }
        other => return Err(doc.err("family", format!("unknown family {other:?}"))),
    };
    doc.finish()?;
    let spec = SubordinatorSpec::new(drift.unwrap_or(0.0), family);
    spec.check_parameters().map_err(|e| match e {
        Error::InvalidParameter(m) => doc.err("family", m),
        other => other,
    })?;
    Ok(spec)
}

fn log_spaced(max: f64, min: f64, per_decade: u64) -> Vec<f64> {
    let decades = (max / min).log10();
    let n = (decades * per_decade as f64).round() as u64;
    let mut out: Vec<f64> = (0..=n).map(|k| max * 10f64.powf(-(k as f64) / per_decade as f64)).collect();
    if let Some(last) = out.last_mut() {
        *last = min;
    }
    out
}

fn decades(max_exp: i32, min_exp: i32) -> Vec<f64> {
    (max_exp..=min_exp).map(|k| 10f64.powi(-k)).collect()
}

/// Resolves the δ keys; `default` applies when none is present.
fn delta_list(doc: &mut Doc, spec: &SubordinatorSpec, default: Vec<f64>) -> Result<Vec<f64>> {
    let list = doc.f64_list("deltas")?;
    let single = doc.f64("delta")?;
    let (lo, hi, per) = (doc.f64("delta_min")?, doc.f64("delta_max")?, doc.u64("per_decade")?);
    let (ratio, levels) = (doc.f64("delta_ratio")?, doc.u64("delta_levels")?);
    let given = [list.is_some(), single.is_some(), lo.is_some() || hi.is_some(), ratio.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(doc.err("deltas", "give exactly one of deltas, delta, delta_min/delta_max, delta_ratio"));
    }
    let deltas = if let Some(v) = list {
        v
    } else if let Some(d) = single {
        vec![d]
    } else if lo.is_some() || hi.is_some() {
        let lo = lo.ok_or_else(|| doc.err("delta_min", "missing"))?;
        let hi = hi.ok_or_else(|| doc.err("delta_max", "missing"))?;
        if !(lo > 0.0 && hi > lo) {
            return Err(doc.err("delta_min", "need 0 < delta_min < delta_max"));
        }
        let per = per.unwrap_or(1);
        if per == 0 {
            return Err(doc.err("per_decade", "must be at least 1"));
        }
        log_spaced(hi, lo, per)
    } else if let Some(r) = ratio {
        let levels = levels.ok_or_else(|| doc.err("delta_levels", "missing"))?;
        solve_delta_grid(spec, r, levels as usize, None)
            .map_err(|e| doc.err("delta_ratio", e.to_string()))?
            .levels
    } else {
        default
    };
    if deltas.is_empty() {
        return Err(doc.err("deltas", "the δ list is empty"));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(doc.err("deltas", "δ values must be positive and finite"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(doc.err("deltas", "δ values must be strictly decreasing"));
    }
    Ok(deltas)
}

fn engine(doc: &mut Doc) -> Result<EngineSpec> {
    let kind = doc.string("engine")?;
    let eps = doc.f64("epsilon")?;
    let rel = doc.f64("rel_epsilon")?;
    let compensate = doc.bool("compensate")?;
    let step = doc.f64("skeleton_step")?;
    match kind.as_deref() {
        None | Some("events") => {
            if step.is_some() {
                return Err(doc.err("skeleton_step", "only valid with engine = \"skeleton\""));
            }
            if let Some(e) = eps {
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(doc.err("epsilon", "must be nonnegative"));
                }
            }
            let rel = rel.unwrap_or(1e-3);
            if !(rel > 0.0 && rel < 1.0) {
                return Err(doc.err("rel_epsilon", "must lie in (0, 1)"));
            }
            Ok(EngineSpec::Events {
                epsilon: eps,
                rel_epsilon: rel,
                compensate: compensate.unwrap_or(true),
            })
        }
        Some("skeleton") => {
            if eps.is_some() || rel.is_some() || compensate.is_some() {
                return Err(doc.err("engine", "epsilon/rel_epsilon/compensate apply to the events engine only"));
            }
            let step = step.ok_or_else(|| doc.err("skeleton_step", "required for the skeleton engine"))?;
            if !(step > 0.0 && step.is_finite()) {
                return Err(doc.err("skeleton_step", "must be positive"));
            }
            Ok(EngineSpec::Skeleton { step })
        }
        Some(other) => Err(doc.err("engine", format!("expected \"events\" or \"skeleton\", got {other:?}"))),
    }
}

fn counting(doc: &mut Doc, default: Counting) -> Result<Counting> {
    match doc.string("counting")?.as_deref() {
        None => Ok(default),
        Some("renewal") => Ok(Counting::Renewal),
        Some("path") => Ok(Counting::Path),
        Some(other) => Err(doc.err("counting", format!("expected \"renewal\" or \"path\", got {other:?}"))),
    }
}

fn default_index_deltas(spec: &SubordinatorSpec) -> Vec<f64> {
    match spec.regular_variation().map(|rv| rv.index) {
        Some(a) if a < 0.4 => decades(4, 8),
        Some(a) if a < 0.6 => decades(3, 7),
        _ => decades(2, 6),
    }
}

fn experiment_params(name: &str, spec: &SubordinatorSpec, doc: &mut Doc) -> Result<ExperimentParams> {
    let t = doc.f64("t")?.unwrap_or(1.0);
    if !(t > 0.0 && t.is_finite()) {
        return Err(doc.err("t", "must be positive"));
    }
    let replicas = doc.u64("replicas")?;
    if replicas == Some(0) {
        return Err(doc.err("replicas", "must be at least 1"));
    }
    let replicas_or = |d: u64| replicas.unwrap_or(d);
    let mc_replicas = doc.u64("mc_replicas")?;
    let sigma = doc.f64("trend_sigma")?;
    let tolerance = doc.f64("tolerance")?;
    Ok(match name {
        "theorem1" => {
            let deltas = delta_list(doc, spec, decades(2, 4))?;
            let mut p = Theorem1Params::new(t, deltas, replicas_or(1000));
            p.engine = engine(doc)?;
            p.counting = counting(doc, Counting::Renewal)?;
            p.tolerance = tolerance.unwrap_or(p.tolerance);
            p.trend_sigma = sigma.unwrap_or(p.trend_sigma);
            p.single_path_horizon = doc.f64("single_path_horizon")?;
            p.mc_replicas = mc_replicas.unwrap_or(p.mc_replicas);
            ExperimentParams::Theorem1(p)
        }
        "lemma3" => {
            let deltas = delta_list(doc, spec, vec![0.1, 0.01])?;
            let pieces = match doc.u64_list("pieces")? {
                Some(v) => v.into_iter().map(|j| j as usize).collect(),
                None => vec![2, 4, 8],
            };
            let paths = doc.u64("paths")?.unwrap_or(replicas_or(1000));
            let mut p = Lemma3Params::new(t, deltas, pieces, paths);
            p.engine = engine(doc)?;
            ExperimentParams::Lemma3(p)
        }
        "lemma4" => {
            let deltas = delta_list(doc, spec, vec![1e-2])?;
            if deltas.len() != 1 {
                return Err(doc.err("deltas", "lemma4 takes a single δ"));
            }
            let mut p = Lemma4Params::new(t, deltas[0], replicas_or(100_000));
            p.c_a = doc.f64("c_a")?.unwrap_or(p.c_a);
            p.engine = engine(doc)?;
            p.mc_replicas = mc_replicas.unwrap_or(p.mc_replicas);
            ExperimentParams::Lemma4(p)
        }
        "lemma5" => {
            let deltas = delta_list(doc, spec, decades(2, 4))?;
            let mut p = Lemma5Params::new(t, deltas, replicas_or(1000));
            p.engine = engine(doc)?;
            p.counting = counting(doc, Counting::Renewal)?;
            p.trend_sigma = sigma.unwrap_or(p.trend_sigma);
            p.mc_replicas = mc_replicas.unwrap_or(p.mc_replicas);
            ExperimentParams::Lemma5(p)
        }
        "cor1" => {
            let deltas = delta_list(doc, spec, decades(1, 3))?;
            let mut p = Cor1Params::new(t, deltas, replicas_or(1000));
            p.engine = engine(doc)?;
            p.series_cells = doc.u64("series_cells")?.map_or(p.series_cells, |c| c as usize);
            p.series_tol = doc.f64("series_tol")?.unwrap_or(p.series_tol);
            p.mc_replicas = mc_replicas.unwrap_or(p.mc_replicas);
            ExperimentParams::Cor1(p)
        }
        "cor2" => {
            let deltas = delta_list(doc, spec, decades(2, 4))?;
            let mut p = Cor2Params::new(t, deltas, replicas_or(1000));
            p.engine = engine(doc)?;
            p.counting = counting(doc, Counting::Renewal)?;
            let slow = spec.regular_variation().is_some_and(|rv| rv.index == 0.0);
            p.tolerance = tolerance.unwrap_or(if slow { 0.15 } else { 0.05 });
            p.trend_sigma = sigma.unwrap_or(p.trend_sigma);
            ExperimentParams::Cor2(p)
        }
        "indices" => {
            let deltas = delta_list(doc, spec, default_index_deltas(spec))?;
            let mut p = IndicesParams::new(t, deltas, replicas_or(1000));
            if doc.contains("engine") || doc.contains("rel_epsilon") || doc.contains("epsilon") {
                p.engine = engine(doc)?;
            }
            p.counting = counting(doc, Counting::Path)?;
            p.tolerance = tolerance.unwrap_or(p.tolerance);
            ExperimentParams::Indices(p)
        }
        "potential-table" => {
            let deltas = delta_list(doc, spec, decades(1, 6))?;
            let mut p = PotentialTableParams::new(deltas);
            p.mc_replicas = mc_replicas.unwrap_or(p.mc_replicas);
            p.engine = engine(doc)?;
            ExperimentParams::PotentialTable(p)
        }
        "q-identity" => {
            let deltas = delta_list(doc, spec, vec![0.1])?;
            if deltas.len() != 1 {
                return Err(doc.err("deltas", "q-identity takes a single δ"));
            }
            let qs = doc.f64_list("qs")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
            let mut p = QIdentityParams::new(deltas[0], qs, replicas_or(10_000));
            p.step = doc.f64("occupation_step")?.unwrap_or(p.step);
            p.engine = engine(doc)?;
            ExperimentParams::QIdentity(p)
        }
        "hausdorff" => {
            let xs = doc.f64_list("xs")?.unwrap_or_else(|| {
                let mut v = vec![0.3];
                v.extend(decades(1, 8));
                v
            });
            ExperimentParams::Hausdorff(HausdorffParams { xs })
        }
        "condition-2-4" => {
            let xs = doc
                .f64_list("xs")?
                .unwrap_or_else(|| (0..=18).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect());
            ExperimentParams::Condition(ConditionParams { xs })
        }
        "simulate-paths" => {
            let deltas = delta_list(doc, spec, vec![1e-2])?;
            ExperimentParams::SimulatePaths(SimulatePathsParams {
                horizon: doc.f64("horizon")?.unwrap_or(t),
                paths: doc.u64("paths")?.unwrap_or(replicas_or(5)),
                engine: engine(doc)?,
                delta: deltas[deltas.len() - 1],
            })
        }
        other => return Err(Error::config("experiment", format!("unknown experiment {other:?}"))),
    })
}

/// A TOML table whose keys are consumed one by one; leftovers are errors.
struct Doc {
    table: Table,
    prefix: String,
    seen: BTreeSet<String>,
}

impl Doc {
    fn new(table: Table) -> Self {
        Self::with_prefix(table, "")
    }

    fn with_prefix(table: Table, prefix: &str) -> Self {
        Doc {
            table,
            prefix: prefix.to_string(),
            seen: BTreeSet::new(),
        }
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::config(format!("{}{key}", self.prefix), message)
    }

    fn contains(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.seen.insert(key.to_string());
        self.table.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(v)),
            Some(Value::Integer(v)) => Ok(Some(v as f64)),
            Some(other) => Err(self.err(key, format!("expected a number, got {}", other.type_str()))),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if v >= 0 => Ok(Some(v as u64)),
            Some(other) => Err(self.err(key, format!("expected a nonnegative integer, got {other}"))),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(other) => Err(self.err(key, format!("expected true or false, got {other}"))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(self.err(key, format!("expected a string, got {other}"))),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(x),
                    Value::Integer(x) => Ok(x as f64),
                    other => Err(self.err(key, format!("expected numbers, found {other}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(self.err(key, format!("expected a list of numbers, got {}", other.type_str()))),
        }
    }

    fn u64_list(&mut self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::Integer(x) if x > 0 => Ok(x as u64),
                    other => Err(self.err(key, format!("expected positive integers, found {other}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(self.err(key, format!("expected a list of integers, got {}", other.type_str()))),
        }
    }

    fn finish(&self) -> Result<()> {
        match self.table.keys().next() {
            None => Ok(()),
            Some(key) => Err(self.err(key, "unknown key")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STABLE: &str = r#"
experiment = "theorem1"
seed = 9
replicas = 50
deltas = [1e-2, 1e-3]

[spec]
family = "stable"
alpha = 0.5
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::parse(STABLE, None).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.spec.summary(), SubordinatorSpec::stable(0.5).summary());
        match c.params {
            ExperimentParams::Theorem1(p) => {
                assert_eq!(p.deltas, vec![1e-2, 1e-3]);
                assert_eq!(p.replicas, 50);
                assert_eq!(p.tolerance, 0.05);
            }
            other => panic!("{other:?}"),
        }
    }

    fn key_of(text: &str) -> String {
        match RunConfig::parse(text, None) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics_name_the_key() {
        assert_eq!(key_of(&STABLE.replace("replicas = 50", "replicas = 0")), "replicas");
        assert_eq!(key_of(&STABLE.replace("replicas = 50", "replicaz = 50")), "replicaz");
        assert_eq!(key_of(&STABLE.replace("alpha = 0.5", "alpha = 1.5")), "spec.family");
        assert_eq!(key_of(&STABLE.replace("alpha = 0.5", "alpha = \"x\"")), "spec.alpha");
        assert_eq!(key_of(&STABLE.replace("[1e-2, 1e-3]", "[1e-3, 1e-2]")), "deltas");
        assert_eq!(key_of(&STABLE.replace("theorem1", "theorem9")), "experiment");
        assert_eq!(key_of(&STABLE.replace("family = \"stable\"", "family = \"truncated-general\"")), "spec.family");
        assert_eq!(key_of("experiment = \"theorem1\""), "spec");
        assert_eq!(key_of("experiment = "), "config");
    }

    #[test]
    fn log_spaced_grid() {
        let text = STABLE.replace("deltas = [1e-2, 1e-3]", "delta_max = 1e-2\ndelta_min = 1e-4\nper_decade = 2");
        let c = RunConfig::parse(&text, None).unwrap();
        let ExperimentParams::Theorem1(p) = c.params else { panic!() };
        assert_eq!(p.deltas.len(), 5);
        assert_eq!(p.deltas[0], 1e-2);
        assert_eq!(p.deltas[4], 1e-4);
        assert!((p.deltas[1] - 10f64.powf(-2.5)).abs() < 1e-15);
    }

    #[test]
    fn geometric_grid() {
        let text = STABLE.replace("deltas = [1e-2, 1e-3]", "delta_ratio = 0.5\ndelta_levels = 3");
        let c = RunConfig::parse(&text, None).unwrap();
        let ExperimentParams::Theorem1(p) = c.params else { panic!() };
        assert_eq!(p.deltas.len(), 3);
    }

    #[test]
    fn spec_round_trip() {
        let specs = [
            SubordinatorSpec::stable(0.3),
            SubordinatorSpec::gamma(2.0, 0.5).with_drift(0.1),
            SubordinatorSpec::inverse_gaussian(1.0, 2.0),
            SubordinatorSpec::drift_only(3.0),
            SubordinatorSpec::compound_poisson(1.0, JumpLaw::Fixed { size: 1.0 }, 1.0),
            SubordinatorSpec::compound_poisson(2.0, JumpLaw::Exponential { rate: 3.0 }, 0.5),
        ];
        for s in specs {
            assert_eq!(parse_spec(&spec_to_toml(&s).unwrap()).unwrap().summary(), s.summary());
        }
    }

    #[test]
    fn spec_file_reference() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("g.toml"), "family = \"gamma\"\nshape = 1\nrate = 1\n").unwrap();
        let text = "experiment = \"cor2\"\nspec = \"g.toml\"\n";
        let c = RunConfig::parse(text, Some(dir.path())).unwrap();
        assert_eq!(c.spec.summary(), SubordinatorSpec::gamma(1.0, 1.0).summary());
        let ExperimentParams::Cor2(p) = c.params else { panic!() };
        assert_eq!(p.tolerance, 0.15);
    }

    #[test]
    fn skeleton_engine() {
        let text = STABLE.replace("seed = 9", "seed = 9\nengine = \"skeleton\"\nskeleton_step = 1e-4");
        let ExperimentParams::Theorem1(p) = RunConfig::parse(&text, None).unwrap().params else { panic!() };
        assert_eq!(p.engine, EngineSpec::Skeleton { step: 1e-4 });
        let bad = STABLE.replace("seed = 9", "seed = 9\nengine = \"skeleton\"");
        assert_eq!(key_of(&bad), "skeleton_step");
    }
}

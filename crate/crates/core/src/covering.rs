//! Greedy δ-coverings of a subordinator's range.
//!
//! The renewal times are `T_0 = 0` and `T_{k+1} = inf{s ≥ T_k : X_s − X_{T_k} > δ}`;
//! the covering number is `N(t, δ) = max{k : T_k ≤ t}` and the literal count of
//! δ-intervals is `N + 1{T_N < t}`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SubordinatorSpec;
use crate::simulate::{
    simulate_events, simulate_skeleton, Engine, EventPath, FirstPassageSampler, SamplePath, SkeletonPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    PathEvents,
    PathSkeleton,
    Renewal,
}

impl CountMethod {
    pub fn label(&self) -> &'static str {
        match self {
            CountMethod::PathEvents => "path-events",
            CountMethod::PathSkeleton => "path-skeleton",
            CountMethod::Renewal => "renewal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringCount {
    /// `N(t, δ)`.
    pub renewals: u64,
    /// Number of δ-intervals in the greedy covering, `N + 1{T_N < t}`.
    pub literal: u64,
    pub times: Vec<f64>,
    pub method: CountMethod,
    pub horizon: f64,
    pub delta: f64,
    pub warnings: Vec<String>,
}

impl CoveringCount {
    fn from_times(times: Vec<f64>, start: f64, horizon: f64, delta: f64, method: CountMethod) -> Self {
        let last = times.last().copied().unwrap_or(start);
        let renewals = times.len() as u64;
        CoveringCount {
            renewals,
            literal: renewals + u64::from(last < horizon),
            times,
            method,
            horizon,
            delta,
            warnings: Vec::new(),
        }
    }

    /// Last renewal time, or 0 when there is none.
    pub fn max_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub const CSV_HEADER: &'static str = "replica,delta,t,engine,N,literal_N,max_renewal_time";

    pub fn csv_row(&self, replica: u64, engine: &str) -> String {
        format!(
            "{replica},{},{},{engine},{},{},{}",
            self.delta,
            self.horizon,
            self.renewals,
            self.literal,
            self.max_time()
        )
    }
}

fn check_args(horizon: f64, t: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if t > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("t = {t} exceeds the path horizon {horizon}")));
    }
    Ok(())
}

/// Greedy renewals of an event path on `[start, end]`, restarted at `start`.
fn event_renewals(path: &EventPath, start: f64, end: f64, delta: f64) -> Vec<f64> {
    let d = path.drift;
    let mut times = Vec::new();
    // position of the path at the last processed point
    let mut cur_time = start;
    let mut cur_value = path.value_at(start);
    // anchor of the current drift run: targets are base + (m+1)δ so that
    // consecutive drift crossings do not accumulate rounding
    let mut base_value = cur_value;
    let mut m: u64 = 0;

    let first = path.times.partition_point(|&s| s <= start);
    let mut events = path.times[first..].iter().zip(&path.jumps[first..]);
    loop {
        let next = events.next();
        if d > 0.0 {
            loop {
                let target = base_value + (m + 1) as f64 * delta;
                let crossing = cur_time + (target - cur_value) / d;
                let before_next = match next {
                    Some((&tau, _)) if tau <= end => crossing < tau,
                    _ => crossing <= end,
                };
                if !before_next {
                    break;
                }
                times.push(crossing);
                m += 1;
            }
        }
        match next {
            Some((&tau, &jump)) if tau <= end => {
                cur_value += d * (tau - cur_time) + jump;
                cur_time = tau;
                let target = base_value + (m + 1) as f64 * delta;
                if cur_value > target {
                    times.push(tau);
                    base_value = cur_value;
                    m = 0;
                }
            }
            _ => break,
        }
    }
    times
}

/// Greedy renewals on the skeleton grid restricted to `[start, end]`.
fn skeleton_renewals(path: &SkeletonPath, start: f64, end: f64, delta: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let first = ((start / path.step).floor() as usize).min(path.values.len() - 1);
    let mut anchor = path.values[first];
    for k in first + 1..path.values.len() {
        let s = path.time(k);
        if s > end {
            break;
        }
        if path.values[k] > anchor + delta {
            times.push(s);
            anchor = path.values[k];
        }
    }
    times
}

fn window_count(path: &SamplePath, start: f64, end: f64, delta: f64) -> CoveringCount {
    match path {
        SamplePath::Events(p) => {
            CoveringCount::from_times(event_renewals(p, start, end, delta), start, end, delta, CountMethod::PathEvents)
        }
        SamplePath::Skeleton(p) => CoveringCount::from_times(
            skeleton_renewals(p, start, end, delta),
            start,
            end,
            delta,
            CountMethod::PathSkeleton,
        ),
    }
}

/// Covering count of a given path on `[0, t]`.
pub fn count_covering_path(path: &SamplePath, t: f64, delta: f64) -> Result<CoveringCount> {
    check_args(path.horizon(), t, delta)?;
    let mut count = window_count(path, 0.0, t, delta);
    if let SamplePath::Events(p) = path {
        if !p.exact && p.epsilon > 0.1 * delta {
            count
                .warnings
                .push(format!("truncation ε = {:e} is coarse relative to δ = {delta:e}", p.epsilon));
        }
    }
    Ok(count)
}

/// Covering count built from i.i.d. first-passage times `η_1, η_2, …`.
pub fn count_covering_renewal<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    t: f64,
    delta: f64,
    engine: Engine,
    rng: &mut R,
) -> Result<CoveringCount> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let sampler = FirstPassageSampler::new(spec, delta, engine)?;
    Ok(renewal_count_with(&sampler, t, rng))
}

/// Renewal count with a prepared sampler (avoids re-validating per replica).
pub fn renewal_count_with<R: Rng + ?Sized>(sampler: &FirstPassageSampler, t: f64, rng: &mut R) -> CoveringCount {
    let mut times = Vec::new();
    let mut clock = 0.0;
    loop {
        clock += sampler.sample(rng).time;
        if clock > t {
            break;
        }
        times.push(clock);
    }
    CoveringCount::from_times(times, 0.0, t, sampler.delta(), CountMethod::Renewal)
}

/// Simulates one path on `[0, t]` with the engine and counts it at every δ.
pub fn path_counts<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    t: f64,
    deltas: &[f64],
    engine: Engine,
    rng: &mut R,
) -> Result<Vec<CoveringCount>> {
    spec.require_eligible()?;
    let path = match engine {
        Engine::Events { epsilon, compensate } => simulate_events(spec, t, epsilon, compensate, rng)?,
        Engine::Skeleton { step } => simulate_skeleton(spec, t, step, rng)?,
    };
    deltas.iter().map(|&d| count_covering_path(&path, t, d)).collect()
}

/// Lemma-3 style defect: global literal count minus the sum of literal counts
/// on the pieces `[0, s_1], [s_1, s_2], …, [s_{j−1}, t]`, each covering restarted
/// at its left endpoint.
pub fn splitting_defect(path: &SamplePath, t: f64, splits: &[f64], delta: f64) -> Result<i64> {
    check_args(path.horizon(), t, delta)?;
    let mut prev = 0.0;
    for &s in splits {
        if !(s > prev && s < t) {
            return Err(Error::Domain(format!(
                "split points must increase strictly inside (0, {t}); got {s} after {prev}"
            )));
        }
        prev = s;
    }
    let global = window_count(path, 0.0, t, delta).literal as i64;
    let mut edges = Vec::with_capacity(splits.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(splits);
    edges.push(t);
    let pieces: i64 = edges
        .windows(2)
        .map(|w| window_count(path, w[0], w[1], delta).literal as i64)
        .sum();
    Ok(global - pieces)
}

//! Path and first-passage simulation.
//!
//! Two engines are provided:
//!
//! * **events**: jumps larger than `ε` arrive as a Poisson process of rate
//!   `Π̄(ε)` with sizes drawn from `Π` restricted to `(ε, ∞)`; jumps of size at
//!   most `ε` are dropped and, when compensation is on, replaced by their mean
//!   `∫_0^ε xΠ(dx)` added to the drift. Exact for finite-activity specs with
//!   `ε = 0`. Level crossings between jumps are solved in closed form.
//! * **skeleton**: exact increments on a time grid of step `h`. Passage is
//!   detected at the first grid time strictly above the level, so passage times
//!   are biased upward and covering counts downward.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Family, JumpLaw, LevyTail, SubordinatorSpec};

/// Positive α-stable variate with `E[e^{−λS}] = e^{−λ^α}` (Kanter's representation).
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u = PI * rng.random::<f64>();
        if u <= 0.0 {
            continue;
        }
        let w: f64 = Exp1.sample(rng);
        if w <= 0.0 {
            continue;
        }
        let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
        let b = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
        let s = a * b;
        if s.is_finite() {
            return s;
        }
    }
}

/// Inverse-Gaussian variate with the given mean and shape.
///
/// Michael–Schucany–Haas, with the smaller root written in a form that stays
/// positive when `shape ≪ mean`.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = rand_distr::StandardNormal.sample(rng);
    let y = nu * nu;
    let my = mean * y;
    let root = (my * my + 4.0 * mean * shape * y).sqrt();
    // smaller root μ + μ²y/2λ − (μ/2λ)·root, rationalised
    let x = (2.0 * shape * mean / (2.0 * shape + my + root)).min(mean);
    if rng.random::<f64>() * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// One exact draw of the increment `X_h`.
pub fn sample_increment<R: Rng + ?Sized>(spec: &SubordinatorSpec, h: f64, rng: &mut R) -> Result<f64> {
    spec.check_parameters()?;
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("increment length must be nonnegative, got {h}")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let drift = spec.drift * h;
    let jumps = match &spec.family {
        Family::DriftOnly => 0.0,
        Family::Stable { alpha, scale } => (scale * h).powf(1.0 / alpha) * sample_positive_stable(*alpha, rng),
        Family::Gamma { shape, rate } => {
            let g = Gamma::new(shape * h, 1.0 / rate).map_err(|e| Error::Numerical(e.to_string()))?;
            g.sample(rng)
        }
        Family::InverseGaussian { mean, shape } => sample_inverse_gaussian(mean * h, shape * h * h, rng),
        Family::CompoundPoisson { rate, jumps } => {
            let count: f64 = Poisson::new(rate * h)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(rng);
            let mut sum = 0.0;
            for _ in 0..count as u64 {
                sum += sample_jump_law(jumps, rng);
            }
            sum
        }
        Family::TruncatedGeneral { .. } => {
            return Err(Error::Unsupported(
                "truncated-general has no exact increment sampler; simulate it with the events engine".into(),
            ))
        }
    };
    Ok(drift + jumps)
}

fn sample_jump_law<R: Rng + ?Sized>(law: &JumpLaw, rng: &mut R) -> f64 {
    match *law {
        JumpLaw::Fixed { size } => size,
        JumpLaw::Exponential { rate } => {
            let e: f64 = Exp1.sample(rng);
            e / rate
        }
    }
}

/// Jump sizes from `Π` restricted to `(ε, ∞)`, normalised.
#[derive(Debug, Clone)]
enum JumpSampler {
    None,
    Fixed(f64),
    ShiftedExp { shift: f64, rate: f64 },
    /// density ∝ y^{−1−β} on (ε, ∞)
    Pareto { eps: f64, beta: f64 },
    /// density ∝ y^{−1−β}e^{−cy} on (ε, ∞), by two-region rejection
    Tempered { eps: f64, beta: f64, c: f64, split: f64, p_head: f64 },
    /// numerical inversion of the tail
    Inversion { tail: LevyTail, eps: f64, level: f64 },
}

impl JumpSampler {
    fn tempered(eps: f64, beta: f64, c: f64) -> Self {
        let split = eps.max(1.0 / c);
        let head = if split <= eps {
            0.0
        } else if beta == 0.0 {
            (split / eps).ln()
        } else {
            (eps.powf(-beta) - split.powf(-beta)) / beta
        };
        let tail = split.powf(-1.0 - beta) * (-c * split).exp() / c;
        JumpSampler::Tempered {
            eps,
            beta,
            c,
            split,
            p_head: head / (head + tail),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSampler::None => 0.0,
            JumpSampler::Fixed(a) => *a,
            JumpSampler::ShiftedExp { shift, rate } => {
                let e: f64 = Exp1.sample(rng);
                shift + e / rate
            }
            JumpSampler::Pareto { eps, beta } => {
                let u = 1.0 - rng.random::<f64>();
                eps * u.powf(-1.0 / beta)
            }
            JumpSampler::Tempered {
                eps,
                beta,
                c,
                split,
                p_head,
            } => loop {
                if rng.random::<f64>() < *p_head {
                    let u = rng.random::<f64>();
                    let y = if *beta == 0.0 {
                        eps * (split / eps).powf(u)
                    } else {
                        let lo = eps.powf(-beta);
                        let hi = split.powf(-beta);
                        (lo - u * (lo - hi)).powf(-1.0 / beta)
                    };
                    if rng.random::<f64>() < (-c * y).exp() {
                        return y;
                    }
                } else {
                    let e: f64 = Exp1.sample(rng);
                    let y = split + e / c;
                    if rng.random::<f64>() < (y / split).powf(-1.0 - beta) {
                        return y;
                    }
                }
            },
            JumpSampler::Inversion { tail, eps, level } => {
                let target = (1.0 - rng.random::<f64>()) * level;
                invert_tail(tail, *eps, target)
            }
        }
    }
}

fn invert_tail(tail: &LevyTail, eps: f64, target: f64) -> f64 {
    let mut lo = eps;
    let mut hi = eps.max(1e-300) * 2.0;
    let mut guard = 0;
    while tail.raw(hi) > target && guard < 4000 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if hi - lo <= 1e-13 * hi {
            break;
        }
        if tail.raw(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Compound-Poisson approximation used by the events engine.
#[derive(Debug, Clone)]
pub struct EventDynamics {
    /// Poisson rate of the simulated jumps, `Π̄(ε)`.
    pub rate: f64,
    /// Drift including the small-jump compensation.
    pub drift: f64,
    pub epsilon: f64,
    pub compensated: bool,
    /// No jump mass was removed, so the simulation is exact.
    pub exact: bool,
    sampler: JumpSampler,
}

impl EventDynamics {
    pub fn new(spec: &SubordinatorSpec, epsilon: f64, compensate: bool) -> Result<Self> {
        spec.check_parameters()?;
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("truncation ε must be nonnegative, got {epsilon}")));
        }
        let infinite = spec.infinite_activity();
        if epsilon == 0.0 && infinite {
            return Err(Error::Precondition(
                "ε = 0 requires a finite-activity Lévy measure; pass a positive truncation".into(),
            ));
        }
        let removed = spec.small_jump_mean(epsilon)?;
        let exact = !infinite && removed == 0.0;
        let (rate, sampler) = match &spec.family {
            Family::DriftOnly => (0.0, JumpSampler::None),
            Family::Stable { alpha, .. } => (spec.tail(epsilon)?, JumpSampler::Pareto { eps: epsilon, beta: *alpha }),
            Family::Gamma { rate: b, .. } => (spec.tail(epsilon)?, JumpSampler::tempered(epsilon, 0.0, *b)),
            Family::InverseGaussian { mean, shape } => (
                spec.tail(epsilon)?,
                JumpSampler::tempered(epsilon, 0.5, shape / (2.0 * mean * mean)),
            ),
            Family::CompoundPoisson { rate, jumps } => match *jumps {
                JumpLaw::Fixed { size } if size > epsilon => (*rate, JumpSampler::Fixed(size)),
                JumpLaw::Fixed { .. } => (0.0, JumpSampler::None),
                JumpLaw::Exponential { rate: r } => (
                    rate * (-r * epsilon).exp(),
                    JumpSampler::ShiftedExp {
                        shift: epsilon,
                        rate: r,
                    },
                ),
            },
            Family::TruncatedGeneral { tail, .. } => {
                let eps = if epsilon == 0.0 {
                    tail.lower_cutoff().max(f64::MIN_POSITIVE)
                } else {
                    epsilon
                };
                let level = tail.eval(eps)?;
                (
                    level,
                    JumpSampler::Inversion {
                        tail: tail.clone(),
                        eps,
                        level,
                    },
                )
            }
        };
        let drift = spec.drift + if compensate { removed } else { 0.0 };
        Ok(EventDynamics {
            rate,
            drift,
            epsilon,
            compensated: compensate,
            exact,
            sampler,
        })
    }

    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }

    /// Waiting time to the next simulated jump (infinite when the rate is 0).
    pub fn sample_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.rate > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / self.rate
        } else {
            f64::INFINITY
        }
    }
}

/// Event-list path: `X_s = drift·s + Σ_{τ_i ≤ s} J_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventPath {
    pub times: Vec<f64>,
    pub jumps: Vec<f64>,
    /// `X_{τ_i}` (right after the jump).
    pub cumulative: Vec<f64>,
    pub drift: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub compensated: bool,
    pub exact: bool,
    pub warnings: Vec<String>,
}

impl EventPath {
    /// Builds a path from explicit events, checking every invariant.
    pub fn from_events(times: Vec<f64>, jumps: Vec<f64>, drift: f64, horizon: f64) -> Result<Self> {
        if times.len() != jumps.len() {
            return Err(Error::InvalidParameter("times and jumps differ in length".into()));
        }
        if !(horizon > 0.0) || !(drift >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need horizon > 0 and drift ≥ 0, got {horizon}, {drift}"
            )));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        let mut last_t = 0.0;
        let mut value = 0.0;
        for (&t, &j) in times.iter().zip(&jumps) {
            if !(t >= last_t && t <= horizon) {
                return Err(Error::InvalidParameter(format!("event time {t} out of order or past horizon")));
            }
            if !(j > 0.0) {
                return Err(Error::InvalidParameter(format!("jump sizes must be positive, got {j}")));
            }
            value += drift * (t - last_t) + j;
            cumulative.push(value);
            last_t = t;
        }
        Ok(EventPath {
            times,
            jumps,
            cumulative,
            drift,
            horizon,
            epsilon: 0.0,
            compensated: false,
            exact: true,
            warnings: Vec::new(),
        })
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let idx = self.times.partition_point(|&t| t <= s);
        if idx == 0 {
            self.drift * s
        } else {
            self.cumulative[idx - 1] + self.drift * (s - self.times[idx - 1])
        }
    }
}

/// Values of `X` at `0, h, 2h, …`, the last step shortened to end at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonPath {
    pub step: f64,
    pub values: Vec<f64>,
    pub horizon: f64,
}

impl SkeletonPath {
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 * self.step).min(self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "representation", rename_all = "kebab-case")]
pub enum SamplePath {
    Events(EventPath),
    Skeleton(SkeletonPath),
}

impl SamplePath {
    pub fn horizon(&self) -> f64 {
        match self {
            SamplePath::Events(p) => p.horizon,
            SamplePath::Skeleton(p) => p.horizon,
        }
    }

    pub fn value_at(&self, s: f64) -> f64 {
        match self {
            SamplePath::Events(p) => p.value_at(s),
            SamplePath::Skeleton(p) => {
                let k = ((s / p.step).floor() as usize).min(p.values.len() - 1);
                p.values[k]
            }
        }
    }

    /// Writes one record per event (or grid step) with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            SamplePath::Events(p) => {
                writeln!(out, "time,jump,cumulative")?;
                for i in 0..p.times.len() {
                    writeln!(out, "{},{},{}", p.times[i], p.jumps[i], p.cumulative[i])?;
                }
                writeln!(out, "{},0,{}", p.horizon, p.value_at(p.horizon))?;
            }
            SamplePath::Skeleton(p) => {
                writeln!(out, "time,increment,cumulative")?;
                for (k, v) in p.values.iter().enumerate() {
                    let inc = if k == 0 { 0.0 } else { v - p.values[k - 1] };
                    writeln!(out, "{},{},{}", p.time(k), inc, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Event-list path on `[0, horizon]` with small jumps truncated at `ε`.
pub fn simulate_events<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    horizon: f64,
    epsilon: f64,
    compensate: bool,
    rng: &mut R,
) -> Result<SamplePath> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let dynamics = EventDynamics::new(spec, epsilon, compensate)?;
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut t = dynamics.sample_gap(rng);
    while t <= horizon {
        times.push(t);
        jumps.push(dynamics.sample_jump(rng));
        t += dynamics.sample_gap(rng);
    }
    let mut path = EventPath::from_events(times, jumps, dynamics.drift, horizon)?;
    path.epsilon = epsilon;
    path.compensated = compensate;
    path.exact = dynamics.exact;
    if !dynamics.exact {
        path.warnings.push(format!(
            "jumps ≤ {epsilon:e} {} (rate of simulated jumps {:.4e})",
            if compensate { "replaced by their mean drift" } else { "dropped" },
            dynamics.rate
        ));
    }
    Ok(SamplePath::Events(path))
}

/// Grid skeleton of `⌈horizon/h⌉` exact increments.
pub fn simulate_skeleton<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    if !(horizon > 0.0 && step > 0.0) {
        return Err(Error::Domain(format!("need horizon > 0 and h > 0, got {horizon}, {step}")));
    }
    if let Family::TruncatedGeneral { .. } = spec.family {
        return Err(Error::Unsupported(
            "truncated-general has no exact increments; use the events engine".into(),
        ));
    }
    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut x = 0.0;
    for k in 1..=n {
        let len = if k == n { horizon - (n - 1) as f64 * step } else { step };
        x += sample_increment(spec, len, rng)?;
        values.push(x);
    }
    debug_assert!(values.windows(2).all(|w| w[1] >= w[0]));
    Ok(SamplePath::Skeleton(SkeletonPath { step, values, horizon }))
}

/// First-passage engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum Engine {
    Events { epsilon: f64, compensate: bool },
    Skeleton { step: f64 },
}

impl Engine {
    pub fn label(&self) -> String {
        match self {
            Engine::Events { epsilon, compensate } => {
                format!("events(eps={epsilon:e}{})", if *compensate { ", compensated" } else { "" })
            }
            Engine::Skeleton { step } => format!("skeleton(h={step:e})"),
        }
    }
}

/// Engine used for a sample, with its bias direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum EngineTag {
    Events { epsilon: f64, compensated: bool, exact: bool },
    Skeleton { step: f64 },
}

impl EngineTag {
    pub fn bias(&self) -> &'static str {
        match self {
            EngineTag::Events { exact: true, .. } => "exact",
            EngineTag::Events { compensated: true, .. } => "small jumps replaced by mean drift",
            EngineTag::Events { .. } => "small jumps dropped: passage times biased upward",
            EngineTag::Skeleton { .. } => "grid detection: passage times biased upward, counts downward",
        }
    }
}

/// One draw of `T_1(δ) = inf{t ≥ 0 : X_t > δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageSample {
    pub time: f64,
    /// `X_T − δ`; zero for a drift crossing.
    pub overshoot: f64,
    pub engine: EngineTag,
}

#[derive(Debug, Clone)]
enum PassageKind {
    Events(EventDynamics),
    Skeleton { spec: SubordinatorSpec, step: f64 },
}

/// Reusable first-passage sampler for a fixed `(spec, δ, engine)`.
#[derive(Debug, Clone)]
pub struct FirstPassageSampler {
    delta: f64,
    kind: PassageKind,
    tag: EngineTag,
}

impl FirstPassageSampler {
    pub fn new(spec: &SubordinatorSpec, delta: f64, engine: Engine) -> Result<Self> {
        spec.require_eligible()?;
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("δ must be positive, got {delta}")));
        }
        match engine {
            Engine::Events { epsilon, compensate } => {
                let dynamics = EventDynamics::new(spec, epsilon, compensate)?;
                if dynamics.rate == 0.0 && dynamics.drift == 0.0 {
                    return Err(Error::Precondition(format!(
                        "truncation ε = {epsilon:e} removes every jump and there is no drift; the level is never crossed"
                    )));
                }
                let tag = EngineTag::Events {
                    epsilon,
                    compensated: compensate,
                    exact: dynamics.exact,
                };
                Ok(FirstPassageSampler {
                    delta,
                    kind: PassageKind::Events(dynamics),
                    tag,
                })
            }
            Engine::Skeleton { step } => {
                if !(step > 0.0) {
                    return Err(Error::Domain(format!("skeleton step must be positive, got {step}")));
                }
                if let Family::TruncatedGeneral { .. } = spec.family {
                    return Err(Error::Unsupported(
                        "the skeleton engine needs exact increments, which truncated-general lacks".into(),
                    ));
                }
                Ok(FirstPassageSampler {
                    delta,
                    kind: PassageKind::Skeleton {
                        spec: spec.clone(),
                        step,
                    },
                    tag: EngineTag::Skeleton { step },
                })
            }
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tag(&self) -> EngineTag {
        self.tag
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FirstPassageSample {
        let delta = self.delta;
        match &self.kind {
            PassageKind::Events(dynamics) => {
                let mut level = 0.0;
                let mut time = 0.0;
                loop {
                    let gap = dynamics.sample_gap(rng);
                    if dynamics.drift > 0.0 {
                        let to_cross = (delta - level) / dynamics.drift;
                        if to_cross < gap {
                            return FirstPassageSample {
                                time: time + to_cross,
                                overshoot: 0.0,
                                engine: self.tag,
                            };
                        }
                    }
                    time += gap;
                    level += dynamics.drift * gap + dynamics.sample_jump(rng);
                    if level > delta {
                        return FirstPassageSample {
                            time,
                            overshoot: level - delta,
                            engine: self.tag,
                        };
                    }
                }
            }
            PassageKind::Skeleton { spec, step } => {
                let mut level = 0.0;
                let mut k: u64 = 0;
                loop {
                    // sample_increment only fails on invalid specs, excluded at construction
                    level += sample_increment(spec, *step, rng).unwrap_or(0.0);
                    k += 1;
                    if level > delta {
                        return FirstPassageSample {
                            time: k as f64 * step,
                            overshoot: level - delta,
                            engine: self.tag,
                        };
                    }
                }
            }
        }
    }
}

/// One draw of the first passage time above `δ`.
pub fn sample_first_passage<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    delta: f64,
    engine: Engine,
    rng: &mut R,
) -> Result<FirstPassageSample> {
    Ok(FirstPassageSampler::new(spec, delta, engine)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{ks_critical_one_sample, ks_critical_two_sample, ks_one_sample, ks_two_sample, Summary};

    fn rng(i: u64) -> crate::rng::StreamRng {
        RngStream::new(2024, i).rng()
    }

    #[test]
    fn zero_length_increment_is_zero() {
        let mut r = rng(0);
        for spec in [
            SubordinatorSpec::stable(0.5),
            SubordinatorSpec::gamma(2.0, 1.0),
            SubordinatorSpec::inverse_gaussian(1.0, 1.0),
        ] {
            assert_eq!(sample_increment(&spec, 0.0, &mut r).unwrap(), 0.0);
        }
    }

    #[test]
    fn kanter_sampler_laplace_transform() {
        // E e^{−λS} = e^{−λ^α}
        let mut r = rng(1);
        for &alpha in &[0.3, 0.5, 0.8] {
            let n = 100_000;
            let mut s = Summary::new();
            for _ in 0..n {
                s.push((-sample_positive_stable(alpha, &mut r)).exp());
            }
            let expected = (-1.0f64).exp();
            assert!((s.mean() - expected).abs() < 4.0 * s.stderr(), "alpha = {alpha}");
        }
    }

    #[test]
    fn gamma_increment_mean() {
        let spec = SubordinatorSpec::gamma(2.0, 1.0);
        let mut r = rng(2);
        let mut s = Summary::new();
        for _ in 0..100_000 {
            s.push(sample_increment(&spec, 1.0, &mut r).unwrap());
        }
        assert!((s.mean() - 2.0).abs() < 3.0 * s.stderr());
    }

    #[test]
    fn inverse_gaussian_increment_moments() {
        // X_h ~ IG(μh, νh²): mean μh, variance μ³h/ν
        let spec = SubordinatorSpec::inverse_gaussian(1.5, 2.0);
        let mut r = rng(3);
        for &h in &[1e-3, 0.2, 3.0] {
            let mut s = Summary::new();
            for _ in 0..100_000 {
                s.push(sample_increment(&spec, h, &mut r).unwrap());
            }
            assert!((s.mean() - 1.5 * h).abs() < 4.0 * s.stderr(), "h = {h}");
            if h >= 0.2 {
                // the variance estimate is only stable when the law is not too skewed
                let var = 1.5f64.powi(3) * h / 2.0;
                assert!((s.variance() / var - 1.0).abs() < 0.1, "h = {h}");
            }
        }
    }

    #[test]
    fn stable_self_similarity() {
        // X_h and h^{1/α} X_1 agree in law
        let spec = SubordinatorSpec::stable(0.5);
        let mut r = rng(4);
        let h = 0.3;
        let n = 10_000;
        let a: Vec<f64> = (0..n).map(|_| sample_increment(&spec, h, &mut r).unwrap()).collect();
        let b: Vec<f64> = (0..n)
            .map(|_| h * h * sample_increment(&spec, 1.0, &mut r).unwrap())
            .collect();
        let d = ks_two_sample(&a, &b);
        assert!(d < ks_critical_two_sample(n, n, 0.01), "D = {d}");
    }

    #[test]
    fn compound_poisson_jump_count_mean() {
        let spec = SubordinatorSpec::compound_poisson(1.0, JumpLaw::Exponential { rate: 2.0 }, 0.0);
        let mut r = rng(5);
        let mut s = Summary::new();
        for _ in 0..10_000 {
            match simulate_events(&spec, 10.0, 0.0, false, &mut r).unwrap() {
                SamplePath::Events(p) => s.push(p.times.len() as f64),
                _ => unreachable!(),
            }
        }
        assert!((s.mean() - 10.0).abs() < 3.0 * s.stderr());
    }

    #[test]
    fn drift_only_event_path() {
        let spec = SubordinatorSpec::drift_only(2.0);
        let path = simulate_events(&spec, 3.0, 0.0, false, &mut rng(6)).unwrap();
        match &path {
            SamplePath::Events(p) => {
                assert!(p.times.is_empty());
                assert!(p.exact);
            }
            _ => unreachable!(),
        }
        assert_eq!(path.value_at(3.0), 6.0);
    }

    #[test]
    fn stable_truncation_rate() {
        let spec = SubordinatorSpec::stable(0.5);
        let dynamics = EventDynamics::new(&spec, 1e-4, true).unwrap();
        assert!((dynamics.rate - 56.418_958_354_775_63).abs() < 1e-9);
        assert!(!dynamics.exact);
        // ∫_0^ε xΠ(dx) = α/Γ(1−α)·ε^{1−α}/(1−α)
        assert!((dynamics.drift - 1e-2 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_truncation_needs_finite_activity() {
        let mut r = rng(7);
        assert!(matches!(
            simulate_events(&SubordinatorSpec::stable(0.5), 1.0, 0.0, true, &mut r),
            Err(Error::Precondition(_))
        ));
    }

    fn restricted_jump_check(spec: &SubordinatorSpec, eps: f64, probes: &[f64]) {
        // P(J > x | J > ε) = Π̄(x)/Π̄(ε)
        let dynamics = EventDynamics::new(spec, eps, false).unwrap();
        let mut r = rng(8);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| dynamics.sample_jump(&mut r)).collect();
        assert!(draws.iter().all(|&j| j > eps));
        let base = spec.tail(eps).unwrap();
        for &x in probes {
            let p = spec.tail(x).unwrap() / base;
            let emp = draws.iter().filter(|&&j| j > x).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-4);
            assert!((emp - p).abs() < 4.5 * se, "{} ε={eps} x={x}: {emp} vs {p}", spec.summary());
        }
    }

    #[test]
    fn restricted_jump_laws() {
        restricted_jump_check(&SubordinatorSpec::stable(0.7), 1e-3, &[2e-3, 1e-2, 0.1]);
        restricted_jump_check(&SubordinatorSpec::gamma(1.0, 1.0), 1e-6, &[1e-5, 1e-3, 0.1, 1.0, 3.0]);
        restricted_jump_check(&SubordinatorSpec::gamma(1.0, 2.0), 2.0, &[2.1, 2.5, 3.0]);
        restricted_jump_check(&SubordinatorSpec::inverse_gaussian(1.0, 1.0), 1e-4, &[1e-3, 0.1, 1.0, 4.0]);
        restricted_jump_check(
            &SubordinatorSpec::compound_poisson(1.0, JumpLaw::Exponential { rate: 2.0 }, 1.0),
            0.1,
            &[0.2, 0.5, 1.0],
        );
        let tg = SubordinatorSpec::new(
            0.0,
            Family::TruncatedGeneral {
                tail: LevyTail::new(|x: f64| x.powf(-0.4) * (-x).exp()),
                truncation: 1e-3,
            },
        );
        restricted_jump_check(&tg, 1e-3, &[1e-2, 0.1, 1.0]);
    }

    #[test]
    fn skeleton_drift_grid() {
        let path = simulate_skeleton(&SubordinatorSpec::drift_only(1.0), 1.0, 0.25, &mut rng(9)).unwrap();
        match path {
            SamplePath::Skeleton(p) => assert_eq!(p.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn skeleton_endpoint_matches_single_increment() {
        let spec = SubordinatorSpec::gamma(1.5, 2.0);
        let mut r = rng(10);
        let n = 10_000;
        let ends: Vec<f64> = (0..n)
            .map(|_| {
                let p = simulate_skeleton(&spec, 1.0, 0.1, &mut r).unwrap();
                p.value_at(1.0)
            })
            .collect();
        let singles: Vec<f64> = (0..n).map(|_| sample_increment(&spec, 1.0, &mut r).unwrap()).collect();
        assert!(ks_two_sample(&ends, &singles) < ks_critical_two_sample(n, n, 0.01));
    }

    #[test]
    fn skeletons_are_nondecreasing() {
        let mut r = rng(11);
        for spec in [
            SubordinatorSpec::stable(0.5),
            SubordinatorSpec::gamma(1.0, 1.0),
            SubordinatorSpec::inverse_gaussian(1.0, 0.1),
            SubordinatorSpec::compound_poisson(3.0, JumpLaw::Fixed { size: 0.2 }, 0.0),
        ] {
            for &h in &[0.01, 0.005] {
                if let SamplePath::Skeleton(p) = simulate_skeleton(&spec, 2.0, h, &mut r).unwrap() {
                    assert!(p.values.windows(2).all(|w| w[1] >= w[0]));
                    assert_eq!(p.values[0], 0.0);
                }
            }
        }
    }

    #[test]
    fn truncated_general_has_no_skeleton() {
        let tg = SubordinatorSpec::new(
            1.0,
            Family::TruncatedGeneral {
                tail: LevyTail::new(|x: f64| (-x).exp()),
                truncation: 1e-3,
            },
        );
        assert!(matches!(
            simulate_skeleton(&tg, 1.0, 0.1, &mut rng(12)),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(sample_increment(&tg, 0.1, &mut rng(12)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn drift_only_passage_is_exact() {
        let s = sample_first_passage(
            &SubordinatorSpec::drift_only(1.0),
            0.25,
            Engine::Events {
                epsilon: 0.0,
                compensate: false,
            },
            &mut rng(13),
        )
        .unwrap();
        assert_eq!(s.time, 0.25);
        assert_eq!(s.overshoot, 0.0);
        assert_eq!(s.engine.bias(), "exact");
    }

    #[test]
    fn compound_poisson_passage_law() {
        // T_1(δ) = min(Exp(c), δ/d) for a fixed jump exceeding δ
        let spec = SubordinatorSpec::compound_poisson(1.0, JumpLaw::Fixed { size: 1.0 }, 1.0);
        let sampler = FirstPassageSampler::new(
            &spec,
            0.5,
            Engine::Events {
                epsilon: 0.0,
                compensate: false,
            },
        )
        .unwrap();
        let mut r = rng(14);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut r).time).collect();
        let s = Summary::from_slice(&draws);
        let expected = 1.0 - (-0.5f64).exp();
        assert!((s.mean() - expected).abs() < 3.0 * s.stderr());
        let cdf = |t: f64| if t >= 0.5 { 1.0 } else { 1.0 - (-t).exp() };
        let d = ks_one_sample(&draws[..10_000], cdf);
        assert!(d < ks_critical_one_sample(10_000, 0.01), "D = {d}");
    }

    #[test]
    fn stable_half_passage_law() {
        // for α = 1/2, T_1(δ) has the law of √(2δ)·|Z|, Z standard normal
        let spec = SubordinatorSpec::stable(0.5);
        let delta = 0.01;
        let sampler = FirstPassageSampler::new(
            &spec,
            delta,
            Engine::Events {
                epsilon: 1e-5,
                compensate: true,
            },
        )
        .unwrap();
        let mut r = rng(15);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut r).time).collect();
        let s = Summary::from_slice(&draws);
        let expected = delta.sqrt() / crate::special::gamma(1.5);
        assert!((expected - 0.112_838).abs() < 1e-6);
        assert!((s.mean() - expected).abs() < 3.0 * s.stderr(), "{} vs {expected}", s.mean());
        let scale = (2.0 * delta).sqrt();
        let cdf = |t: f64| 2.0 * crate::special::norm_cdf(t / scale) - 1.0;
        assert!(ks_one_sample(&draws, cdf) < ks_critical_one_sample(n, 0.01));
    }

    #[test]
    fn skeleton_passage_biased_upward() {
        let spec = SubordinatorSpec::gamma(1.0, 1.0);
        let mut r = rng(16);
        let coarse = FirstPassageSampler::new(&spec, 0.1, Engine::Skeleton { step: 0.05 }).unwrap();
        let exactish = FirstPassageSampler::new(
            &spec,
            0.1,
            Engine::Events {
                epsilon: 1e-9,
                compensate: true,
            },
        )
        .unwrap();
        let a = Summary::from_iter((0..20_000).map(|_| coarse.sample(&mut r).time));
        let b = Summary::from_iter((0..20_000).map(|_| exactish.sample(&mut r).time));
        assert!(a.mean() > b.mean());
        assert!(coarse.tag().bias().contains("upward"));
    }

    #[test]
    fn passage_rejects_ineligible() {
        let cp = SubordinatorSpec::compound_poisson(1.0, JumpLaw::Fixed { size: 1.0 }, 0.0);
        let e = sample_first_passage(
            &cp,
            0.5,
            Engine::Events {
                epsilon: 0.0,
                compensate: false,
            },
            &mut rng(17),
        );
        assert!(matches!(e, Err(Error::Ineligible(_))));
    }

    #[test]
    fn reproducible_paths() {
        let spec = SubordinatorSpec::stable(0.6);
        let a = simulate_events(&spec, 1.0, 1e-3, true, &mut RngStream::new(5, 9).rng()).unwrap();
        let b = simulate_events(&spec, 1.0, 1e-3, true, &mut RngStream::new(5, 9).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_refinement_consistency() {
        // E e^{−X_1} is the same at ε and ε/10 within 3 combined standard errors
        let spec = SubordinatorSpec::stable(0.5);
        let n = 100_000;
        let estimate = |eps: f64, idx: u64| {
            let dynamics = EventDynamics::new(&spec, eps, true).unwrap();
            let mut r = rng(idx);
            Summary::from_iter((0..n).map(|_| {
                let mut x = dynamics.drift;
                let mut t = dynamics.sample_gap(&mut r);
                while t <= 1.0 {
                    x += dynamics.sample_jump(&mut r);
                    t += dynamics.sample_gap(&mut r);
                }
                (-x).exp()
            }))
        };
        let a = estimate(1e-3, 18);
        let b = estimate(1e-4, 19);
        let se = (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        assert!((a.mean() - b.mean()).abs() < 3.0 * se);
        assert!((b.mean() - (-1.0f64).exp()).abs() < 4.0 * b.stderr());
    }

    #[test]
    fn path_csv_has_header_and_rows() {
        let path = SamplePath::Events(EventPath::from_events(vec![0.5], vec![5.0], 0.0, 1.0).unwrap());
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time,jump,cumulative\n0.5,5,5\n1,0,5\n");
    }

    #[test]
    fn event_path_rejects_bad_events() {
        assert!(EventPath::from_events(vec![0.5, 0.2], vec![1.0, 1.0], 0.0, 1.0).is_err());
        assert!(EventPath::from_events(vec![0.5], vec![0.0], 0.0, 1.0).is_err());
        assert!(EventPath::from_events(vec![1.5], vec![1.0], 0.0, 1.0).is_err());
    }
}

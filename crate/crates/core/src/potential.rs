//! The potential function `U(δ) = E[T_1(δ)] = ∫_0^∞ P(X_t ≤ δ) dt` and its
//! discounted version `U_q(δ) = ∫_0^∞ e^{−qt} P(X_t ≤ δ) dt = (1 − E e^{−qT_1(δ)})/q`.
//!
//! Evaluators:
//!
//! | method                | applies to                         | error          |
//! |-----------------------|------------------------------------|----------------|
//! | `monte-carlo`         | any eligible spec                  | CLT stderr     |
//! | `q-identity`          | any eligible spec, `q > 0`         | CLT stderr     |
//! | `skeleton-occupation` | specs with exact increments, `q>0` | CLT stderr     |
//! | `series`              | `d > 0`                            | truncation + grid |
//! | `asymptotic`          | declared regular variation         | exact only for pure stable / drift |
//! | `marginal-quadrature` | gamma, inverse Gaussian            | quadrature     |

use serde::Serialize;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::model::{Family, SubordinatorSpec};
use crate::quad;
use crate::rng::{replicate, RngStream};
use crate::simulate::{sample_increment, Engine, FirstPassageSampler};
use crate::special::{gamma, ln_norm_sf, norm_cdf};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialMethod {
    MonteCarlo,
    QIdentity,
    SkeletonOccupation,
    Series,
    Asymptotic,
    MarginalQuadrature,
}

impl PotentialMethod {
    pub fn label(&self) -> &'static str {
        match self {
            PotentialMethod::MonteCarlo => "monte-carlo",
            PotentialMethod::QIdentity => "q-identity",
            PotentialMethod::SkeletonOccupation => "skeleton-occupation",
            PotentialMethod::Series => "series",
            PotentialMethod::Asymptotic => "asymptotic",
            PotentialMethod::MarginalQuadrature => "marginal-quadrature",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            PotentialMethod::Series | PotentialMethod::Asymptotic | PotentialMethod::MarginalQuadrature
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialEstimate {
    pub delta: f64,
    pub q: f64,
    pub value: f64,
    /// Standard error for Monte-Carlo methods, an error bound for deterministic ones.
    pub stderr: f64,
    pub method: PotentialMethod,
    pub replicas: Option<u64>,
    /// Grid step of series / occupation methods.
    pub resolution: Option<f64>,
    /// The value is exact up to floating point.
    pub exact: bool,
    pub flags: Vec<String>,
}

impl PotentialEstimate {
    fn deterministic(delta: f64, value: f64, error: f64, method: PotentialMethod) -> Self {
        PotentialEstimate {
            delta,
            q: 0.0,
            value,
            stderr: error,
            method,
            replicas: None,
            resolution: None,
            exact: false,
            flags: Vec::new(),
        }
    }

    pub const CSV_HEADER: &'static str = "delta,method,value,stderr";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.delta, self.method.label(), self.value, self.stderr)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("δ must be positive and finite, got {delta}")))
    }
}

/// `U(δ)` as the sample mean of first-passage times.
pub fn potential_mc(
    spec: &SubordinatorSpec,
    delta: f64,
    replicas: u64,
    engine: Engine,
    stream: &RngStream,
) -> Result<PotentialEstimate> {
    if replicas < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicas, got {replicas}")));
    }
    let sampler = FirstPassageSampler::new(spec, delta, engine)?;
    let times = replicate(stream, replicas, |_, rng| sampler.sample(rng).time);
    let s = Summary::from_slice(&times);
    let mut flags = Vec::new();
    if sampler.tag().bias() != "exact" {
        flags.push(sampler.tag().bias().to_string());
    }
    Ok(PotentialEstimate {
        delta,
        q: 0.0,
        value: s.mean(),
        stderr: s.stderr(),
        method: PotentialMethod::MonteCarlo,
        replicas: Some(replicas),
        resolution: None,
        exact: false,
        flags,
    })
}

/// Two independent estimates of `U_q(δ)`.
///
/// The first integrates `e^{−qt}·1{X_t ≤ δ}` over a skeleton of step `step`
/// (trapezoid rule, one skeleton per replica); the second is `(1 − mean e^{−qT})/q`
/// from first-passage samples of `engine`. They share only increment sampling
/// when `engine` is itself a skeleton.
pub fn potential_q_two_ways(
    spec: &SubordinatorSpec,
    delta: f64,
    q: f64,
    replicas: u64,
    step: f64,
    engine: Engine,
    stream: &RngStream,
) -> Result<(PotentialEstimate, PotentialEstimate)> {
    check_delta(delta)?;
    if !(q > 0.0) {
        return Err(Error::Domain(format!(
            "q-potentials need q > 0, got {q}; use the Monte-Carlo potential for q = 0"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("occupation step must be positive, got {step}")));
    }
    spec.require_eligible()?;
    // validate exact increments once before fanning out
    sample_increment(spec, step, &mut stream.substream(u64::MAX).rng())?;

    let occupation = replicate(&stream.substream(0), replicas, |_, rng| {
        let mut x = 0.0;
        let mut k: u64 = 0;
        let mut acc = 0.5;
        loop {
            k += 1;
            // sample_increment was validated above
            x += sample_increment(spec, step, rng).unwrap_or(f64::INFINITY);
            if x > delta {
                break;
            }
            acc += (-q * k as f64 * step).exp();
        }
        acc * step
    });
    let a = Summary::from_slice(&occupation);

    let sampler = FirstPassageSampler::new(spec, delta, engine)?;
    let discounts = replicate(&stream.substream(1), replicas, |_, rng| (-q * sampler.sample(rng).time).exp());
    let b = Summary::from_slice(&discounts);

    let est_a = PotentialEstimate {
        delta,
        q,
        value: a.mean(),
        stderr: a.stderr(),
        method: PotentialMethod::SkeletonOccupation,
        replicas: Some(replicas),
        resolution: Some(step),
        exact: false,
        flags: vec![],
    };
    let est_b = PotentialEstimate {
        delta,
        q,
        value: (1.0 - b.mean()) / q,
        stderr: b.stderr() / q,
        method: PotentialMethod::QIdentity,
        replicas: Some(replicas),
        resolution: None,
        exact: false,
        flags: vec![],
    };
    Ok((est_a, est_b))
}

/// Cell integrals `∫ Π̄` and `∫ s·Π̄` (with `s` the position within the cell) on a uniform grid.
fn cell_moments(spec: &SubordinatorSpec, h: f64, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Family::DriftOnly = spec.family {
        return Ok((vec![0.0; cells], vec![0.0; cells]));
    }
    let tail = spec.levy_tail();
    let f = |x: f64| tail.raw(x);
    let mut m0 = Vec::with_capacity(cells);
    let mut m1 = Vec::with_capacity(cells);
    for j in 0..cells {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        let (v0, v1) = if j == 0 {
            (
                quad::integrate_from_zero(f, b, 1e-11)?.value,
                quad::integrate_from_zero(|x| f(x) * x / h, b, 1e-11)?.value,
            )
        } else {
            (
                quad::integrate(f, a, b, 1e-11)?.value,
                quad::integrate(|x| f(x) * (x - a) / h, a, b, 1e-11)?.value,
            )
        };
        m0.push(v0);
        m1.push(v1);
    }
    Ok((m0, m1))
}

struct SeriesPass {
    values: Vec<f64>,
    last_term: f64,
    terms: usize,
    converged: bool,
    monotone: bool,
}

/// Sums the alternating convolution series on a uniform grid of `cells` cells
/// over `[0, xmax]`, evaluating it at `points`.
fn series_pass(spec: &SubordinatorSpec, points: &[f64], xmax: f64, cells: usize, tol: f64) -> Result<SeriesPass> {
    const MAX_TERMS: usize = 400;
    let d = spec.drift;
    let h = xmax / cells as f64;
    let (m0, m1) = cell_moments(spec, h, cells)?;
    let w0: Vec<f64> = m0.iter().zip(&m1).map(|(a, b)| a - b).collect();

    // ∫_0^x g for a piecewise-linear g given on the grid
    let integral_at = |g: &[f64], x: f64| -> f64 {
        let pos = (x / h).min(cells as f64);
        let i = (pos.floor() as usize).min(cells - 1);
        let s = pos - i as f64;
        let mut acc = 0.0;
        for k in 0..i {
            acc += 0.5 * (g[k] + g[k + 1]);
        }
        (acc + s * g[i] + 0.5 * s * s * (g[i + 1] - g[i])) * h
    };

    // g holds g_n / d^n so that high-order terms neither overflow nor underflow early
    let mut g = vec![1.0; cells + 1];
    let mut values: Vec<f64> = points.iter().map(|&x| x / d).collect();
    let mut prev_sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut monotone = true;
    for n in 1..=MAX_TERMS {
        let mut next = vec![0.0; cells + 1];
        for k in 1..=cells {
            let mut acc = 0.0;
            for j in 0..k {
                acc += w0[j] * g[k - j] + m1[j] * g[k - j - 1];
            }
            next[k] = acc / d;
        }
        g = next;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut sup = 0.0f64;
        for (v, &x) in values.iter_mut().zip(points) {
            let term = integral_at(&g, x) / d;
            *v += sign * term;
            sup = sup.max(term.abs());
        }
        if !sup.is_finite() {
            return Err(Error::Numerical("convolution series overflowed".into()));
        }
        let decreasing = sup < prev_sup || sup == 0.0;
        if !decreasing {
            monotone = false;
        }
        if decreasing && sup < tol {
            return Ok(SeriesPass {
                values,
                last_term: sup,
                terms: n,
                converged: true,
                monotone,
            });
        }
        prev_sup = sup;
    }
    Ok(SeriesPass {
        values,
        last_term: prev_sup,
        terms: MAX_TERMS,
        converged: false,
        monotone,
    })
}

/// `U(x) = Σ_{n≥0} (−1)^n d^{−(n+1)} ∫_0^x (1 ∗ Π̄^{∗n})(y) dy` on a uniform grid of step `step`.
///
/// Iterated convolutions use product integration (cell integrals of `Π̄` by
/// quadrature, so an integrable singularity at 0 is absorbed). The error is the
/// last term kept (valid as an alternating-series bound once terms decrease)
/// plus a discretisation estimate from a second pass at double step.
pub fn potential_series(spec: &SubordinatorSpec, deltas: &[f64], step: f64, tol: f64) -> Result<Vec<PotentialEstimate>> {
    spec.check_parameters()?;
    if !(spec.drift > 0.0) {
        return Err(Error::Precondition(
            "the convolution series needs a positive drift d".into(),
        ));
    }
    if deltas.is_empty() {
        return Ok(Vec::new());
    }
    for &x in deltas {
        check_delta(x)?;
    }
    if !(step > 0.0 && tol > 0.0) {
        return Err(Error::Domain(format!("need step > 0 and tol > 0, got {step}, {tol}")));
    }
    let xmax = deltas.iter().cloned().fold(0.0, f64::max);
    let mut cells = (xmax / step - 1e-9).ceil().max(2.0) as usize;
    if cells % 2 == 1 {
        cells += 1;
    }
    let fine = series_pass(spec, deltas, xmax, cells, tol)?;
    let coarse = if matches!(spec.family, Family::DriftOnly) {
        None
    } else {
        Some(series_pass(spec, deltas, xmax, cells / 2, tol)?)
    };
    let h = xmax / cells as f64;
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let grid_error = coarse.as_ref().map_or(0.0, |c| (fine.values[i] - c.values[i]).abs() / 3.0);
            let mut est = PotentialEstimate::deterministic(x, fine.values[i], fine.last_term + grid_error, PotentialMethod::Series);
            est.resolution = Some(h);
            est.exact = coarse.is_none();
            if !fine.converged {
                est.flags.push(format!(
                    "series did not settle within {} terms; last term {:.3e}",
                    fine.terms, fine.last_term
                ));
            } else if !fine.monotone {
                est.flags.push("terms grew before decreasing; remainder bound applies to the tail only".into());
            }
            est
        })
        .collect())
}

/// `1/(Γ(1+α)·Φ(1/δ))` for a spec with declared regular-variation index `α`.
pub fn potential_asymptotic(spec: &SubordinatorSpec, delta: f64) -> Result<PotentialEstimate> {
    check_delta(delta)?;
    let rv = spec.regular_variation().ok_or_else(|| {
        Error::Unsupported(format!("{} declares no regular-variation index", spec.family.name()))
    })?;
    let value = 1.0 / (gamma(1.0 + rv.index) * spec.phi(1.0 / delta)?);
    let mut est = PotentialEstimate::deterministic(delta, value, 0.0, PotentialMethod::Asymptotic);
    est.exact = rv.exact_potential;
    if !rv.exact_potential {
        est.stderr = f64::NAN;
        est.flags.push(if rv.index == 0.0 {
            "asymptotic only; slowly varying, slow convergence".into()
        } else {
            "asymptotic only".into()
        });
    }
    Ok(est)
}

/// `U(δ) = ∫_0^∞ P(X_t ≤ δ) dt` by quadrature of the marginal distribution function
/// (gamma and inverse-Gaussian families, any drift).
pub fn potential_quadrature(spec: &SubordinatorSpec, delta: f64) -> Result<PotentialEstimate> {
    check_delta(delta)?;
    spec.check_parameters()?;
    let d = spec.drift;
    let cdf: Box<dyn Fn(f64, f64) -> f64> = match spec.family {
        Family::Gamma { shape, rate } => Box::new(move |t: f64, y: f64| gamma_lr(shape * t, rate * y)),
        Family::InverseGaussian { mean, shape } => Box::new(move |t: f64, y: f64| {
            let m = mean * t;
            let lam = shape * t * t;
            let r = (lam / y).sqrt();
            let first = norm_cdf(r * (y / m - 1.0));
            let second = (2.0 * lam / m + ln_norm_sf(r * (y / m + 1.0))).exp();
            (first + second).min(1.0)
        }),
        _ => {
            return Err(Error::Unsupported(format!(
                "marginal quadrature is available for gamma and inverse-gaussian, not {}",
                spec.family.name()
            )))
        }
    };
    let integrand = |t: f64| {
        let room = delta - d * t;
        if t <= 0.0 {
            1.0
        } else if room <= 0.0 {
            0.0
        } else {
            cdf(t, room)
        }
    };
    let q = if d > 0.0 {
        quad::integrate(integrand, 0.0, delta / d, 1e-10)?
    } else {
        quad::integrate_to_infinity(integrand, 0.0, 1e-10)?
    };
    Ok(PotentialEstimate::deterministic(
        delta,
        q.value,
        q.error.max(q.value * 1e-9),
        PotentialMethod::MarginalQuadrature,
    ))
}

/// Default series grid: 2000 cells up to δ.
pub const SERIES_CELLS: f64 = 2000.0;
pub const SERIES_TOL: f64 = 1e-12;

/// The most accurate deterministic evaluator available for the spec.
pub fn potential_best(spec: &SubordinatorSpec, delta: f64) -> Result<PotentialEstimate> {
    check_delta(delta)?;
    match (&spec.family, spec.drift > 0.0) {
        (Family::DriftOnly, _) | (Family::Stable { .. }, false) => potential_asymptotic(spec, delta),
        (Family::Gamma { .. }, _) | (Family::InverseGaussian { .. }, _) => potential_quadrature(spec, delta),
        (_, true) => match potential_series(spec, &[delta], delta / SERIES_CELLS, SERIES_TOL * delta) {
            Ok(mut v) => Ok(v.remove(0)),
            Err(Error::Numerical(m)) => Err(Error::Unsupported(format!(
                "{m} for {} at δ = {delta:e}; use the Monte-Carlo estimator",
                spec.summary()
            ))),
            Err(e) => Err(e),
        },
        _ => Err(Error::Unsupported(format!(
            "no deterministic potential for {}; use the Monte-Carlo estimator",
            spec.summary()
        ))),
    }
}

/// Evaluates `U(δ)` with a named deterministic method.
pub fn potential_with(spec: &SubordinatorSpec, delta: f64, method: Option<PotentialMethod>) -> Result<PotentialEstimate> {
    match method {
        None => potential_best(spec, delta),
        Some(PotentialMethod::Asymptotic) => potential_asymptotic(spec, delta),
        Some(PotentialMethod::MarginalQuadrature) => potential_quadrature(spec, delta),
        Some(PotentialMethod::Series) => {
            let mut v = potential_series(spec, &[delta], delta / SERIES_CELLS, SERIES_TOL * delta)?;
            Ok(v.remove(0))
        }
        Some(m) => Err(Error::Unsupported(format!(
            "{} is stochastic; δ-grids need a deterministic evaluator",
            m.label()
        ))),
    }
}

/// Levels `δ_j` with `U(δ_j) = r^j`, `j = 1..=j_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaGrid {
    pub ratio: f64,
    pub levels: Vec<f64>,
    /// `U(δ_j)` as recomputed by the evaluator.
    pub potentials: Vec<f64>,
    pub method: PotentialMethod,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

/// Solves `U(δ_j) = r^j` by bisection in `ln δ` to relative tolerance 1e−3.
pub fn solve_delta_grid(
    spec: &SubordinatorSpec,
    ratio: f64,
    j_max: usize,
    method: Option<PotentialMethod>,
) -> Result<DeltaGrid> {
    const TOL: f64 = 1e-3;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("grid ratio must lie in (0, 1), got {ratio}")));
    }
    let u = |delta: f64| potential_with(spec, delta, method);
    let probe = u(1.0)?;
    let used = probe.method;
    let mut levels = Vec::new();
    let mut potentials = Vec::new();
    let mut warnings = Vec::new();
    let mut hi = 1.0f64;
    let mut u_hi = probe.value;
    'levels: for j in 1..=j_max {
        let target = ratio.powi(j as i32);
        // bracket: U(lo) < target ≤ U(hi)
        while u_hi < target {
            hi *= 4.0;
            if hi > 1e300 {
                warnings.push(format!("level r^{j} = {target:e} not reached; grid truncated"));
                break 'levels;
            }
            u_hi = u(hi)?.value;
        }
        let mut lo = hi / 4.0;
        let mut u_lo = match u(lo) {
            Ok(e) => e.value,
            Err(e) => {
                warnings.push(format!("evaluator failed below δ = {hi:e} ({e}); grid truncated at j = {j}"));
                break;
            }
        };
        while u_lo >= target {
            hi = lo;
            u_hi = u_lo;
            lo /= 4.0;
            if lo < 1e-300 {
                warnings.push(format!("level r^{j} = {target:e} below the evaluator's range; grid truncated"));
                break 'levels;
            }
            u_lo = match u(lo) {
                Ok(e) => e.value,
                Err(e) => {
                    warnings.push(format!("evaluator failed at δ = {lo:e} ({e}); grid truncated at j = {j}"));
                    break 'levels;
                }
            };
        }
        let (mut a, mut b) = (lo, hi);
        let mut best = (hi, u_hi);
        for _ in 0..200 {
            let mid = (a * b).sqrt();
            let v = u(mid)?.value;
            if (v / target - 1.0).abs() < (best.1 / target - 1.0).abs() {
                best = (mid, v);
            }
            if (v / target - 1.0).abs() < TOL * 0.05 || b / a - 1.0 < 1e-14 {
                break;
            }
            if v < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        if (best.1 / target - 1.0).abs() > TOL {
            warnings.push(format!("level j = {j} solved only to {:.2e}", best.1 / target - 1.0));
        }
        levels.push(best.0);
        potentials.push(best.1);
        hi = best.0;
        u_hi = best.1;
    }
    Ok(DeltaGrid {
        ratio,
        levels,
        potentials,
        method: used,
        tolerance: TOL,
        warnings,
    })
}

/// Explicit two-sided band `c_lo/Φ(1/δ) ≤ U(δ) ≤ c_hi/Φ(1/δ)` valid for every subordinator.
pub const POTENTIAL_LOWER_CONSTANT: f64 = 0.418_023_293_130_673_55;
pub const POTENTIAL_UPPER_CONSTANT: f64 = std::f64::consts::E;

/// `(1 − 2/e)/(1 − 1/e)`.
pub fn lower_band_constant() -> f64 {
    let e = std::f64::consts::E;
    (1.0 - 2.0 / e) / (1.0 - 1.0 / e)
}

/// `(lower, upper)` bounds on `U(δ)` from the band constants.
pub fn potential_band(spec: &SubordinatorSpec, delta: f64) -> Result<(f64, f64)> {
    let phi = spec.phi(1.0 / delta)?;
    Ok((POTENTIAL_LOWER_CONSTANT / phi, POTENTIAL_UPPER_CONSTANT / phi))
}

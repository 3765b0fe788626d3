//! Subordinator specifications: drift plus a Lévy-measure family.
//!
//! Every family is normalised through its Laplace exponent
//! `Φ(λ) = dλ + ∫(1 − e^{−λy}) Π(dy)`, with `E[e^{−λX_t}] = e^{−tΦ(λ)}`.
//!
//! | family | Φ(λ) − dλ | Π̄(x) |
//! |---|---|---|
//! | stable(α, σ) | σλ^α | σx^{−α}/Γ(1−α) |
//! | gamma(a, b) | a·ln(1 + λ/b) | a·E₁(bx) |
//! | inverse Gaussian(μ, ν) | (ν/μ)(√(1 + 2μ²λ/ν) − 1) | see [`ig_tail`] |
//! | compound Poisson(c, J) | c(1 − E e^{−λJ}) | c·P(J > x) |
//!
//! The stable family is pinned to unit scale by default (`Φ(λ) = λ^α`); a scale
//! `σ` multiplies Φ and divides the potential `U` by the same factor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{erf, erfc, erfcx, exp_int_e1, gamma};

/// Jump-size law of a compound Poisson family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum JumpLaw {
    Fixed { size: f64 },
    Exponential { rate: f64 },
}

impl JumpLaw {
    fn laplace(&self, lambda: f64) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => (-lambda * size).exp(),
            JumpLaw::Exponential { rate } => rate / (rate + lambda),
        }
    }

    fn survival(&self, x: f64) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => {
                if x < size {
                    1.0
                } else {
                    0.0
                }
            }
            JumpLaw::Exponential { rate } => (-rate * x).exp(),
        }
    }

    /// `E[J; J ≤ ε]`
    fn truncated_mean(&self, eps: f64) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => {
                if size <= eps {
                    size
                } else {
                    0.0
                }
            }
            JumpLaw::Exponential { rate } => {
                let z = rate * eps;
                (1.0 - (-z).exp() * (1.0 + z)) / rate
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Fixed { size } => size,
            JumpLaw::Exponential { rate } => 1.0 / rate,
        }
    }
}

/// Caller-supplied Lévy tail `x ↦ Π̄(x) = Π(x, ∞)`.
#[derive(Clone)]
pub struct LevyTail {
    handle: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lower_cutoff: f64,
}

impl LevyTail {
    /// Tail valid for every `x > 0`.
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_cutoff(f, 0.0)
    }

    /// Tail valid for `x > lower_cutoff`.
    pub fn with_cutoff<F>(f: F, lower_cutoff: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        LevyTail {
            handle: Arc::new(f),
            lower_cutoff,
        }
    }

    pub fn lower_cutoff(&self) -> f64 {
        self.lower_cutoff
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > self.lower_cutoff) {
            return Err(Error::Domain(format!(
                "tail evaluated at x = {x}, below its cutoff {}",
                self.lower_cutoff
            )));
        }
        let v = (self.handle)(x);
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Numerical(format!("tail returned {v} at x = {x}")));
        }
        Ok(v)
    }

    pub(crate) fn raw(&self, x: f64) -> f64 {
        (self.handle)(x)
    }
}

impl fmt::Debug for LevyTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyTail")
            .field("lower_cutoff", &self.lower_cutoff)
            .finish_non_exhaustive()
    }
}

/// Lévy-measure family.
#[derive(Debug, Clone)]
pub enum Family {
    /// Empty Lévy measure; the process is `X_t = d·t`.
    DriftOnly,
    Stable { alpha: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGaussian { mean: f64, shape: f64 },
    CompoundPoisson { rate: f64, jumps: JumpLaw },
    /// General tail given by a handle. `truncation` is the default small-jump
    /// cutoff used when simulating this family by events.
    TruncatedGeneral { tail: LevyTail, truncation: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::DriftOnly => "drift-only",
            Family::Stable { .. } => "stable",
            Family::Gamma { .. } => "gamma",
            Family::InverseGaussian { .. } => "inverse-gaussian",
            Family::CompoundPoisson { .. } => "compound-poisson",
            Family::TruncatedGeneral { .. } => "truncated-general",
        }
    }
}

/// A subordinator: nonnegative drift and a Lévy-measure family.
#[derive(Debug, Clone)]
pub struct SubordinatorSpec {
    pub drift: f64,
    pub family: Family,
}

/// Slowly varying part of a regularly varying Φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlowlyVarying {
    /// `L(λ) = value`
    Constant { value: f64 },
    /// `L(λ) = coefficient · ln λ`
    Logarithmic { coefficient: f64 },
}

impl SlowlyVarying {
    pub fn eval(&self, lambda: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { value } => value,
            SlowlyVarying::Logarithmic { coefficient } => coefficient * lambda.ln(),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            SlowlyVarying::Constant { value } => format!("L(λ) = {value}"),
            SlowlyVarying::Logarithmic { coefficient } => format!("slowly varying L(λ)={coefficient} ln λ"),
        }
    }
}

/// `Φ(λ) ~ λ^index · L(λ)` as `λ → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularVariation {
    pub index: f64,
    pub slowly_varying: SlowlyVarying,
    /// The potential asymptotic `1/(Γ(1+α)Φ(1/δ))` is exact, not only asymptotic.
    pub exact_potential: bool,
}

/// Outcome of a numerical integrability check on `∫_0^1 Π̄(x) dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityCheck {
    pub integral: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

/// Validity and eligibility of a spec for the covering theorems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EligibilityReport {
    pub family: String,
    pub parameter_errors: Vec<String>,
    pub infinite_activity: bool,
    pub eligible: bool,
    pub reason: String,
    pub integrability: Option<IntegrabilityCheck>,
}

impl EligibilityReport {
    pub fn valid(&self) -> bool {
        self.parameter_errors.is_empty()
    }
}

pub const COMPOUND_POISSON_EXCLUSION: &str =
    "a compound Poisson process (finite Lévy measure and zero drift) is excluded: the covering limit needs Π(0,∞)=∞ or d>0";

fn positive(name: &str, v: f64, errors: &mut Vec<String>) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name} must be positive and finite, got {v}"));
    }
}

impl SubordinatorSpec {
    pub fn new(drift: f64, family: Family) -> Self {
        SubordinatorSpec { drift, family }
    }

    pub fn drift_only(drift: f64) -> Self {
        Self::new(drift, Family::DriftOnly)
    }

    pub fn stable(alpha: f64) -> Self {
        Self::new(0.0, Family::Stable { alpha, scale: 1.0 })
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::new(0.0, Family::Gamma { shape, rate })
    }

    pub fn inverse_gaussian(mean: f64, shape: f64) -> Self {
        Self::new(0.0, Family::InverseGaussian { mean, shape })
    }

    pub fn compound_poisson(rate: f64, jumps: JumpLaw, drift: f64) -> Self {
        Self::new(drift, Family::CompoundPoisson { rate, jumps })
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    fn parameter_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            errors.push(format!("drift must be nonnegative and finite, got {}", self.drift));
        }
        match &self.family {
            Family::DriftOnly => {}
            Family::Stable { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    errors.push(format!("stable index alpha must lie strictly inside (0,1), got {alpha}"));
                }
                positive("stable scale", *scale, &mut errors);
            }
            Family::Gamma { shape, rate } => {
                positive("gamma shape", *shape, &mut errors);
                positive("gamma rate", *rate, &mut errors);
            }
            Family::InverseGaussian { mean, shape } => {
                positive("inverse-gaussian mean", *mean, &mut errors);
                positive("inverse-gaussian shape", *shape, &mut errors);
            }
            Family::CompoundPoisson { rate, jumps } => {
                positive("compound-poisson rate", *rate, &mut errors);
                match jumps {
                    JumpLaw::Fixed { size } => positive("jump size", *size, &mut errors),
                    JumpLaw::Exponential { rate } => positive("jump rate", *rate, &mut errors),
                }
            }
            Family::TruncatedGeneral { tail, truncation } => {
                positive("truncation", *truncation, &mut errors);
                if tail.lower_cutoff() < 0.0 {
                    errors.push("tail cutoff must be nonnegative".into());
                }
            }
        }
        errors
    }

    /// Errors with the first parameter problem, if any.
    pub fn check_parameters(&self) -> Result<()> {
        match self.parameter_errors().into_iter().next() {
            Some(e) => Err(Error::InvalidParameter(e)),
            None => Ok(()),
        }
    }

    /// `Π(0, ∞) = ∞`.
    pub fn infinite_activity(&self) -> bool {
        match &self.family {
            Family::DriftOnly | Family::CompoundPoisson { .. } => false,
            Family::Stable { .. } | Family::Gamma { .. } | Family::InverseGaussian { .. } => true,
            Family::TruncatedGeneral { tail, .. } => general_tail_diverges(tail),
        }
    }

    /// Total jump rate `Π(0, ∞)` (infinite for infinite activity).
    pub fn total_rate(&self) -> f64 {
        match &self.family {
            Family::DriftOnly => 0.0,
            Family::CompoundPoisson { rate, .. } => *rate,
            Family::TruncatedGeneral { tail, .. } if !general_tail_diverges(tail) => {
                tail.raw(tail.lower_cutoff().max(f64::MIN_POSITIVE))
            }
            _ => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> EligibilityReport {
        let parameter_errors = self.parameter_errors();
        let infinite_activity = parameter_errors.is_empty() && self.infinite_activity();
        let integrability = match &self.family {
            Family::TruncatedGeneral { tail, .. } if parameter_errors.is_empty() => Some(check_integrability(tail)),
            _ => None,
        };
        let integrable = integrability.as_ref().map_or(true, |c| c.passed);
        let (eligible, reason) = if !parameter_errors.is_empty() {
            (false, "invalid parameters".to_string())
        } else if !integrable {
            (false, "∫₀¹ Π̄(x)dx is not finite".to_string())
        } else if infinite_activity {
            (true, "infinite activity: Π(0,∞)=∞".to_string())
        } else if self.drift > 0.0 {
            (true, "finite activity with positive drift".to_string())
        } else {
            (false, COMPOUND_POISSON_EXCLUSION.to_string())
        };
        EligibilityReport {
            family: self.family.name().to_string(),
            parameter_errors,
            infinite_activity,
            eligible,
            reason,
            integrability,
        }
    }

    /// Errors unless the spec satisfies the covering-theorem hypotheses.
    pub fn require_eligible(&self) -> Result<()> {
        self.check_parameters()?;
        let report = self.validate();
        if report.eligible {
            Ok(())
        } else {
            Err(Error::Ineligible(report.reason))
        }
    }

    /// Laplace exponent `Φ(λ)`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        self.check_parameters()?;
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("Φ needs λ ≥ 0, got {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let d = self.drift * lambda;
        let jumps = match &self.family {
            Family::DriftOnly => 0.0,
            Family::Stable { alpha, scale } => scale * lambda.powf(*alpha),
            Family::Gamma { shape, rate } => shape * (lambda / rate).ln_1p(),
            Family::InverseGaussian { mean, shape } => {
                let z = 2.0 * mean * mean * lambda / shape;
                // √(1+z) − 1 without cancellation
                (shape / mean) * z / ((1.0 + z).sqrt() + 1.0)
            }
            Family::CompoundPoisson { rate, jumps } => rate * (1.0 - jumps.laplace(lambda)),
            Family::TruncatedGeneral { tail, .. } => {
                let t = tail.clone();
                quad::laplace_weighted(move |x| t.raw(x), lambda, 1e-12)?.value
            }
        };
        Ok(d + jumps)
    }

    /// Lévy tail `Π̄(x) = Π(x, ∞)`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        self.check_parameters()?;
        if !(x > 0.0) {
            return Err(Error::Domain(format!("Π̄ needs x > 0, got {x}")));
        }
        Ok(match &self.family {
            Family::DriftOnly => 0.0,
            Family::Stable { alpha, scale } => scale * x.powf(-alpha) / gamma(1.0 - alpha),
            Family::Gamma { shape, rate } => shape * exp_int_e1(rate * x),
            Family::InverseGaussian { mean, shape } => ig_tail(*mean, *shape, x),
            Family::CompoundPoisson { rate, jumps } => rate * jumps.survival(x),
            Family::TruncatedGeneral { tail, .. } => tail.eval(x)?,
        })
    }

    /// The tail as a standalone handle.
    pub fn levy_tail(&self) -> LevyTail {
        match &self.family {
            Family::TruncatedGeneral { tail, .. } => tail.clone(),
            _ => {
                let spec = self.clone();
                LevyTail::new(move |x| spec.tail(x).unwrap_or(f64::NAN))
            }
        }
    }

    /// Mean of the small jumps, `∫_0^ε x Π(dx)`: the drift that compensates
    /// removing all jumps of size at most ε.
    pub fn small_jump_mean(&self, eps: f64) -> Result<f64> {
        self.check_parameters()?;
        if !(eps >= 0.0) {
            return Err(Error::Domain(format!("ε must be nonnegative, got {eps}")));
        }
        if eps == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.family {
            Family::DriftOnly => 0.0,
            Family::Stable { alpha, scale } => {
                scale * alpha / gamma(1.0 - alpha) * eps.powf(1.0 - alpha) / (1.0 - alpha)
            }
            Family::Gamma { shape, rate } => shape * -(-rate * eps).exp_m1() / rate,
            Family::InverseGaussian { mean, shape } => {
                let c = shape / (2.0 * mean * mean);
                (shape / (2.0 * PI)).sqrt() * (PI / c).sqrt() * erf((c * eps).sqrt())
            }
            Family::CompoundPoisson { rate, jumps } => rate * jumps.truncated_mean(eps),
            Family::TruncatedGeneral { tail, .. } => {
                // integration by parts: ∫_0^ε xΠ(dx) = ∫_0^ε Π̄ − εΠ̄(ε)
                let t = tail.clone();
                let area = quad::integrate_from_zero(move |x| t.raw(x), eps, 1e-11)?.value;
                (area - eps * tail.eval(eps)?).max(0.0)
            }
        })
    }

    /// `E[X_1] = Φ'(0+)`, possibly infinite.
    pub fn mean_rate(&self) -> f64 {
        self.drift
            + match &self.family {
                Family::DriftOnly => 0.0,
                Family::Stable { .. } => f64::INFINITY,
                Family::Gamma { shape, rate } => shape / rate,
                Family::InverseGaussian { mean, .. } => *mean,
                Family::CompoundPoisson { rate, jumps } => rate * jumps.mean(),
                Family::TruncatedGeneral { .. } => f64::NAN,
            }
    }

    /// Declared regular variation of Φ at infinity, if known.
    pub fn regular_variation(&self) -> Option<RegularVariation> {
        if self.drift > 0.0 {
            if let Family::TruncatedGeneral { .. } = self.family {
                return None;
            }
            return Some(RegularVariation {
                index: 1.0,
                slowly_varying: SlowlyVarying::Constant { value: self.drift },
                exact_potential: matches!(self.family, Family::DriftOnly),
            });
        }
        match &self.family {
            Family::Stable { alpha, scale } => Some(RegularVariation {
                index: *alpha,
                slowly_varying: SlowlyVarying::Constant { value: *scale },
                exact_potential: true,
            }),
            Family::Gamma { shape, .. } => Some(RegularVariation {
                index: 0.0,
                slowly_varying: SlowlyVarying::Logarithmic { coefficient: *shape },
                exact_potential: false,
            }),
            Family::InverseGaussian { shape, .. } => Some(RegularVariation {
                index: 0.5,
                slowly_varying: SlowlyVarying::Constant {
                    value: (2.0 * shape).sqrt(),
                },
                exact_potential: false,
            }),
            _ => None,
        }
    }

    /// Short human-readable summary, e.g. `stable(alpha=0.5, scale=1) + drift 0`.
    pub fn summary(&self) -> String {
        let body = match &self.family {
            Family::DriftOnly => "drift-only".to_string(),
            Family::Stable { alpha, scale } => format!("stable(alpha={alpha}, scale={scale})"),
            Family::Gamma { shape, rate } => format!("gamma(shape={shape}, rate={rate})"),
            Family::InverseGaussian { mean, shape } => format!("inverse-gaussian(mean={mean}, shape={shape})"),
            Family::CompoundPoisson { rate, jumps } => match jumps {
                JumpLaw::Fixed { size } => format!("compound-poisson(rate={rate}, fixed jump={size})"),
                JumpLaw::Exponential { rate: r } => format!("compound-poisson(rate={rate}, exponential jumps rate={r})"),
            },
            Family::TruncatedGeneral { truncation, .. } => format!("truncated-general(truncation={truncation})"),
        };
        format!("{body} + drift {}", self.drift)
    }
}

/// Inverse-Gaussian Lévy tail.
///
/// With Lévy density `√(ν/2π)·y^{−3/2}·e^{−cy}`, `c = ν/(2μ²)`,
/// `Π̄(x) = √(ν/2π)·[2x^{−1/2}e^{−cx} − 2√(πc)·erfc(√(cx))]`.
pub fn ig_tail(mean: f64, shape: f64, x: f64) -> f64 {
    let c = shape / (2.0 * mean * mean);
    let pref = (shape / (2.0 * PI)).sqrt();
    let z = (c * x).sqrt();
    if z < 3.0 {
        pref * (2.0 / x.sqrt() * (-c * x).exp() - 2.0 * (PI * c).sqrt() * erfc(z))
    } else {
        // factor e^{−cx}: bracket = 2x^{−1/2}(1 − √π z erfcx(z))
        pref * 2.0 / x.sqrt() * (-c * x).exp() * (1.0 - PI.sqrt() * z * erfcx(z))
    }
}

fn general_tail_diverges(tail: &LevyTail) -> bool {
    let base = tail.lower_cutoff().max(0.0);
    let near = tail.raw(base + 1e-15);
    let far = tail.raw(base + 1e-12);
    !near.is_finite() || near > far * (1.0 + 1e-9) + 1e-300
}

fn check_integrability(tail: &LevyTail) -> IntegrabilityCheck {
    // ∫_{e^{−u}}^1 Π̄ for growing u must settle
    let t = tail.clone();
    let lower = tail.lower_cutoff();
    let g = move |u: f64| {
        let s = (-u).exp();
        if s <= lower {
            0.0
        } else {
            t.raw(s) * s
        }
    };
    let mut partial = Vec::new();
    let mut acc = 0.0;
    let mut lo = 0.0;
    for &hi in &[40.0, 80.0, 160.0, 320.0, 640.0] {
        match quad::integrate(&g, lo, hi, 1e-10) {
            Ok(q) if q.value.is_finite() => {
                acc += q.value;
                partial.push(q.value);
            }
            _ => {
                return IntegrabilityCheck {
                    integral: None,
                    passed: false,
                    detail: format!("quadrature failed on u ∈ [{lo}, {hi}]"),
                }
            }
        }
        lo = hi;
    }
    let last = *partial.last().unwrap_or(&0.0);
    let passed = acc.is_finite() && last.abs() <= 1e-6 * acc.abs().max(1e-300);
    IntegrabilityCheck {
        integral: passed.then_some(acc),
        passed,
        detail: if passed {
            format!("∫₀¹ Π̄ ≈ {acc:.6e}")
        } else {
            format!("contributions near 0 do not vanish (last window {last:.3e} of {acc:.3e})")
        },
    }
}

/// Laplace exponent `Φ(λ)` of `spec`.
pub fn eval_phi(spec: &SubordinatorSpec, lambda: f64) -> Result<f64> {
    spec.phi(lambda)
}

/// Lévy tail `Π̄(x)` of `spec`.
pub fn eval_tail(spec: &SubordinatorSpec, x: f64) -> Result<f64> {
    spec.tail(x)
}

/// Parameter validity and covering-theorem eligibility of `spec`.
pub fn validate(spec: &SubordinatorSpec) -> EligibilityReport {
    spec.validate()
}

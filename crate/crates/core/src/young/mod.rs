//! Young functions: convex, non-decreasing profiles vanishing at the origin.

mod builtins;
mod conjugate;
mod growth;
mod interpolate;
mod sobolev;
mod tabulated;

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::roots;

pub use conjugate::{a1_sandwich_check, young_inequality_check, InequalityCheck};
pub use growth::{
    check_delta2, check_nabla2, dominates, estimate_indices, increases_essentially_slower, EssentialTrace, GrowthReport, IndexEstimate,
    Regime, Witness,
};
pub use interpolate::interpolate;

/// `n` log-spaced points on `[lo, hi]`, both ends included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    growth::log_grid(lo, hi, n)
}
pub use sobolev::{sobolev_conjugate, sobolev_conjugate_near_infinity, Classification, SobolevConjugate};

/// Default trusted abscissa bound.
pub const DEFAULT_DOMAIN_CAP: f64 = 1e12;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Evaluation backend of a Young function.
pub(crate) trait Profile: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, _t: f64) -> Option<f64> {
        None
    }
    fn has_derivative(&self) -> bool {
        self.derivative(1.0).is_some()
    }
    fn second_derivative(&self, _t: f64) -> Option<f64> {
        None
    }
    /// `ln A(e^z)` when it can be computed without overflow.
    fn ln_at_log(&self, _z: f64) -> Option<f64> {
        None
    }
    /// `sup{t : A(t) <= y}` when a faster route than bracketing exists.
    fn inverse(&self, _y: f64) -> Option<f64> {
        None
    }
}

/// Which construction produced a Young function.
#[derive(Clone)]
pub enum Kind {
    ClosedForm,
    Tabulated,
    ConjugateOf(YoungFunction),
    SobolevConjugateOf { base: YoungFunction, n: usize },
    Interpolated { lower: YoungFunction, upper: YoungFunction },
}

impl fmt::Debug for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::ClosedForm => write!(f, "closed_form"),
            Kind::Tabulated => write!(f, "tabulated"),
            Kind::ConjugateOf(b) => write!(f, "conjugate_of({})", b.name()),
            Kind::SobolevConjugateOf { base, n } => write!(f, "sobolev_conjugate_of({}, n={n})", base.name()),
            Kind::Interpolated { lower, upper } => write!(f, "interpolated({}, {})", lower.name(), upper.name()),
        }
    }
}

struct Inner {
    name: String,
    kind: Kind,
    profile: Box<dyn Profile>,
    finite_limit: Option<f64>,
    domain_cap: f64,
    effective_cap: OnceLock<f64>,
}

/// An immutable, shareable Young function.
#[derive(Clone)]
pub struct YoungFunction(Arc<Inner>);

impl fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("YoungFunction")
            .field("name", &self.0.name)
            .field("kind", &self.0.kind)
            .field("finite_limit", &self.0.finite_limit)
            .field("domain_cap", &self.0.domain_cap)
            .finish()
    }
}

struct ClosedForm {
    value: ScalarFn,
    derivative: Option<ScalarFn>,
    second: Option<ScalarFn>,
}

impl Profile for ClosedForm {
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(t))
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        self.second.as_ref().map(|d| d(t))
    }
}

impl YoungFunction {
    pub(crate) fn from_profile(
        name: impl Into<String>,
        kind: Kind,
        profile: Box<dyn Profile>,
        finite_limit: Option<f64>,
        domain_cap: f64,
    ) -> Self {
        YoungFunction(Arc::new(Inner { name: name.into(), kind, profile, finite_limit, domain_cap, effective_cap: OnceLock::new() }))
    }

    /// Builds a Young function from a value closure and optional first and
    /// second derivatives. The caller is responsible for convexity.
    pub fn closed_form(name: impl Into<String>, value: ScalarFn, derivative: Option<ScalarFn>, second: Option<ScalarFn>) -> Self {
        Self::from_profile(name, Kind::ClosedForm, Box::new(ClosedForm { value, derivative, second }), None, DEFAULT_DOMAIN_CAP)
    }

    /// Same function with a different trusted domain cap.
    pub fn with_domain_cap(&self, cap: f64) -> Self {
        let me = self.clone();
        YoungFunction(Arc::new(Inner {
            name: self.0.name.clone(),
            kind: self.0.kind.clone(),
            profile: Box::new(Forward(me)),
            finite_limit: self.0.finite_limit,
            domain_cap: cap,
            effective_cap: OnceLock::new(),
        }))
    }

    /// Same function under a new display name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let me = self.clone();
        YoungFunction(Arc::new(Inner {
            name: name.into(),
            kind: self.0.kind.clone(),
            profile: Box::new(Forward(me)),
            finite_limit: self.0.finite_limit,
            domain_cap: self.0.domain_cap,
            effective_cap: OnceLock::new(),
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn finite_limit(&self) -> Option<f64> {
        self.0.finite_limit
    }

    pub fn domain_cap(&self) -> f64 {
        self.0.domain_cap
    }

    pub fn is_finite_valued(&self) -> bool {
        self.0.finite_limit.is_none()
    }

    /// `A(t)` without argument checks; `t` must be non-negative.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if let Some(l) = self.0.finite_limit {
            if t > l {
                return f64::INFINITY;
            }
        }
        self.0.profile.value(t)
    }

    /// Checked evaluation.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("{}: evaluation at t = {t}", self.name())));
        }
        if matches!(self.0.kind, Kind::Tabulated) && t > self.0.domain_cap {
            return Err(Error::Domain(format!("{}: t = {t} exceeds the domain cap {}", self.name(), self.0.domain_cap)));
        }
        Ok(self.value(t))
    }

    /// Closed-form or table derivative, if the construction provides one.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        self.0.profile.derivative(t)
    }

    pub fn has_derivative(&self) -> bool {
        self.0.profile.has_derivative()
    }

    /// Derivative, falling back to a central difference with step `1e-6 t`.
    pub fn derivative_or_fd(&self, t: f64) -> f64 {
        if let Some(d) = self.derivative(t) {
            return d;
        }
        let h = 1e-6 * t.max(1e-300);
        (self.value(t + h) - self.value(t - h)) / (2.0 * h)
    }

    pub fn second_derivative(&self, t: f64) -> Option<f64> {
        self.0.profile.second_derivative(t)
    }

    /// `ln A(t)`, computed without overflow where the construction allows.
    pub fn ln_value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if let Some(l) = self.0.finite_limit {
            if t > l {
                return f64::INFINITY;
            }
        }
        let v = self.0.profile.value(t);
        if v.is_finite() && v > 0.0 {
            return v.ln();
        }
        self.ln_at_log(t.ln())
    }

    /// `ln A(e^z)` for arbitrary real `z`; beyond the overflow point the
    /// value is extended with the local power-law exponent at the cap.
    pub fn ln_at_log(&self, z: f64) -> f64 {
        if let Some(v) = self.0.profile.ln_at_log(z) {
            return v;
        }
        let t = z.exp();
        if t.is_finite() {
            if let Some(l) = self.0.finite_limit {
                if t > l {
                    return f64::INFINITY;
                }
            }
            let v = self.0.profile.value(t);
            if v.is_finite() && v > 0.0 {
                return v.ln();
            }
        }
        if z < 0.0 {
            // underflow near the origin: extend by the local exponent at the
            // smallest abscissa with a normal value
            let mut r = t.max(1e-300);
            while !(self.value(r) > 1e-250) && r < 1.0 {
                r *= 2.0;
            }
            let v = self.value(r);
            let slope = r * self.derivative_or_fd(r) / v;
            return v.ln() + slope * (z - r.ln());
        }
        let cap = self.effective_cap();
        let a = self.value(cap);
        let slope = cap * self.derivative_or_fd(cap) / a;
        a.ln() + slope * (z - cap.ln())
    }

    /// Largest abscissa up to the domain cap (and below any finite limit) at
    /// which the value is a finite float.
    pub fn effective_cap(&self) -> f64 {
        *self.0.effective_cap.get_or_init(|| {
            let mut cap = self.0.domain_cap;
            if let Some(l) = self.0.finite_limit {
                cap = cap.min(l * (1.0 - 1e-9));
            }
            if self.value(cap).is_finite() {
                return cap;
            }
            let finite = |t: f64| if self.value(t).is_finite() { 0.0 } else { 1.0 };
            let lo = 1e-12f64.min(cap * 1e-3);
            roots::sup_below_log(finite, 0.5, lo, cap, 1e-12)
        })
    }

    /// `sup{t >= 0 : A(t) <= y}`; returns the finite limit (or the overflow
    /// point) when `y` exceeds the essential range.
    pub fn generalized_inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("{}: inverse at y = {y}", self.name())));
        }
        Ok(self.inverse_unchecked(y))
    }

    pub(crate) fn inverse_unchecked(&self, y: f64) -> f64 {
        if let Some(t) = self.0.profile.inverse(y) {
            return t;
        }
        let limit = match self.0.finite_limit {
            Some(l) => l,
            None => 1e300,
        };
        let f = |t: f64| self.value(t);
        let hi = match roots::expand_upper(f, y, 1.0f64.min(limit), limit) {
            Some(h) => h,
            None => return limit,
        };
        let mut lo = (0.25 * hi).min(1.0);
        while f(lo) > y {
            lo *= 0.25;
            if lo < 1e-300 {
                return 0.0;
            }
        }
        if lo >= hi {
            return lo;
        }
        roots::sup_below_log(f, y, lo, hi, 1e-13)
    }

    /// Young conjugate `sup{st - A(t)}`.
    pub fn conjugate(&self) -> YoungFunction {
        conjugate::conjugate(self)
    }
}

struct Forward(YoungFunction);

impl Profile for Forward {
    fn value(&self, t: f64) -> f64 {
        self.0 .0.profile.value(t)
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        self.0.derivative(t)
    }
    fn has_derivative(&self) -> bool {
        self.0.has_derivative()
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        self.0.second_derivative(t)
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        self.0 .0.profile.ln_at_log(z)
    }
    fn inverse(&self, y: f64) -> Option<f64> {
        self.0 .0.profile.inverse(y)
    }
}

pub use builtins::{exp, exp_exp, exp_exp_power, exp_power, power, power_log, power_over_p, scaled_power};
pub use tabulated::{tabulated, tabulated_from_file, tabulated_from_str};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_rejects_negative() {
        assert!(power(2.0).eval(-1.0).is_err());
        assert_eq!(power(2.0).eval(0.0).unwrap(), 0.0);
        assert_eq!(power_over_p(2.0).eval(3.0).unwrap(), 4.5);
    }

    #[test]
    fn inverse_examples() {
        let a = power(2.0);
        assert!((a.generalized_inverse(4.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(a.generalized_inverse(0.0).unwrap() < 1e-100);
        assert!(a.generalized_inverse(-1.0).is_err());
        // bisection oracle on e^t - 1 = 1
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m.exp_m1() <= 1.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let e = exp().generalized_inverse(1.0).unwrap();
        assert!((e - lo).abs() < 1e-12);
    }

    #[test]
    fn effective_cap_of_exponential() {
        let c = exp().effective_cap();
        assert!(c > 700.0 && c < 710.0, "{c}");
        assert!(exp().value(c).is_finite());
    }
}

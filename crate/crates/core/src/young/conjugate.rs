use serde::Serialize;

use super::{Kind, Profile, YoungFunction};
use crate::error::{Error, Result};
use crate::roots;

struct Conjugate {
    base: YoungFunction,
    // abscissa beyond which the base is not evaluated
    limit: f64,
}

impl Conjugate {
    fn new(base: YoungFunction) -> Self {
        let limit = match base.finite_limit() {
            Some(l) => l * (1.0 - 1e-12),
            None => {
                let cap = base.effective_cap();
                if cap < base.domain_cap() {
                    cap
                } else {
                    // closed forms are evaluated past the trusted cap as long
                    // as they stay finite
                    let f = |t: f64| if base.value(t).is_finite() { 0.0 } else { 1.0 };
                    if f(1e300) == 0.0 {
                        1e300
                    } else {
                        roots::sup_below_log(f, 0.5, cap, 1e300, 1e-12)
                    }
                }
            }
        };
        Conjugate { base, limit }
    }

    /// `t*(s) = sup{t : A'(t) <= s}`, the maximiser of `st - A(t)`.
    fn argmax(&self, s: f64) -> f64 {
        let d = |t: f64| self.base.derivative(t).unwrap_or(f64::NAN);
        let hi = match roots::expand_upper(d, s, 1.0f64.min(self.limit), self.limit) {
            Some(h) => h,
            None => return self.limit,
        };
        let mut lo = (0.25 * hi).min(1.0);
        while d(lo) > s {
            lo *= 0.25;
            if lo < 1e-300 {
                return 0.0;
            }
        }
        if lo >= hi {
            return lo;
        }
        roots::sup_below_log(d, s, lo, hi, 1e-14)
    }

    fn value_by_scan(&self, s: f64) -> f64 {
        let obj = |t: f64| s * t - self.base.value(t);
        let lo = 1e-12f64;
        let hi = self.limit.min(1e300);
        let decades = (hi / lo).log10();
        let n = (decades * 40.0).ceil() as usize + 1;
        let step = decades / (n - 1) as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..n {
            let t = lo * 10f64.powf(k as f64 * step);
            let v = obj(t);
            if v > best.1 {
                best = (k, v);
            }
            // the objective is concave: once it falls below its best after
            // having decreased, the maximum is behind us
            if v < prev && v < best.1 && k > best.0 + 2 {
                break;
            }
            prev = v;
        }
        let at = |k: usize| lo * 10f64.powf(k as f64 * step);
        let a = if best.0 == 0 { 0.0 } else { at(best.0 - 1) };
        let b = at((best.0 + 1).min(n - 1));
        let (_, v) = roots::golden_max(obj, a, b, 1e-12);
        v.max(best.1).max(0.0)
    }
}

impl Profile for Conjugate {
    fn value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if self.base.has_derivative() {
            let t = self.argmax(s);
            if t <= 0.0 {
                return 0.0;
            }
            (s * t - self.base.value(t)).max(0.0)
        } else {
            self.value_by_scan(s)
        }
    }

    fn has_derivative(&self) -> bool {
        self.base.has_derivative()
    }

    fn derivative(&self, s: f64) -> Option<f64> {
        if self.base.has_derivative() {
            Some(if s <= 0.0 { 0.0 } else { self.argmax(s) })
        } else {
            None
        }
    }

    fn second_derivative(&self, s: f64) -> Option<f64> {
        if !self.base.has_derivative() || s <= 0.0 {
            return None;
        }
        let t = self.argmax(s);
        self.base.second_derivative(t).map(|a2| if a2 > 0.0 { 1.0 / a2 } else { f64::INFINITY })
    }

    fn inverse(&self, y: f64) -> Option<f64> {
        if !self.base.has_derivative() {
            return None;
        }
        if y <= 0.0 {
            // sup{s : conj(s) = 0} = A'(0+)
            return Some(self.base.derivative(0.0).unwrap_or(0.0).max(0.0));
        }
        // conj(A'(t)) = t A'(t) - A(t), which is non-decreasing in t
        let phi = |t: f64| {
            let d = self.base.derivative(t).unwrap_or(f64::NAN);
            t * d - self.base.value(t)
        };
        let hi = match roots::expand_upper(phi, y, 1.0f64.min(self.limit), self.limit) {
            Some(h) => h,
            None => return Some(self.base.derivative(self.limit).unwrap_or(f64::INFINITY)),
        };
        let mut lo = (0.25 * hi).min(1.0);
        while phi(lo) > y {
            lo *= 0.25;
            if lo < 1e-300 {
                return Some(0.0);
            }
        }
        let t = if lo >= hi { lo } else { roots::sup_below_log(phi, y, lo, hi, 1e-14) };
        self.base.derivative(t)
    }
}

pub(super) fn conjugate(a: &YoungFunction) -> YoungFunction {
    YoungFunction::from_profile(
        format!("conj({})", a.name()),
        Kind::ConjugateOf(a.clone()),
        Box::new(Conjugate::new(a.clone())),
        None,
        a.domain_cap(),
    )
}

/// Outcome of a pointwise inequality test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub holds: bool,
    /// Right-hand side minus left-hand side.
    pub slack: f64,
}

/// Tests `st <= conj(s) + A(t)` with tolerance `1e-9 (1 + conj(s) + A(t))`.
pub fn young_inequality_check(a: &YoungFunction, conj: &YoungFunction, s: f64, t: f64) -> InequalityCheck {
    let at = a.value(t);
    let cs = conj.value(s);
    let rhs = cs + at;
    let slack = rhs - s * t;
    let holds = !rhs.is_finite() || slack >= -1e-9 * (1.0 + rhs);
    InequalityCheck { holds, slack }
}

/// Tests `A(t)/t <= conj^{-1}(A(t)) <= 2 A(t)/t` with relative tolerance `1e-6`.
pub fn a1_sandwich_check(a: &YoungFunction, conj: &YoungFunction, t: f64) -> Result<InequalityCheck> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("sandwich check needs t > 0, got {t}")));
    }
    let at = a.value(t);
    if at <= 0.0 {
        return Err(Error::Degenerate(format!("{}({t}) = 0", a.name())));
    }
    if !at.is_finite() {
        return Err(Error::Domain(format!("{}({t}) is not finite", a.name())));
    }
    let mid = conj.inverse_unchecked(at);
    let lower = at / t;
    let upper = 2.0 * at / t;
    let slack = (mid - lower * (1.0 - 1e-6)).min(upper * (1.0 + 1e-6) - mid);
    Ok(InequalityCheck { holds: slack >= 0.0, slack })
}

use super::growth::increases_essentially_slower;
use super::{Kind, Profile, YoungFunction};
use crate::error::{Error, Result};
use crate::roots;

struct Interpolated {
    lower: YoungFunction,
    upper: YoungFunction,
}

impl Interpolated {
    fn inv(&self, y: f64) -> f64 {
        (self.upper.inverse_unchecked(y) * self.lower.inverse_unchecked(y)).sqrt()
    }
}

impl Profile for Interpolated {
    fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let f = |y: f64| self.inv(y);
        let hi = match roots::expand_upper(f, t, 1.0, 1e300) {
            Some(h) => h,
            None => return f64::INFINITY,
        };
        let mut lo = (0.25 * hi).min(1.0);
        while f(lo) > t {
            lo *= 0.25;
            if lo < 1e-300 {
                return 0.0;
            }
        }
        if lo >= hi {
            return lo;
        }
        roots::sup_below_log(f, t, lo, hi, 1e-13)
    }

    fn inverse(&self, y: f64) -> Option<f64> {
        Some(if y <= 0.0 { 0.0 } else { self.inv(y) })
    }
}

/// The Young function `C` with `C^{-1} = sqrt(A^{-1} B^{-1})`, sitting
/// strictly between `B << A`.
pub fn interpolate(b: &YoungFunction, a: &YoungFunction) -> Result<YoungFunction> {
    let trace = increases_essentially_slower(b, a);
    if !trace.holds {
        let last = trace.trace.last().map(|x| x.1).unwrap_or(f64::NAN);
        return Err(Error::Precondition(format!("{} << {} is not supported numerically (final ratio {last:.3e})", b.name(), a.name())));
    }
    Ok(YoungFunction::from_profile(
        format!("interp({}, {})", b.name(), a.name()),
        Kind::Interpolated { lower: b.clone(), upper: a.clone() },
        Box::new(Interpolated { lower: b.clone(), upper: a.clone() }),
        None,
        a.domain_cap().min(b.domain_cap()),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn square_and_fourth_power_give_eight_thirds() {
        let c = interpolate(&power(2.0), &power(4.0)).unwrap();
        for &t in &[1.0, 3.0, 17.0, 100.0] {
            assert!((c.value(t) / t.powf(8.0 / 3.0) - 1.0).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn equal_inputs_are_rejected() {
        assert!(interpolate(&power(2.0), &power(2.0)).is_err());
    }

    #[test]
    fn square_and_exp_bracket_the_result() {
        let b = power(2.0);
        let a = exp();
        let c = interpolate(&b, &a).unwrap();
        assert!(increases_essentially_slower(&b, &c).holds);
        assert!(increases_essentially_slower(&c, &a).holds);
    }
}

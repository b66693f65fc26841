use super::{Kind, Profile, YoungFunction, DEFAULT_DOMAIN_CAP};
use crate::quad::{gauss8, CumulativeTable};

struct Power {
    p: f64,
    c: f64,
}

impl Profile for Power {
    fn value(&self, t: f64) -> f64 {
        self.c * t.powf(self.p)
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        Some(self.c * self.p * t.powf(self.p - 1.0))
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        Some(self.c * self.p * (self.p - 1.0) * t.powf(self.p - 2.0))
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        Some(self.c.ln() + self.p * z)
    }
    fn inverse(&self, y: f64) -> Option<f64> {
        let mut t = (y / self.c).powf(1.0 / self.p);
        while t > 0.0 && self.value(t) > y {
            t *= 1.0 - 4.0 * f64::EPSILON;
        }
        Some(t)
    }
}

/// `c t^p`.
pub fn scaled_power(p: f64, c: f64) -> YoungFunction {
    assert!(p >= 1.0 && c > 0.0, "scaled_power needs p >= 1 and c > 0");
    YoungFunction::from_profile(format!("{c}*t^{p}"), Kind::ClosedForm, Box::new(Power { p, c }), None, DEFAULT_DOMAIN_CAP)
}

/// `t^p`.
pub fn power(p: f64) -> YoungFunction {
    scaled_power(p, 1.0).renamed(format!("t^{p}"))
}

/// `t^p / p`.
pub fn power_over_p(p: f64) -> YoungFunction {
    scaled_power(p, 1.0 / p).renamed(format!("t^{p}/{p}"))
}

const PL_LO: f64 = 1e-10;
const PL_HI: f64 = 1e14;

struct PowerLog {
    p: f64,
    q: f64,
    table: CumulativeTable,
}

impl PowerLog {
    fn new(p: f64, q: f64) -> Self {
        let d = |t: f64| pl_derivative(p, q, t);
        let head = pl_series(p, q, PL_LO);
        let table = CumulativeTable::build(&d, PL_LO, PL_HI, 100, head);
        PowerLog { p, q, table }
    }

    // ln A(e^z) for e^z beyond the table, integrating in w = ln t:
    // A(e^z) = A(T) + e^{pz} * int_0^{z - ln T} e^{-pv} L(z - v)^q dv,
    // with L(w) = ln(1 + e^w).
    fn ln_beyond(&self, z: f64) -> f64 {
        let p = self.p;
        let q = self.q;
        let zt = PL_HI.ln();
        let span = z - zt;
        let big_l = |w: f64| if w > 30.0 { w + (-w).exp().ln_1p() } else { w.exp().ln_1p() };
        let f = |v: f64| (-p * v).exp() * big_l(z - v).powf(q);
        let stop = span.min(60.0 / p + 1.0);
        let mut acc = 0.0;
        let mut a = 0.0;
        while a < stop {
            let b = (a + 0.25).min(stop);
            acc += gauss8(&f, a, b);
            a = b;
        }
        let head = (self.table.last_value().ln() - p * z).exp();
        p * z + (head + acc).ln()
    }
}

fn pl_derivative(p: f64, q: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t.powf(p - 1.0) * t.ln_1p().powf(q)
}

// A(t) ~ t^{p+q}/(p+q) - (q/2) t^{p+q+1}/(p+q+1) near zero
fn pl_series(p: f64, q: f64, t: f64) -> f64 {
    let e = p + q;
    t.powf(e) / e - 0.5 * q * t.powf(e + 1.0) / (e + 1.0)
}

impl Profile for PowerLog {
    fn value(&self, t: f64) -> f64 {
        if t <= PL_LO {
            return pl_series(self.p, self.q, t);
        }
        if t <= PL_HI {
            let d = |s: f64| pl_derivative(self.p, self.q, s);
            return self.table.value(&d, t);
        }
        self.ln_beyond(t.ln()).exp()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        Some(pl_derivative(self.p, self.q, t))
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let l = t.ln_1p();
        let r = (self.p - 1.0) + self.q * t / ((1.0 + t) * l);
        Some(t.powf(self.p - 2.0) * l.powf(self.q) * r)
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        if z > PL_HI.ln() {
            Some(self.ln_beyond(z))
        } else if z < PL_LO.ln() {
            let e = self.p + self.q;
            let t = z.exp();
            Some(e * z - e.ln() + (-0.5 * self.q * e * t / (e + 1.0)).ln_1p())
        } else {
            None
        }
    }
}

/// The Young function with `A'(t) = t^{p-1} ln^q(1+t)` for all `t >= 0`.
/// Requires `p > 1` and `p + q > 1` so that `A'` is increasing.
pub fn power_log(p: f64, q: f64) -> YoungFunction {
    assert!(p > 1.0 && p + q > 1.0, "power_log needs p > 1 and p + q > 1");
    YoungFunction::from_profile(format!("power_log({p},{q})"), Kind::ClosedForm, Box::new(PowerLog::new(p, q)), None, DEFAULT_DOMAIN_CAP)
}

struct Exp;

impl Profile for Exp {
    fn value(&self, t: f64) -> f64 {
        t.exp_m1()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        Some(t.exp())
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        Some(t.exp())
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        let t = z.exp();
        if t < 30.0 {
            Some(t.exp_m1().ln())
        } else {
            Some(t + (-(-t).exp_m1()).ln())
        }
    }
}

/// `e^t - 1`.
pub fn exp() -> YoungFunction {
    YoungFunction::from_profile("exp", Kind::ClosedForm, Box::new(Exp), None, DEFAULT_DOMAIN_CAP)
}

struct ExpExp;

impl Profile for ExpExp {
    fn value(&self, t: f64) -> f64 {
        std::f64::consts::E * t.exp_m1().exp_m1()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        Some(t.exp() * t.exp().exp())
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        let e = t.exp();
        Some(e.exp() * e * (1.0 + e))
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        let u = z.exp().exp_m1();
        if u < 30.0 {
            Some(1.0 + u.exp_m1().ln())
        } else {
            Some(1.0 + u + (-(-u).exp_m1()).ln())
        }
    }
}

/// `e^{e^t} - e`.
pub fn exp_exp() -> YoungFunction {
    YoungFunction::from_profile("exp_exp", Kind::ClosedForm, Box::new(ExpExp), None, DEFAULT_DOMAIN_CAP)
}

struct ExpPower {
    k: f64,
    shift: f64,
    base: f64,
}

impl ExpPower {
    /// `(t + shift)^k - shift^k` without cancellation.
    fn exponent(&self, t: f64) -> f64 {
        if self.shift > 0.0 {
            self.base * (self.k * (t / self.shift).ln_1p()).exp_m1()
        } else {
            t.powf(self.k)
        }
    }
}

impl Profile for ExpPower {
    fn value(&self, t: f64) -> f64 {
        self.exponent(t).exp_m1()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        let u = t + self.shift;
        Some(self.k * u.powf(self.k - 1.0) * self.exponent(t).exp())
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        let u = t + self.shift;
        let g = self.k * u.powf(self.k - 1.0);
        let g2 = self.k * (self.k - 1.0) * u.powf(self.k - 2.0);
        Some((g * g + g2) * self.exponent(t).exp())
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        let e = self.exponent(z.exp());
        if e < 30.0 {
            Some(e.exp_m1().ln())
        } else {
            Some(e + (-(-e).exp_m1()).ln())
        }
    }
}

/// `e^{t^k} - 1` for `k >= 1`. For `0 < k < 1` the argument is shifted to
/// `e^{(t+t0)^k} - e^{t0^k}` with `t0 = ((1-k)/k)^{1/k}`, which is convex on
/// the whole half-line and equivalent near infinity.
pub fn exp_power(k: f64) -> YoungFunction {
    assert!(k > 0.0, "exp_power needs k > 0");
    let shift = if k >= 1.0 { 0.0 } else { ((1.0 - k) / k).powf(1.0 / k) };
    let base = shift.powf(k);
    YoungFunction::from_profile(
        format!("exp_power({k})"),
        Kind::ClosedForm,
        Box::new(ExpPower { k, shift, base }),
        None,
        DEFAULT_DOMAIN_CAP,
    )
}

/// `e (e^{E_k(t)} - 1)` with `E_k = exp_power(k)`: a convex version of
/// `e^{e^{t^k}}` that vanishes at the origin.
pub fn exp_exp_power(k: f64) -> YoungFunction {
    assert!(k > 0.0, "exp_exp_power needs k > 0");
    let shift = if k >= 1.0 { 0.0 } else { ((1.0 - k) / k).powf(1.0 / k) };
    let inner = ExpPower { k, shift, base: shift.powf(k) };
    YoungFunction::from_profile(format!("exp_exp_power({k})"), Kind::ClosedForm, Box::new(ExpExpPower { inner }), None, DEFAULT_DOMAIN_CAP)
}

struct ExpExpPower {
    inner: ExpPower,
}

impl Profile for ExpExpPower {
    fn value(&self, t: f64) -> f64 {
        std::f64::consts::E * self.inner.value(t).exp_m1()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        let e = self.inner.value(t);
        Some(std::f64::consts::E * e.exp() * self.inner.derivative(t)?)
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        let e = self.inner.value(t);
        let d1 = self.inner.derivative(t)?;
        let d2 = self.inner.second_derivative(t)?;
        Some(std::f64::consts::E * e.exp() * (d1 * d1 + d2))
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        let e = self.inner.value(z.exp());
        if e < 30.0 {
            Some(1.0 + e.exp_m1().ln())
        } else {
            Some(1.0 + e + (-(-e).exp_m1()).ln())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    #[test]
    fn exp_power_is_convex_and_vanishes_at_zero() {
        for k in [0.5, 1.0, 2.0] {
            let e = exp_power(k);
            assert_eq!(e.value(0.0), 0.0);
            let ts = crate::young::log_grid(1e-6, 5.0, 200);
            for t in ts {
                assert!(e.second_derivative(t).unwrap() >= 0.0, "k={k} t={t}");
                let h = 1e-5 * t;
                let fd = (e.value(t + h) - e.value(t - h)) / (2.0 * h);
                assert!(
                    (fd - e.derivative(t).unwrap()).abs() <= 1e-5 * fd.abs().max(1e-12),
                    "k={k} t={t} fd={fd} d={}",
                    e.derivative(t).unwrap()
                );
                let z = t.ln();
                assert!((e.ln_at_log(z) - e.value(t).ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exp_exp_power_is_convex_and_vanishes_at_zero() {
        for k in [0.5, 0.9] {
            let e = exp_exp_power(k);
            assert_eq!(e.value(0.0), 0.0);
            for t in crate::young::log_grid(1e-6, 3.0, 150) {
                assert!(e.second_derivative(t).unwrap() >= 0.0, "k={k} t={t}");
                let h = 1e-5 * t;
                let fd = (e.value(t + h) - e.value(t - h)) / (2.0 * h);
                assert!((fd - e.derivative(t).unwrap()).abs() <= 1e-5 * fd.abs().max(1e-12), "k={k} t={t}");
                assert!((e.ln_at_log(t.ln()) - e.value(t).ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn power_log_matches_direct_quadrature() {
        for &(p, q) in &[(1.5, 0.5), (2.0, 1.0), (2.5, -0.5), (4.0, -1.0), (7.0, 2.0)] {
            let a = power_log(p, q);
            for &t in &[1e-3, 0.7, 3.0, 250.0, 1e5] {
                let d = |s: f64| pl_derivative(p, q, s);
                let exact = adaptive(&d, 0.0, 1e-3, 1e-13, 0.0) + adaptive(&d, 1e-3, t, 1e-13, 0.0);
                let v = a.value(t);
                assert!((v / exact - 1.0).abs() < 1e-9, "p={p} q={q} t={t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn power_log_continuous_across_table_end() {
        let a = power_log(3.0, 1.0);
        let below = a.value(PL_HI * (1.0 - 1e-9)).ln();
        let above = a.ln_at_log((PL_HI * (1.0 + 1e-9)).ln());
        assert!((below - above).abs() < 1e-7, "{below} {above}");
        // ln A(t) ~ 3 ln t + ln ln t - ln 3 far out
        let z = 1e4f64;
        let v = a.ln_at_log(z);
        assert!((v - (3.0 * z + z.ln() - 3f64.ln())).abs() < 1e-3);
    }

    #[test]
    fn exp_exp_small_and_large() {
        let a = exp_exp();
        assert!((a.value(1e-8) / (std::f64::consts::E * 1e-8) - 1.0).abs() < 1e-6);
        let z = 3f64.ln();
        assert!((a.ln_at_log(z) - (3f64.exp().exp() - std::f64::consts::E).ln()).abs() < 1e-12);
    }
}

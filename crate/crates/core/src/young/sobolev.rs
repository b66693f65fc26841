use serde::Serialize;

use super::{Kind, Profile, YoungFunction};
use crate::error::{Error, Result};
use crate::quad::{gauss8, integrate_from_zero, CumulativeTable, EndBehaviour};
use crate::roots;

/// Behaviour of `H(t)` as `t -> infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    /// `H` is unbounded and `A_n` is finite-valued.
    Divergent,
    /// `H` tends to `limit` and `A_n = +inf` beyond it.
    Convergent { limit: f64 },
}

#[derive(Debug, Clone)]
pub struct SobolevConjugate {
    pub function: YoungFunction,
    pub classification: Classification,
    /// Whether the input was replaced near zero by a power law so that the
    /// integral of `(t/A)^{1/(n-1)}` converges at the origin.
    pub regularized: bool,
}

const TAU0: f64 = 1e-6;
const W_MAX: f64 = 1e7;

struct Sobolev {
    base: YoungFunction,
    n: f64,
    // near-zero model I(tau) = i0 (tau/TAU0)^{k0+1}
    i0: f64,
    k0: f64,
    table: CumulativeTable,
    // cumulative integral in w = ln tau beyond the tau table
    w_nodes: Vec<f64>,
    w_cum: Vec<f64>,
    // ln h ~ c + m ln w past the last w node (divergent slow tails)
    tail_m: f64,
    limit_i: Option<f64>,
}

impl Sobolev {
    fn ln_g(&self, tau: f64) -> f64 {
        (tau.ln() - self.base.ln_value(tau)) / (self.n - 1.0)
    }

    fn g(&self, tau: f64) -> f64 {
        self.ln_g(tau).exp()
    }

    // integrand in w = ln tau: tau * g(tau)
    fn h(&self, w: f64) -> f64 {
        (w + (w - self.base.ln_at_log(w)) / (self.n - 1.0)).exp()
    }

    fn integral_at(&self, tau: f64) -> f64 {
        if tau <= TAU0 {
            return self.i0 * (tau / TAU0).powf(self.k0 + 1.0);
        }
        if tau <= self.table.hi() {
            let g = |s: f64| self.g(s);
            return self.table.value(&g, tau);
        }
        let w = tau.ln();
        let k = self.w_nodes.partition_point(|&x| x <= w).saturating_sub(1);
        let h = |v: f64| self.h(v);
        self.w_cum[k] + gauss8(&h, self.w_nodes[k], w)
    }

    /// `ln H^{-1}(t)`; `+inf` past the finite limit.
    fn ln_tau(&self, t: f64) -> f64 {
        let target = t.powf(self.n / (self.n - 1.0));
        if let Some(l) = self.limit_i {
            if target >= l {
                return f64::INFINITY;
            }
        }
        if target <= self.i0 {
            return TAU0.ln() + (target / self.i0).ln() / (self.k0 + 1.0);
        }
        if target <= self.table.last_value() {
            let f = |tau: f64| self.integral_at(tau);
            let (lo, hi) = self.table.bracket(target);
            return roots::sup_below(f, target, lo, hi, 1e-14).ln();
        }
        let last = *self.w_cum.last().unwrap();
        let h = |v: f64| self.h(v);
        if target <= last {
            let k = self.w_cum.partition_point(|&c| c <= target).saturating_sub(1);
            let (a, b) = (self.w_nodes[k], self.w_nodes[(k + 1).min(self.w_nodes.len() - 1)]);
            let base = self.w_cum[k];
            return roots::sup_below(|w| base + gauss8(&h, a, w), target, a, b, 1e-15);
        }
        // beyond the last node: I ~ last + h_end w_end ((w/w_end)^{m+1} - 1)/(m+1)
        let we = *self.w_nodes.last().unwrap();
        let he = self.h(we);
        let m1 = self.tail_m + 1.0;
        let x = (target - last) / (he * we);
        if m1.abs() < 1e-9 {
            we * x.exp()
        } else {
            let arg = 1.0 + m1 * x;
            if arg <= 0.0 {
                f64::INFINITY
            } else {
                we * arg.powf(1.0 / m1)
            }
        }
    }

    fn base_index(&self, tau: f64) -> f64 {
        let cap = self.base.effective_cap();
        let s = tau.min(cap);
        s * self.base.derivative_or_fd(s) / self.base.value(s)
    }
}

impl Profile for Sobolev {
    fn value(&self, t: f64) -> f64 {
        let z = self.ln_tau(t);
        if z == f64::INFINITY {
            return f64::INFINITY;
        }
        let tau = z.exp();
        if tau <= self.base.effective_cap() {
            self.base.value(tau)
        } else {
            self.base.ln_at_log(z).exp()
        }
    }

    fn has_derivative(&self) -> bool {
        true
    }

    // A_n'(t) = A'(tau) / H'(tau), H'(tau) = ((n-1)/n) I(tau)^{-1/n} g(tau)
    fn derivative(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let z = self.ln_tau(t);
        if z == f64::INFINITY {
            return Some(f64::INFINITY);
        }
        let tau = z.exp();
        let ln_a = self.base.ln_at_log(z);
        let ln_g = (z - ln_a) / (self.n - 1.0);
        let idx = self.base_index(tau);
        let ln_d = ln_a - z + idx.ln() + self.n.ln() - (self.n - 1.0).ln() + t.ln() / (self.n - 1.0) - ln_g;
        Some(ln_d.exp())
    }

    fn ln_at_log(&self, z: f64) -> Option<f64> {
        let lt = self.ln_tau(z.exp());
        Some(if lt == f64::INFINITY { f64::INFINITY } else { self.base.ln_at_log(lt) })
    }
}

/// Optimal Sobolev conjugate `A_n = A o H^{-1}` with
/// `H(t) = (int_0^t (s/A(s))^{1/(n-1)} ds)^{(n-1)/n}`.
pub fn sobolev_conjugate(a: &YoungFunction, n: usize) -> Result<SobolevConjugate> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    if !a.is_finite_valued() {
        return Err(Error::Precondition(format!("{} is not finite-valued", a.name())));
    }
    let nf = n as f64;
    let ln_g = |tau: f64| (tau.ln() - a.ln_value(tau)) / (nf - 1.0);
    let g = |tau: f64| ln_g(tau).exp();
    let i0 = match integrate_from_zero(&g, TAU0, 1e-10) {
        EndBehaviour::Convergent { value, .. } => value,
        EndBehaviour::Divergent { decay_ratio } => {
            return Err(Error::NotIntegrableAtZero(format!(
                "(t/{})^(1/{}) is not integrable at 0 (dyadic decay ratio {decay_ratio:.4})",
                a.name(),
                n - 1
            )))
        }
    };
    let k0 = (ln_g(TAU0) - ln_g(0.5 * TAU0)) / 2f64.ln();
    let cap = a.effective_cap();
    let table = CumulativeTable::build(&g, TAU0, cap, 40, i0);

    let h = |w: f64| (w + (w - a.ln_at_log(w)) / (nf - 1.0)).exp();
    let mut w_nodes = vec![cap.ln()];
    let mut w_cum = vec![table.last_value()];
    let mut converged = false;
    loop {
        let wa = *w_nodes.last().unwrap();
        if wa >= W_MAX {
            break;
        }
        let wb = (wa + (0.05 * wa).max(0.25)).min(W_MAX);
        let inc = gauss8(&h, wa, wb);
        let total = *w_cum.last().unwrap() + inc;
        w_nodes.push(wb);
        w_cum.push(total);
        if !total.is_finite() || total > 1e300 {
            w_nodes.pop();
            w_cum.pop();
            break;
        }
        if inc <= 1e-17 * total && wb > wa + 5.0 {
            converged = true;
            break;
        }
    }
    let we = *w_nodes.last().unwrap();
    let tail_m = if we > 10.0 { (h(we).ln() - h(0.5 * we).ln()) / 2f64.ln() } else { 0.0 };
    let last = *w_cum.last().unwrap();
    let limit_i = if converged {
        Some(last)
    } else if we >= W_MAX && tail_m < -1.05 {
        Some(last + h(we) * we / (-tail_m - 1.0))
    } else {
        None
    };
    let classification = match limit_i {
        Some(l) => Classification::Convergent { limit: l.powf((nf - 1.0) / nf) },
        None => Classification::Divergent,
    };
    let profile = Sobolev { base: a.clone(), n: nf, i0, k0, table, w_nodes, w_cum, tail_m, limit_i };
    let finite_limit = match classification {
        Classification::Convergent { limit } => Some(limit),
        Classification::Divergent => None,
    };
    let function = YoungFunction::from_profile(
        format!("{}_{n}", a.name()),
        Kind::SobolevConjugateOf { base: a.clone(), n },
        Box::new(profile),
        finite_limit,
        a.domain_cap(),
    );
    Ok(SobolevConjugate { function, classification, regularized: false })
}

struct NearZeroPower {
    base: YoungFunction,
    t1: f64,
    a1: f64,
    kappa: f64,
}

impl Profile for NearZeroPower {
    fn value(&self, t: f64) -> f64 {
        if t >= self.t1 {
            self.base.value(t)
        } else {
            self.a1 * (t / self.t1).powf(self.kappa)
        }
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        if t >= self.t1 {
            Some(self.base.derivative_or_fd(t))
        } else {
            Some(self.kappa * self.a1 / self.t1 * (t / self.t1).powf(self.kappa - 1.0))
        }
    }
    fn has_derivative(&self) -> bool {
        true
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        if t >= self.t1 {
            self.base.second_derivative(t)
        } else {
            let k = self.kappa;
            Some(k * (k - 1.0) * self.a1 / (self.t1 * self.t1) * (t / self.t1).powf(k - 2.0))
        }
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        if z >= self.t1.ln() {
            Some(self.base.ln_at_log(z))
        } else {
            Some(self.a1.ln() + self.kappa * (z - self.t1.ln()))
        }
    }
}

/// Like [`sobolev_conjugate`], but when the integral diverges at the origin
/// the input is first replaced on `(0, 1)` by `A(1) t^k` with
/// `k = min(index of A at 1, (n+1)/2)`. This keeps `A` unchanged near
/// infinity, so `A_n` is unchanged there up to equivalence.
pub fn sobolev_conjugate_near_infinity(a: &YoungFunction, n: usize) -> Result<SobolevConjugate> {
    match sobolev_conjugate(a, n) {
        Err(Error::NotIntegrableAtZero(_)) => {}
        other => return other,
    }
    let t1 = 1.0;
    let a1 = a.value(t1);
    let idx = t1 * a.derivative_or_fd(t1) / a1;
    let kappa = idx.min(0.5 * (n as f64 + 1.0)).max(1.0);
    let reg = YoungFunction::from_profile(
        format!("{}~", a.name()),
        Kind::ClosedForm,
        Box::new(NearZeroPower { base: a.clone(), t1, a1, kappa }),
        None,
        a.domain_cap(),
    );
    let mut out = sobolev_conjugate(&reg, n)?;
    out.regularized = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn subcritical_power_slope() {
        // t^2 in dimension 3: exponent n p / (n - p) = 6
        let s = sobolev_conjugate(&power(2.0), 3).unwrap();
        assert_eq!(s.classification, Classification::Divergent);
        let f = &s.function;
        let slope = (f.value(1e4).ln() - f.value(1e2).ln()) / (1e2f64).ln();
        assert!((slope - 6.0).abs() < 1e-6, "{slope}");
        // closed form: H(t) = (2 sqrt t)^{2/3}, so A_n(t) = (t^{3/2} / 2)^4
        for &t in &[0.01f64, 1.0, 50.0] {
            let exact = (t.powf(1.5) / 2.0).powi(4);
            assert!((f.value(t) / exact - 1.0).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn regularized_power_log_matches_high_precision_quadrature() {
        // A' = t^2 ln(1+t), n = 4, regularized by A(1) t^{5/2} on (0, 1);
        // reference values from 30-digit quadrature and root finding
        let f = sobolev_conjugate_near_infinity(&power_log(3.0, 1.0), 4).unwrap().function;
        let (lo, hi) = (51.333_024_192_305_81, 110.245_315_838_147_79);
        assert!((f.ln_value(1e2) / lo - 1.0).abs() < 1e-10);
        assert!((f.ln_value(1e4) / hi - 1.0).abs() < 1e-10);
        // the local slope over [1e2, 1e4] is still well above the limit 12
        let slope = (hi - lo) / 1e2f64.ln();
        assert!((slope - 12.792_641_589).abs() < 1e-8, "{slope}");
    }

    #[test]
    fn critical_power_closed_form() {
        // A = t^3/3, n = 3, regularized by t^2/3 on (0, 1):
        // H(tau) = (sqrt 3 (2 + ln tau))^{2/3} for tau >= 1, so beyond H(1) = 12^{1/3}
        // ln A_3(t) = sqrt 3 t^{3/2} - 6 - ln 3
        let f = sobolev_conjugate_near_infinity(&power_log(3.0, 0.0), 3).unwrap().function;
        for t in [3.0f64, 10.0, 100.0, 1000.0] {
            let exact = 3f64.sqrt() * t.powf(1.5) - 6.0 - 3f64.ln();
            assert!((f.ln_value(t) / exact - 1.0).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn supercritical_power_is_convergent() {
        assert!(matches!(sobolev_conjugate(&power(5.0), 3), Err(Error::NotIntegrableAtZero(_))));
        let s = sobolev_conjugate_near_infinity(&power(5.0), 3).unwrap();
        match s.classification {
            Classification::Convergent { limit } => {
                // regularised A = t^2 on (0,1): I(inf) = int_0^1 t^{-1/2} + int_1^inf t^{-2} = 3
                assert!((limit / 3f64.powf(2.0 / 3.0) - 1.0).abs() < 1e-6, "{limit}");
                assert_eq!(s.function.value(1.01 * limit), f64::INFINITY);
                assert!(s.function.value(0.9 * limit).is_finite());
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn critical_power_needs_regularization() {
        assert!(matches!(sobolev_conjugate(&power(3.0), 3), Err(Error::NotIntegrableAtZero(_))));
        let s = sobolev_conjugate_near_infinity(&power(3.0), 3).unwrap();
        assert!(s.regularized);
        assert_eq!(s.classification, Classification::Divergent);
        let r: Vec<f64> = [10.0f64, 100.0, 1000.0].iter().map(|&t| s.function.ln_value(t) / t.powf(1.5)).collect();
        for v in &r {
            assert!(*v > 0.1 && *v < 10.0, "{r:?}");
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let s = sobolev_conjugate(&power_log(1.5, 0.5), 3).unwrap();
        for &t in &[0.3, 5.0, 40.0] {
            let h = 1e-6 * t;
            let fd = (s.function.value(t + h) - s.function.value(t - h)) / (2.0 * h);
            let d = s.function.derivative(t).unwrap();
            assert!((d / fd - 1.0).abs() < 1e-5, "{t}: {d} {fd}");
        }
    }
}

//! Bracketing searches on monotone scalar maps.

/// Returns `sup{t in [lo, hi] : f(t) <= y}` for a non-decreasing `f`, given
/// `f(lo) <= y < f(hi)`.
///
/// Regula falsi steps with the Illinois weighting are interleaved with
/// bisection so that the bracket shrinks at least geometrically. The lower end
/// of the final bracket is returned, so `f(result) <= y` always holds.
pub fn sup_below<F: Fn(f64) -> f64>(f: F, y: f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    sup_below_bracket(f, y, lo, hi, rel_tol).0
}

/// [`sup_below`] returning the final bracket `(lo, hi)` with `f(lo) <= y`.
pub fn sup_below_bracket<F: Fn(f64) -> f64>(f: F, y: f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    let mut flo = f(lo) - y;
    let mut fhi = f(hi) - y;
    let mut side = 0i8;
    for it in 0..400 {
        let width = hi - lo;
        if width <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) || width <= f64::EPSILON * hi.abs() {
            break;
        }
        let mut t = if it % 3 == 2 || !flo.is_finite() || !fhi.is_finite() || fhi <= flo {
            0.5 * (lo + hi)
        } else {
            lo - flo * width / (fhi - flo)
        };
        let margin = 1e-3 * width;
        if !(t > lo + margin && t < hi - margin) {
            t = 0.5 * (lo + hi);
        }
        let ft = f(t) - y;
        if ft <= 0.0 {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    (lo, hi)
}

/// Same as [`sup_below`] but the search runs in log space of the abscissa,
/// which suits brackets spanning many decades. Both ends must be positive.
pub fn sup_below_log<F: Fn(f64) -> f64>(f: F, y: f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let g = |z: f64| f(z.exp());
    let z = sup_below(g, y, lo.ln(), hi.ln(), 0.0_f64.max(rel_tol * 1e-3));
    // refine on the linear scale to honour the relative tolerance
    let a = z.exp();
    let b = (a * (1.0 + 4.0 * rel_tol.max(1e-15))).min(hi);
    if f(b) > y && b > a {
        sup_below(&f, y, a, b, rel_tol)
    } else {
        a
    }
}

/// Expands `hi` geometrically from `start` until `f(hi) > y`; returns `None`
/// when `limit` is reached first.
pub fn expand_upper<F: Fn(f64) -> f64>(f: F, y: f64, start: f64, limit: f64) -> Option<f64> {
    let mut hi = start;
    loop {
        if f(hi) > y {
            return Some(hi);
        }
        if hi >= limit {
            return None;
        }
        hi = (hi * 4.0).min(limit);
    }
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a) <= rel_tol * b.abs().max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_by_sup_below() {
        let r = sup_below(|t| t * t, 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(r * r <= 2.0);
    }

    #[test]
    fn flat_region_returns_right_end() {
        // f = 0 on [0, 1], then t - 1
        let f = |t: f64| (t - 1.0).max(0.0);
        let r = sup_below(f, 0.0, 0.0, 3.0, 1e-14);
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn log_search_many_decades() {
        let r = sup_below_log(|t| t.powi(3), 1e30, 1e-5, 1e20, 1e-13);
        assert!((r / 1e10 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_top() {
        let (x, _) = golden_max(|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
    }
}

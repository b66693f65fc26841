use std::path::Path;

use super::{Kind, Profile, YoungFunction, DEFAULT_DOMAIN_CAP};
use crate::error::{Error, Result};

/// Monotone cubic Hermite interpolant of `ln A` against `ln t`, extended by
/// the end slopes as power laws.
struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Table {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] <= 0.0 {
                    d[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Table { x, y, d }
    }

    // (ln A, d ln A / d ln t, d^2 ln A / d ln t^2)
    fn eval(&self, z: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if z <= self.x[0] {
            return (self.y[0] + self.d[0] * (z - self.x[0]), self.d[0], 0.0);
        }
        if z >= self.x[n - 1] {
            return (self.y[n - 1] + self.d[n - 1] * (z - self.x[n - 1]), self.d[n - 1], 0.0);
        }
        let k = self.x.partition_point(|&v| v <= z).saturating_sub(1).min(n - 2);
        let h = self.x[k + 1] - self.x[k];
        let s = (z - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = 6.0 * s * s - 6.0 * s;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * s * s - 2.0 * s;
        let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        let ddh00 = 12.0 * s - 6.0;
        let ddh10 = 6.0 * s - 4.0;
        let ddh11 = 6.0 * s - 2.0;
        let ddv = (ddh00 * y0 + ddh10 * d0 - ddh00 * y1 + ddh11 * d1) / (h * h);
        (v, dv, ddv)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

impl Profile for Table {
    fn value(&self, t: f64) -> f64 {
        self.eval(t.ln()).0.exp()
    }
    fn derivative(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let (v, dv, _) = self.eval(t.ln());
        Some(v.exp() * dv / t)
    }
    fn second_derivative(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let (v, dv, ddv) = self.eval(t.ln());
        Some(v.exp() / (t * t) * (dv * dv - dv + ddv))
    }
    fn ln_at_log(&self, z: f64) -> Option<f64> {
        Some(self.eval(z).0)
    }
}

/// Young function interpolating the samples `(t_k, A(t_k))`, which must be
/// positive and strictly increasing in both coordinates.
pub fn tabulated(name: impl Into<String>, t: &[f64], a: &[f64]) -> Result<YoungFunction> {
    if t.len() != a.len() || t.len() < 2 {
        return Err(Error::Domain("tabulated: need at least two (t, A) rows of equal length".into()));
    }
    for k in 0..t.len() {
        if !(t[k] > 0.0 && a[k] > 0.0 && t[k].is_finite() && a[k].is_finite()) {
            return Err(Error::Domain(format!("tabulated: row {k} must be positive and finite")));
        }
        if k > 0 && !(t[k] > t[k - 1] && a[k] > a[k - 1]) {
            return Err(Error::Domain(format!("tabulated: row {k} is not strictly increasing")));
        }
    }
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let cap = t[t.len() - 1].max(DEFAULT_DOMAIN_CAP);
    Ok(YoungFunction::from_profile(name, Kind::Tabulated, Box::new(Table::new(x, y)), None, cap))
}

/// Parses two whitespace- or comma-separated columns; `#` starts a comment.
pub fn tabulated_from_str(name: impl Into<String>, text: &str) -> Result<YoungFunction> {
    let mut t = Vec::new();
    let mut a = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::Domain(format!("tabulated: line {} must have two columns", ln + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Domain(format!("tabulated: line {}: cannot parse `{s}`", ln + 1)));
        t.push(parse(cols[0])?);
        a.push(parse(cols[1])?);
    }
    tabulated(name, &t, &a)
}

pub fn tabulated_from_file(path: &Path) -> Result<YoungFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    tabulated_from_str(path.display().to_string(), &text)
}

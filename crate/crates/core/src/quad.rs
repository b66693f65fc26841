//! One-dimensional quadrature: fixed Gauss rules, adaptive Gauss–Kronrod,
//! adaptive Simpson, and integrals over `(0, t]` with a possible integrable
//! singularity at the origin.

const GL8_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329_0, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL8_W: [f64; 4] = [0.362_683_783_378_362_0, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 8-point Gauss–Legendre on `[a, b]`.
pub fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        let dx = h * GL8_X[k];
        s += GL8_W[k] * (f(c - dx) + f(c + dx));
    }
    s * h
}

/// 15-point Kronrod estimate and the embedded 7-point Gauss error estimate.
pub fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod integration with relative tolerance `rel_tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
        let (val, err) = whole;
        if err <= tol || depth == 0 || !val.is_finite() {
            return val;
        }
        let m = 0.5 * (a + b);
        let l = kronrod15(f, a, m);
        let r = kronrod15(f, m, b);
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    let whole = kronrod15(f, a, b);
    let tol = (rel_tol * whole.0.abs()).max(abs_tol);
    rec(f, a, b, whole, tol, 40)
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Outcome of integrating toward an endpoint where the integrand may blow up
/// or decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndBehaviour {
    /// Dyadic contributions decay geometrically; value includes the tail.
    Convergent { value: f64, decay_ratio: f64 },
    /// Dyadic contributions do not decay; the integral is taken as infinite.
    Divergent { decay_ratio: f64 },
}

/// Integrates `f` over `(0, t]` by geometric refinement toward 0: the dyadic
/// pieces `[t 2^{-k-1}, t 2^{-k}]` are integrated adaptively and the remaining
/// tail is summed as a geometric series once the decay ratio has stabilised.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: &F, t: f64, rel_tol: f64) -> EndBehaviour {
    let mut total = 0.0;
    let mut pieces: Vec<f64> = Vec::new();
    let mut hi = t;
    for _ in 0..400 {
        let lo = 0.5 * hi;
        let piece = adaptive(f, lo, hi, rel_tol * 0.1, 0.0);
        if !piece.is_finite() {
            return EndBehaviour::Divergent { decay_ratio: f64::INFINITY };
        }
        total += piece;
        pieces.push(piece);
        hi = lo;
        let k = pieces.len();
        if k >= 12 {
            let ratio = decay_ratio(&pieces[k - 8..]);
            if ratio >= 0.985 {
                if k >= 40 {
                    return EndBehaviour::Divergent { decay_ratio: ratio };
                }
                continue;
            }
            let tail = piece * ratio / (1.0 - ratio);
            if tail.abs() <= rel_tol * total.abs() {
                return EndBehaviour::Convergent { value: total + tail, decay_ratio: ratio };
            }
        }
        if hi < 1e-300 {
            break;
        }
    }
    let k = pieces.len();
    let ratio = decay_ratio(&pieces[k.saturating_sub(8)..]);
    if ratio < 0.985 {
        let last = *pieces.last().unwrap_or(&0.0);
        EndBehaviour::Convergent { value: total + last * ratio / (1.0 - ratio), decay_ratio: ratio }
    } else {
        EndBehaviour::Divergent { decay_ratio: ratio }
    }
}

// geometric mean of successive ratios
fn decay_ratio(pieces: &[f64]) -> f64 {
    let n = pieces.len();
    if n < 2 {
        return 1.0;
    }
    let first = pieces[0].abs();
    let last = pieces[n - 1].abs();
    if first == 0.0 {
        return if last == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (last / first).powf(1.0 / (n - 1) as f64)
}

/// Cumulative integral of a positive function on a log grid, with a closed
/// near-zero model below the first node.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CumulativeTable {
    /// `head` must return the integral over `(0, nodes[0]]`.
    pub fn build<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, per_decade: usize, head: f64) -> Self {
        let decades = (hi / lo).log10();
        let n = (decades * per_decade as f64).ceil() as usize + 1;
        let step = decades / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|k| lo * 10f64.powf(k as f64 * step)).collect();
        let mut cumulative = Vec::with_capacity(n);
        cumulative.push(head);
        for k in 1..n {
            let prev = cumulative[k - 1];
            cumulative.push(prev + gauss8(f, nodes[k - 1], nodes[k]));
        }
        CumulativeTable { nodes, cumulative }
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn last_value(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Consecutive nodes whose cumulative values enclose `target`, which must
    /// lie within the table.
    pub fn bracket(&self, target: f64) -> (f64, f64) {
        let n = self.nodes.len();
        let k = self.cumulative.partition_point(|&c| c <= target).clamp(1, n - 1);
        (self.nodes[k - 1], self.nodes[k])
    }

    /// Integral over `(0, t]` for `lo <= t`; beyond `hi` the remainder is
    /// integrated on geometric panels.
    pub fn value<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        let n = self.nodes.len();
        if t >= self.nodes[n - 1] {
            let mut acc = self.cumulative[n - 1];
            let mut a = self.nodes[n - 1];
            while a < t {
                let b = (a * 1.05).min(t);
                acc += gauss8(f, a, b);
                a = b;
            }
            return acc;
        }
        let k = self.nodes.partition_point(|&x| x <= t).saturating_sub(1);
        self.cumulative[k] + gauss8(f, self.nodes[k], t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_exact_for_degree_15() {
        let v = gauss8(&|x: f64| x.powi(14) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = GL8_W.iter().sum::<f64>() * 2.0;
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_exact_for_polynomials() {
        let (v, _) = kronrod15(&|x: f64| x.powi(20), 0.0, 1.0);
        assert!((v - 1.0 / 21.0).abs() < 1e-14);
        let wsum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((wsum - 2.0).abs() < 1e-14);
        let gsum: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((gsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(&|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 0.0);
        let exact = 2.0 * (1.0 / 1e-2) * (1.0 / 1e-2f64).atan();
        assert!((v / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simpson_integrates_cubic() {
        let v = simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-10);
    }

    #[test]
    fn singular_at_zero_convergent() {
        // integral of x^{-1/2} over (0,1] is 2
        match integrate_from_zero(&|x: f64| x.powf(-0.5), 1.0, 1e-10) {
            EndBehaviour::Convergent { value, .. } => assert!((value - 2.0).abs() < 1e-8, "{value}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singular_at_zero_divergent() {
        assert!(matches!(integrate_from_zero(&|x: f64| 1.0 / x, 1.0, 1e-10), EndBehaviour::Divergent { .. }));
    }

    #[test]
    fn cumulative_table_matches_closed_form() {
        let f = |x: f64| x * x;
        let lo = 1e-3;
        let table = CumulativeTable::build(&f, lo, 1e3, 50, lo.powi(3) / 3.0);
        for &t in &[0.01, 0.5, 7.3, 999.0, 2500.0] {
            let v = table.value(&f, t);
            assert!((v / (t * t * t / 3.0) - 1.0).abs() < 1e-13, "{t}");
        }
    }
}

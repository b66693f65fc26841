//! Leray–Lions vector fields `ā(x, s, ξ)`, convection terms `f(x, s, ξ)`,
//! and sampled checks of their structural hypotheses.

mod conditions;
mod convection;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::grid::GridFunction;
use crate::young::{power_log, YoungFunction};

pub use conditions::{
    a1_slack, a2_slack, a3_slack, check_a1, check_a2, check_a3, check_potential, check_structure_conditions, exponent_difference_constant,
    fit_equiv_constants, lemlib_constants, potential_gradient_slack, struct_a_ratio, struct_b_ratio, struct_c_ratio, A1Constants,
    A3Constants, ConditionId, ConditionReport, EquivConstants, LemlibReport, SampleWitness, StructureReport,
};
pub use convection::{
    certificate_constants, check_f_growth, custom_convection, f_growth_slack, fpq_k, make_convection, Certificate, ConvectionTerm,
    FGrowthVariant, GrowthBounds, Profile, ScalarField, BUILTIN_CONVECTIONS,
};
pub use sampling::SampleSpec;

pub type Point = [f64; 2];
pub type Params = BTreeMap<String, f64>;
pub(crate) type RadialFn = Arc<dyn Fn(Point, f64, f64) -> f64 + Send + Sync>;
pub(crate) type FieldFn = Arc<dyn Fn(Point, f64, Point) -> Point + Send + Sync>;

/// A scalar field on the domain: a constant, an expression in `x`, `y`, `r`,
/// or nodal values interpolated piecewise-linearly.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Expr(Expr),
    Grid(GridFunction),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "{c}"),
            Coefficient::Expr(e) => write!(f, "{e}"),
            Coefficient::Grid(g) => write!(f, "grid[{} nodes]", g.values().len()),
        }
    }
}

impl Coefficient {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Expr(e) => e.eval(&Vars::new(x, 0.0, 0.0)),
            Coefficient::Grid(g) => g.eval_at(x),
        }
    }

    /// Parses an expression in the point variables; `s` and `xi` are rejected.
    pub fn parse(source: &str, params: &Params) -> Result<Coefficient> {
        let e = Expr::parse(source, params)?;
        if e.uses_s() || e.uses_xi() {
            return Err(Error::Expr(format!("coefficient `{source}` may only depend on x, y, r")));
        }
        Ok(Coefficient::Expr(e))
    }
}

#[derive(Clone)]
enum Field {
    /// `ā = φ(x, s, |ξ|) ξ`
    Radial(RadialFn),
    General(FieldFn),
}

/// A vector field `ā(x, s, ξ)`, usually radial (`φ(x, s, |ξ|) ξ`), optionally
/// with a potential `Φ(x, s, |ξ|)` in the gradient variable.
#[derive(Clone)]
pub struct EllipticOperator {
    name: String,
    params: Params,
    field: Field,
    potential: Option<RadialFn>,
    coefficient: Option<Coefficient>,
}

impl fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("has_potential", &self.potential.is_some())
            .field("coefficient", &self.coefficient)
            .finish()
    }
}

impl EllipticOperator {
    /// Builds `ā = φ(x, s, |ξ|) ξ` from its scalar factor.
    pub fn radial(
        name: impl Into<String>,
        params: Params,
        phi: impl Fn(Point, f64, f64) -> f64 + Send + Sync + 'static,
        potential: Option<RadialFn>,
        coefficient: Option<Coefficient>,
    ) -> Self {
        EllipticOperator { name: name.into(), params, field: Field::Radial(Arc::new(phi)), potential, coefficient }
    }

    /// Builds an arbitrary field; it is evaluated as given, also at `ξ = 0`.
    pub fn general(name: impl Into<String>, params: Params, field: impl Fn(Point, f64, Point) -> Point + Send + Sync + 'static) -> Self {
        EllipticOperator { name: name.into(), params, field: Field::General(Arc::new(field)), potential: None, coefficient: None }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.field, Field::Radial(_))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn coefficient(&self) -> Option<&Coefficient> {
        self.coefficient.as_ref()
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// `ā(x, s, ξ)`; radial fields are exactly zero at `ξ = 0`.
    pub fn evaluate(&self, x: Point, s: f64, xi: Point) -> Point {
        match &self.field {
            Field::Radial(phi) => {
                let t = xi[0].hypot(xi[1]);
                if t == 0.0 {
                    return [0.0, 0.0];
                }
                let f = phi(x, s, t);
                [f * xi[0], f * xi[1]]
            }
            Field::General(g) => g(x, s, xi),
        }
    }

    /// `φ(x, s, t)` with `ā = φ ξ`, for radial fields.
    pub fn factor(&self, x: Point, s: f64, t: f64) -> Option<f64> {
        match &self.field {
            Field::Radial(phi) => Some(phi(x, s, t)),
            Field::General(_) => None,
        }
    }

    /// `ā(x, clamp(s, -m, m), ξ)`, the operator frozen in `s` beyond `|s| = m`.
    pub fn clamped_in_s(&self, m: f64) -> EllipticOperator {
        let clamp = move |s: f64| s.clamp(-m, m);
        let field = match &self.field {
            Field::Radial(phi) => {
                let phi = phi.clone();
                Field::Radial(Arc::new(move |x, s, t| phi(x, clamp(s), t)))
            }
            Field::General(g) => {
                let g = g.clone();
                Field::General(Arc::new(move |x, s, xi| g(x, clamp(s), xi)))
            }
        };
        let potential = self.potential.clone().map(|p| -> RadialFn { Arc::new(move |x, s, t| p(x, clamp(s), t)) });
        EllipticOperator {
            name: format!("{}_clamped", self.name),
            params: self.params.clone(),
            field,
            potential,
            coefficient: self.coefficient.clone(),
        }
    }

    /// `Φ(x, s, ξ)` when a potential is known.
    pub fn potential(&self, x: Point, s: f64, xi: Point) -> Option<f64> {
        self.potential.as_ref().map(|p| p(x, s, xi[0].hypot(xi[1])))
    }
}

fn constraint(op: &str, ok: bool, text: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Constraint { name: op.to_string(), constraint: text.to_string() })
    }
}

/// Reads the declared parameters, rejecting unknown and missing keys.
pub(crate) fn read_params<const N: usize>(
    op: &str,
    params: &Params,
    required: [&str; N],
    optional: &[(&str, f64)],
) -> Result<([f64; N], Params)> {
    for k in params.keys() {
        if !required.contains(&k.as_str()) && !optional.iter().any(|(o, _)| o == k) {
            return Err(Error::Constraint { name: op.to_string(), constraint: format!("unknown parameter `{k}`") });
        }
    }
    let mut out = [0.0; N];
    let mut all = Params::new();
    for (slot, key) in out.iter_mut().zip(required) {
        *slot =
            *params.get(key).ok_or_else(|| Error::Constraint { name: op.to_string(), constraint: format!("missing parameter `{key}`") })?;
        constraint(op, slot.is_finite(), &format!("`{key}` must be finite"))?;
        all.insert(key.to_string(), *slot);
    }
    for (key, default) in optional {
        let v = params.get(*key).copied().unwrap_or(*default);
        constraint(op, v.is_finite(), &format!("`{key}` must be finite"))?;
        all.insert(key.to_string(), v);
    }
    Ok((out, all))
}

/// `ln^e(1 + t)` with the convention `ln^0 = 1`.
#[inline]
pub(crate) fn lg_pow(t: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        t.ln_1p().powf(e)
    }
}

fn coeff_or_one(c: &Option<Coefficient>) -> Coefficient {
    c.clone().unwrap_or(Coefficient::Constant(1.0))
}

/// Names accepted by [`make_builtin`].
pub const BUILTIN_OPERATORS: &[&str] = &[
    "p_laplacian",
    "orlicz_laplacian",
    "exA_sub_n",
    "exA_eq_n",
    "exA_q_n_minus_1",
    "xsuf",
    "xuf",
    "areg",
    "xuxifreg",
    "flat",
    "exp_growth",
    "saturating",
    "offset_identity",
];

/// Instantiates a built-in operator family after checking its parameter
/// constraints. `coefficient` is the weight `a(x)` where the family has one
/// (defaults to `1`).
pub fn make_builtin(name: &str, params: &Params, coefficient: Option<Coefficient>) -> Result<EllipticOperator> {
    match name {
        "p_laplacian" => {
            let ([p], all) = read_params(name, params, ["p"], &[])?;
            constraint(name, p > 1.0, "p > 1")?;
            Ok(EllipticOperator::radial(name, all, move |_, _, t| t.powf(p - 2.0), Some(Arc::new(move |_, _, t: f64| t.powf(p) / p)), None))
        }
        "orlicz_laplacian" => {
            let ([p, q], all) = read_params(name, params, ["p", "q"], &[])?;
            constraint(name, p > 1.0, "p > 1")?;
            constraint(name, p + q - 1.0 > 0.0, "p + q - 1 > 0")?;
            let a = power_log(p, q);
            Ok(EllipticOperator::radial(
                name,
                all,
                move |_, _, t| t.powf(p - 2.0) * lg_pow(t, q),
                Some(Arc::new(move |_, _, t| a.value(t))),
                None,
            ))
        }
        "exA_sub_n" => {
            let ([n, p, q, delta, beta, beta1, r], all) = read_params(name, params, ["n", "p", "q", "delta", "beta", "beta1", "r"], &[])?;
            general_exa(name, n, p, q)?;
            constraint(name, p < n, "p < n")?;
            constraint(name, 0.0 < delta && delta < p - 1.0 && p - 1.0 < n - 1.0, "0 < delta < p - 1 < n - 1")?;
            let top = n * delta / (n - p);
            if beta == 0.0 {
                // borderline: the s-factor is ln^{beta1}(1+|s|), bounded near 0
                constraint(name, beta1 >= 0.0, "beta = 0 requires beta1 >= 0")?;
                constraint(name, r >= p / delta, "beta = 0 requires r >= p / delta")?;
            } else if beta == top {
                constraint(
                    name,
                    beta1 > -top && beta1 < q * delta * (n - 1.0) / ((n - p) * (p - 1.0)),
                    "beta = n delta/(n-p) requires -n delta/(n-p) < beta1 < q delta (n-1)/((n-p)(p-1))",
                )?;
                check_bounded(name, &coefficient)?;
            } else {
                constraint(name, 0.0 < beta && beta < top, "0 < beta < n delta/(n-p)")?;
                constraint(name, beta + beta1 > 0.0, "beta + beta1 > 0")?;
                constraint(name, r > n * p / (n * delta - beta * (n - p)), "r > n p/(n delta - beta (n-p))")?;
            }
            let a = coeff_or_one(&coefficient);
            let e_log = q * (1.0 - delta / (p - 1.0));
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, s, t| {
                    let w = a.eval(x) * s.abs().powf(beta) * lg_pow(s.abs(), beta1);
                    let lead = if w == 0.0 { 0.0 } else { w * t.powf(p - 2.0 - delta) * lg_pow(t, e_log) };
                    lead + t.powf(p - 2.0) * lg_pow(t, q)
                },
                None,
                coefficient,
            ))
        }
        "exA_eq_n" => {
            let ([n, q, delta, beta, r], all) = read_params(name, params, ["n", "q", "delta", "beta", "r"], &[])?;
            general_exa(name, n, n, q)?;
            constraint(name, q < n - 1.0, "q < n - 1")?;
            constraint(name, 0.0 < delta && delta < n - 1.0, "0 < delta < n - 1")?;
            constraint(name, 0.0 < beta && beta < n / (n - q - 1.0), "0 < beta < n/(n - q - 1)")?;
            constraint(name, r > n / delta, "r > n / delta")?;
            let a = coeff_or_one(&coefficient);
            let e_log = q * (1.0 - delta / (n - 1.0));
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, s, t| {
                    a.eval(x) * s.abs().powf(beta).exp() * t.powf(n - 2.0 - delta) * lg_pow(t, e_log) + t.powf(n - 2.0) * lg_pow(t, q)
                },
                None,
                coefficient,
            ))
        }
        "exA_q_n_minus_1" => {
            let ([n, delta, beta, r], all) = read_params(name, params, ["n", "delta", "beta", "r"], &[])?;
            general_exa(name, n, n, n - 1.0)?;
            constraint(name, 0.0 < delta && delta < n - 1.0, "0 < delta < n - 1")?;
            constraint(name, 0.0 < beta && beta < n / (n - 1.0), "0 < beta < n/(n - 1)")?;
            constraint(name, r > n / delta, "r > n / delta")?;
            let a = coeff_or_one(&coefficient);
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, s, t| {
                    a.eval(x) * s.abs().powf(beta).exp().exp() * t.powf(n - 2.0 - delta) * lg_pow(t, n - 1.0 - delta)
                        + t.powf(n - 2.0) * lg_pow(t, n - 1.0)
                },
                None,
                coefficient,
            ))
        }
        "xsuf" => {
            let ([p, q, delta], all) = read_params(name, params, ["p", "q", "delta"], &[])?;
            constraint(name, p > 1.0, "p > 1")?;
            constraint(name, 0.0 < delta && delta < p - 1.0, "0 < delta < p - 1")?;
            constraint(name, p + q > 1.0, "p + q > 1")?;
            let a = coeff_or_one(&coefficient);
            let e_log = q * (1.0 - delta / (p - 1.0));
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, _, t| a.eval(x) * t.powf(p - 2.0 - delta) * lg_pow(t, e_log) + t.powf(p - 2.0) * lg_pow(t, q),
                None,
                coefficient,
            ))
        }
        "xuf" => {
            let ([p, r], all) = read_params(name, params, ["p", "r"], &[("n", f64::MAX)])?;
            constraint(name, 1.0 < r && r < p, "1 < r < p")?;
            let n = all["n"];
            constraint(name, p < n, "p < n")?;
            let a = coeff_or_one(&coefficient);
            let a2 = a.clone();
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, _, t| a.eval(x) * t.powf(r - 2.0) + t.powf(p - 2.0),
                Some(Arc::new(move |x, _, t: f64| a2.eval(x) * t.powf(r) / r + t.powf(p) / p)),
                coefficient,
            ))
        }
        "areg" => {
            let ([p, q, gamma, delta], all) = read_params(name, params, ["p", "q", "gamma", "delta"], &[])?;
            constraint(name, p > 1.0, "p > 1")?;
            constraint(name, p + q - 1.0 > 0.0, "p + q - 1 > 0")?;
            constraint(name, gamma > 0.0, "gamma > 0")?;
            constraint(name, delta > 0.0, "delta > 0")?;
            let a = power_log(p, q);
            let w = move |x: Point, s: f64| x[0].hypot(x[1]).powf(gamma) * s.abs().powf(delta) + 1.0;
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, s, t| w(x, s) * t.powf(p - 2.0) * lg_pow(t, q),
                Some(Arc::new(move |x, s, t| w(x, s) * a.value(t))),
                None,
            ))
        }
        "xuxifreg" => {
            let ([p, q, gamma], all) = read_params(name, params, ["p", "q", "gamma"], &[])?;
            constraint(name, p > 1.0, "p > 1")?;
            constraint(name, p + q - 1.0 > 0.0, "p + q - 1 > 0")?;
            constraint(name, gamma > 0.0, "gamma > 0")?;
            let a = power_log(p, q);
            let w = move |x: Point, s: f64| x[0].hypot(x[1]).powf(gamma) * s.abs().exp();
            Ok(EllipticOperator::radial(
                name,
                all,
                move |x, s, t| w(x, s) * t.powf(p - 2.0) * lg_pow(t, q),
                Some(Arc::new(move |x, s, t| w(x, s) * a.value(t))),
                None,
            ))
        }
        "flat" => {
            let (_, all) = read_params(name, params, [], &[])?;
            Ok(EllipticOperator::radial(name, all, |_, _, t| (t - 1.0).max(0.0) / t, None, None))
        }
        "exp_growth" => {
            let (_, all) = read_params(name, params, [], &[])?;
            Ok(EllipticOperator::radial(name, all, |_, _, t| t.exp(), None, None))
        }
        "saturating" => {
            let (_, all) = read_params(name, params, [], &[])?;
            Ok(EllipticOperator::radial(name, all, |_, _, t| 1.0 / (1.0 + t), None, None))
        }
        "offset_identity" => {
            let ([c], all) = read_params(name, params, ["c"], &[])?;
            Ok(EllipticOperator::general(name, all, move |_, _, xi| [xi[0] + c, xi[1]]))
        }
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

fn general_exa(op: &str, n: f64, p: f64, q: f64) -> Result<()> {
    constraint(op, 1.0 < p && p <= n, "1 < p <= n")?;
    constraint(op, q <= n - 1.0, "q <= n - 1")?;
    constraint(op, p - 1.0 + q > 0.0, "p - 1 + q > 0")
}

fn check_bounded(op: &str, c: &Option<Coefficient>) -> Result<()> {
    match c {
        None | Some(Coefficient::Constant(_)) | Some(Coefficient::Grid(_)) => Ok(()),
        Some(Coefficient::Expr(e)) if !e.uses_x() => Ok(()),
        Some(_) => Err(Error::Constraint {
            name: op.to_string(),
            constraint: "beta = n delta/(n-p) requires a bounded weight (constant or grid)".into(),
        }),
    }
}

/// An operator `ā = φ ξ` whose factor `φ` is an expression in
/// `x, y, r, s, xi`; `potential`, if given, is `Φ` in the same variables.
pub fn custom_operator(name: impl Into<String>, phi: &str, potential: Option<&str>, params: &Params) -> Result<EllipticOperator> {
    let e = Expr::parse(phi, params)?;
    let pot = match potential {
        Some(src) => {
            let pe = Expr::parse(src, params)?;
            let f: RadialFn = Arc::new(move |x, s, t| pe.eval(&Vars::new(x, s, t)));
            Some(f)
        }
        None => None,
    };
    Ok(EllipticOperator::radial(name, params.clone(), move |x, s, t| e.eval(&Vars::new(x, s, t)), pot, None))
}

/// The Young function naturally attached to a built-in family, if any.
pub fn natural_young_function(op: &EllipticOperator) -> Option<YoungFunction> {
    let p = op.param("p");
    match op.name() {
        "p_laplacian" => p.map(crate::young::power_over_p),
        "orlicz_laplacian" | "areg" | "xuxifreg" | "xsuf" => Some(power_log(p?, op.param("q")?)),
        "exA_sub_n" => Some(power_log(p?, op.param("q")?)),
        "exA_eq_n" => Some(power_log(op.param("n")?, op.param("q")?)),
        "exA_q_n_minus_1" => {
            let n = op.param("n")?;
            Some(power_log(n, n - 1.0))
        }
        "xuf" => p.map(crate::young::power_over_p),
        _ => None,
    }
}

/// The `s`-growth function `F` of the growth bound for the exA families,
/// fixed up to equivalence near infinity.
pub fn natural_growth_f(op: &EllipticOperator) -> Option<YoungFunction> {
    let g = |k: &str| op.param(k);
    match op.name() {
        "exA_sub_n" => {
            let (p, q, delta, beta, beta1, r) = (g("p")?, g("q")?, g("delta")?, g("beta")?, g("beta1")?, g("r")?);
            let k = r * p / (r * delta - p);
            let (e, l) = (beta * k, beta1 * k - q / (p - 1.0));
            (e > 1.0 && e + l > 1.0 && r * delta > p).then(|| power_log(e, l))
        }
        "exA_eq_n" => Some(crate::young::exp_power(g("beta")?)),
        "exA_q_n_minus_1" => Some(crate::young::exp_exp_power(g("beta")?)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn p_laplacian_two_is_identity() {
        let op = make_builtin("p_laplacian", &params(&[("p", 2.0)]), None).unwrap();
        for xi in [[0.3, -1.2], [1e-9, 0.0], [5.0, 7.0]] {
            assert_eq!(op.evaluate([0.1, 0.2], 3.0, xi), xi);
        }
        assert_eq!(op.evaluate([0.0, 0.0], 0.0, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn xsuf_equals_exa_with_zero_s_exponents() {
        let a = make_builtin(
            "exA_sub_n",
            &params(&[("n", 3.0), ("p", 2.5), ("q", 0.5), ("delta", 1.0), ("beta", 0.0), ("beta1", 0.0), ("r", 2.5)]),
            None,
        )
        .unwrap();
        let b = make_builtin("xsuf", &params(&[("p", 2.5), ("q", 0.5), ("delta", 1.0)]), None).unwrap();
        for (s, xi) in [(0.0, [0.5, 0.1]), (3.0, [10.0, -2.0]), (-7.0, [1e-3, 1e-4])] {
            assert_eq!(a.evaluate([0.2, 0.3], s, xi), b.evaluate([0.2, 0.3], s, xi));
        }
    }

    #[test]
    fn constraint_violations_are_named() {
        let err = make_builtin(
            "exA_sub_n",
            &params(&[("n", 3.0), ("p", 2.5), ("q", 0.5), ("delta", 1.5), ("beta", 0.4), ("beta1", 0.1), ("r", 4.0)]),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Constraint { ref constraint, .. } if constraint.contains("delta < p - 1")));
        let err = make_builtin("xsuf", &params(&[("p", 2.5), ("q", 0.5), ("delta", 2.0)]), None).unwrap_err();
        assert!(matches!(err, Error::Constraint { ref name, .. } if name == "xsuf"));
        assert!(matches!(make_builtin("nope", &Params::new(), None), Err(Error::UnknownBuiltin(_))));
        let err = make_builtin("p_laplacian", &params(&[("p", 2.0), ("w", 1.0)]), None).unwrap_err();
        assert!(matches!(err, Error::Constraint { ref constraint, .. } if constraint.contains("`w`")));
        let err = make_builtin("p_laplacian", &Params::new(), None).unwrap_err();
        assert!(matches!(err, Error::Constraint { ref constraint, .. } if constraint.contains("missing")));
    }

    #[test]
    fn borderline_beta_sets_are_admissible() {
        let base = [("n", 3.0), ("p", 2.5), ("q", 0.5), ("delta", 1.0)];
        let mut p0 = params(&base);
        p0.extend(params(&[("beta", 0.0), ("beta1", 0.3), ("r", 2.5)]));
        assert!(make_builtin("exA_sub_n", &p0, None).is_ok());
        p0.insert("r".into(), 2.4);
        assert!(make_builtin("exA_sub_n", &p0, None).is_err());
        let mut p1 = params(&base);
        p1.extend(params(&[("beta", 6.0), ("beta1", 0.5), ("r", 1.0)]));
        assert!(make_builtin("exA_sub_n", &p1, None).is_ok());
        p1.insert("beta1".into(), 2.0);
        assert!(make_builtin("exA_sub_n", &p1, None).is_err());
        p1.insert("beta1".into(), 0.5);
        let unbounded = Coefficient::parse("1 / r", &Params::new()).unwrap();
        assert!(make_builtin("exA_sub_n", &p1, Some(unbounded)).is_err());
    }

    #[test]
    fn custom_operator_reads_the_expression() {
        let op = custom_operator("c", "pow(xi, p - 2) * (1 + x)", Some("pow(xi, p) / p * (1 + x)"), &params(&[("p", 3.0)])).unwrap();
        let v = op.evaluate([1.0, 0.0], 0.0, [2.0, 0.0]);
        assert_eq!(v, [8.0, 0.0]);
        assert_eq!(op.potential([1.0, 0.0], 0.0, [0.0, 2.0]), Some(16.0 / 3.0));
    }

    #[test]
    fn weight_from_grid_is_interpolated() {
        use crate::mesh::{Mesh, MeshSpec};
        let m = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 3 }).unwrap());
        let g = GridFunction::from_fn(m, |x| 1.0 + x[0]);
        let op = make_builtin("xsuf", &params(&[("p", 2.5), ("q", 0.0), ("delta", 1.0)]), Some(Coefficient::Grid(g))).unwrap();
        let t: f64 = 2.0;
        let want = 1.25 * t.powf(-0.5) + t.powf(0.5);
        assert!((op.factor([0.25, 0.0], 0.0, t).unwrap() - want).abs() < 1e-14);
    }
}

//! Subcommand orchestration and artifact emission.

use std::fmt::Write as _;
use std::path::Path;

use orlicz_core::grid::GridFunction;
use orlicz_core::operators::{
    check_a1, check_a2, check_a3, check_f_growth, check_potential, check_structure_conditions, lemlib_constants, natural_growth_f,
    ConditionReport, FGrowthVariant, GrowthBounds, SampleSpec,
};
use orlicz_core::solver::{
    minimize_functional, run_regularity_pipeline, solve_truncated, sub_super_check, verify_solution, TruncatedProblem, VariationalData,
};
use orlicz_core::young::{
    check_delta2, check_nabla2, estimate_indices, log_grid, sobolev_conjugate, sobolev_conjugate_near_infinity, Classification, Regime,
    YoungFunction,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::build::{self, Setup};
use crate::catalog;
use crate::config::{serialize_config, ConfigError, GrowthVariantDecl, RunConfig, Subcommand};

/// Failure categories; each maps to one exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    NotConverged,
    CheckFailed,
    Config,
    Precondition,
    Numerical,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::NotConverged | Category::CheckFailed => 1,
            Category::Config => 2,
            Category::Precondition => 3,
            Category::Numerical => 4,
            Category::Io => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::NotConverged => "not_converged",
            Category::CheckFailed => "check_failed",
            Category::Config => "config",
            Category::Precondition => "precondition",
            Category::Numerical => "numerical",
            Category::Io => "io",
        }
    }

    pub fn of(e: &orlicz_core::Error) -> Self {
        use orlicz_core::Error as E;
        match e {
            E::Domain(_) | E::Constraint { .. } | E::UnknownBuiltin(_) | E::Expr(_) => Category::Config,
            E::Precondition(_) | E::NotIntegrableAtZero(_) | E::Degenerate(_) | E::NoNegativeEnergy { .. } => Category::Precondition,
            E::Singular { .. } | E::NonFinite { .. } | E::LineSearch(_) | E::Noise(_) | E::EscalationExhausted { .. } | E::Other(_) => {
                Category::Numerical
            }
        }
    }
}

/// The result of a subcommand before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub subcommand: Option<Subcommand>,
    /// `None` on success.
    pub failure: Option<Category>,
    pub report: Value,
    pub summary: String,
    /// Extra files: name and contents.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.map_or(0, Category::exit_code)
    }

    pub fn failure(config: &RunConfig, category: Category, message: String) -> Self {
        let mut o = Outcome::new(config, Value::Null, String::new(), Some(category));
        o.report["error"] = Value::String(message.clone());
        o.summary = format!("{}: failed ({})\n{message}\n", subcommand_name(config), category.as_str());
        o
    }

    fn new(config: &RunConfig, result: Value, summary: String, failure: Option<Category>) -> Self {
        let status = match failure {
            None => "ok",
            Some(Category::NotConverged) => "not_converged",
            Some(Category::CheckFailed) => "check_failed",
            Some(_) => "failed",
        };
        let report = json!({
            "subcommand": subcommand_name(config),
            "catalog": config.catalog,
            "seed": config.seed,
            "threads": config.threads,
            "status": status,
            "category": failure.map(Category::as_str),
            "result": result,
        });
        Outcome { subcommand: config.subcommand, failure, report, summary, files: Vec::new() }
    }

    /// `report.json` text.
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Writes `report.json`, `summary.txt` and the extra files into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report_json())?;
        std::fs::write(dir.join("summary.txt"), &self.summary)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn subcommand_name(config: &RunConfig) -> &'static str {
    config.subcommand.map_or("none", Subcommand::as_str)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Runs the configured subcommand in memory.
pub fn execute(config: &RunConfig) -> Outcome {
    let setup = match build::build(config) {
        Ok(s) => s,
        Err(e) => return Outcome::failure(config, Category::Config, e.to_string()),
    };
    let result = match config.subcommand.expect("validated") {
        Subcommand::Catalog => Ok(catalog_listing(config)),
        Subcommand::YoungAnalyze => young_analyze(config, &setup),
        Subcommand::CheckOperator => check_operator(config, &setup),
        Subcommand::Solve => solve(config, &setup),
        Subcommand::Regularity => regularity(config, &setup),
    };
    match result {
        Ok(o) => o,
        Err(Failure::Core(e)) => Outcome::failure(config, Category::of(&e), e.to_string()),
        Err(Failure::Config(e)) => Outcome::failure(config, Category::Config, e.to_string()),
    }
}

/// Runs the subcommand, writes its artifacts into `out`, and returns the
/// outcome; an unwritable directory turns into an `io` failure.
pub fn run(config: &RunConfig, out: &Path) -> Outcome {
    let outcome = execute(config);
    match outcome.write(out) {
        Ok(()) => outcome,
        Err(e) => Outcome::failure(config, Category::Io, format!("{}: {e}", out.display())),
    }
}

enum Failure {
    Core(orlicz_core::Error),
    Config(ConfigError),
}

impl From<orlicz_core::Error> for Failure {
    fn from(e: orlicz_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

type Step<T> = Result<T, Failure>;

// ---------------------------------------------------------------- catalog

fn catalog_listing(config: &RunConfig) -> Outcome {
    let mut summary = String::new();
    let mut files = Vec::new();
    let result = match config.catalog.as_deref() {
        Some(name) => {
            let text = catalog::entry_text(name).expect("validated");
            let expanded: RunConfig = toml::from_str(text).expect("catalog entries parse");
            let toml_text = serialize_config(&RunConfig { catalog: Some(name.to_string()), ..expanded });
            summary.push_str(&toml_text);
            files.push(("config.toml".to_string(), toml_text.clone()));
            json!({ "entry": name, "config": toml_text })
        }
        None => {
            for e in catalog::ENTRIES {
                let _ = writeln!(summary, "{:<12} {}", e.name, e.summary);
            }
            let entries: Vec<Value> = catalog::ENTRIES.iter().map(|e| json!({ "name": e.name, "summary": e.summary })).collect();
            json!({ "entries": entries })
        }
    };
    let mut o = Outcome::new(config, result, summary, None);
    o.files = files;
    o
}

// ---------------------------------------------------------------- young-analyze

fn log_slope(a: &YoungFunction, t1: f64, t2: f64) -> f64 {
    (a.ln_value(t2) - a.ln_value(t1)) / (t2 / t1).ln()
}

fn young_analyze(config: &RunConfig, setup: &Setup) -> Step<Outcome> {
    let analysis = config.analysis.clone().unwrap_or_else(|| toml::from_str("").expect("defaults"));
    let names: Vec<String> = if analysis.functions.is_empty() { setup.young.keys().cloned().collect() } else { analysis.functions.clone() };
    let grid = log_grid(analysis.t_min, analysis.t_max, analysis.points);
    let mut results = serde_json::Map::new();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut summary = String::new();
    let mut first_error: Option<orlicz_core::Error> = None;
    for name in &names {
        let a = &setup.young[name];
        let conj = a.conjugate();
        let mut entry = serde_json::Map::new();
        let _ = writeln!(summary, "{name}:");
        match estimate_indices(a) {
            Ok(ix) => {
                let _ = writeln!(
                    summary,
                    "  indices i = {:.6}, s = {:.6}, near infinity i = {:.6}, s = {:.6}",
                    ix.i_inf, ix.s_sup, ix.i_inf_infinity, ix.s_sup_infinity
                );
                entry.insert("indices".into(), to_value(&ix));
            }
            Err(e) => {
                entry.insert("indices".into(), json!({ "error": e.to_string() }));
                first_error.get_or_insert(e);
            }
        }
        let mut growth = serde_json::Map::new();
        for (label, regime) in [("global", Regime::Global), ("near_infinity", Regime::NearInfinity)] {
            let d = check_delta2(a, regime);
            let n = check_nabla2(a, regime);
            let _ = writeln!(summary, "  {label}: delta2 {}, nabla2 {}", pass(d.holds), pass(n.holds));
            growth.insert(format!("delta2_{label}"), to_value(&d));
            growth.insert(format!("nabla2_{label}"), to_value(&n));
        }
        entry.insert("growth".into(), Value::Object(growth));
        columns.push((name.clone(), grid.iter().map(|&t| a.value(t)).collect()));
        columns.push((format!("{name}_conjugate"), grid.iter().map(|&t| conj.value(t)).collect()));
        if let Some(n) = analysis.n {
            // Near zero the integrability condition may fail while the growth
            // at infinity is still meaningful.
            let built = match sobolev_conjugate(a, n) {
                Err(orlicz_core::Error::NotIntegrableAtZero(_)) => sobolev_conjugate_near_infinity(a, n),
                other => other,
            };
            match built {
                Ok(sc) => {
                    let an = &sc.function;
                    let slope = log_slope(an, 1e2, 1e4);
                    let class = match sc.classification {
                        Classification::Divergent => "divergent".to_string(),
                        Classification::Convergent { limit } => {
                            format!("convergent (limit {limit:.6e})")
                        }
                    };
                    let _ = writeln!(summary, "  A_{n}: {class}, log-log slope on [1e2, 1e4] = {slope:.6}");
                    entry.insert(
                        "sobolev_conjugate".into(),
                        json!({
                            "n": n,
                            "classification": to_value(&sc.classification),
                            "regularized": sc.regularized,
                            "slope_1e2_1e4": slope,
                        }),
                    );
                    columns.push((format!("{name}_n{n}"), grid.iter().map(|&t| an.value(t)).collect()));
                }
                Err(e) => {
                    entry.insert("sobolev_conjugate".into(), json!({ "error": e.to_string() }));
                    first_error.get_or_insert(e);
                }
            }
        }
        results.insert(name.clone(), Value::Object(entry));
    }
    let mut csv_text = String::from("t");
    for (c, _) in &columns {
        let _ = write!(csv_text, ",{c}");
    }
    csv_text.push('\n');
    for (k, t) in grid.iter().enumerate() {
        let _ = write!(csv_text, "{t:.17e}");
        for (_, v) in &columns {
            let _ = write!(csv_text, ",{:.17e}", v[k]);
        }
        csv_text.push('\n');
    }
    let failure = first_error.as_ref().map(Category::of);
    let mut o = Outcome::new(config, json!({ "functions": results }), summary, failure);
    if let Some(e) = first_error {
        o.report["error"] = Value::String(e.to_string());
    }
    o.files.push(("young.csv".into(), csv_text));
    Ok(o)
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------- check-operator

/// The sample grids: given ones, or the default grids mapped onto the mesh.
fn sample_spec(config: &RunConfig, setup: &Setup) -> SampleSpec {
    let given = config.check.as_ref().and_then(|c| c.sample.clone());
    let spec = match (given, &setup.mesh) {
        (Some(s), _) => s,
        (None, Some(mesh)) => {
            let mut s = if mesh.dim() == 1 { SampleSpec::unit_interval(8) } else { SampleSpec::unit_square(8) };
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in mesh.nodes() {
                for j in 0..2 {
                    lo[j] = lo[j].min(p[j]);
                    hi[j] = hi[j].max(p[j]);
                }
            }
            for p in &mut s.points {
                for j in 0..mesh.dim() {
                    p[j] = lo[j] + p[j] * (hi[j] - lo[j]);
                }
            }
            s
        }
        (None, None) => SampleSpec::default(),
    };
    spec.with_seed(config.seed)
}

fn variant(v: GrowthVariantDecl) -> FGrowthVariant {
    match v {
        GrowthVariantDecl::GrowthPrime => FGrowthVariant::GrowthPrime,
        GrowthVariantDecl::GrowthCor => FGrowthVariant::GrowthCor,
        GrowthVariantDecl::Growth1 => FGrowthVariant::Growth1,
        GrowthVariantDecl::Growth2 => FGrowthVariant::Growth2,
        GrowthVariantDecl::GrowthReg => FGrowthVariant::GrowthReg,
        GrowthVariantDecl::D => FGrowthVariant::D,
        GrowthVariantDecl::G12 => FGrowthVariant::G12,
    }
}

fn condition_line(summary: &mut String, label: &str, r: &ConditionReport) {
    let constants: Vec<String> = r.constants.iter().map(|(k, v)| format!("{k} = {v:.6e}")).collect();
    let _ = writeln!(summary, "  {label}: {} ({} samples) {}", pass(r.holds), r.samples, constants.join(", "));
    if !r.holds {
        if let Some(w) = &r.witness {
            let _ = writeln!(
                summary,
                "    witness x = ({:.6e}, {:.6e}), s = {:.6e}, xi = ({:.6e}, {:.6e}), lhs = {:.6e}, rhs = {:.6e}",
                w.x[0], w.x[1], w.s, w.xi[0], w.xi[1], w.lhs, w.rhs
            );
        }
    }
}

fn check_operator(config: &RunConfig, setup: &Setup) -> Step<Outcome> {
    let check = config.check.clone().unwrap_or_else(build::default_check);
    let op = setup.operator.as_ref().expect("validated");
    let a = build::check_a(config, setup)?;
    let f = match &check.f {
        Some(name) => Some(setup.young[name].clone()),
        None => natural_growth_f(op),
    };
    let g = check.g.as_ref().map(|name| setup.young[name].clone());
    let spec = sample_spec(config, setup);
    let mut all = true;
    let mut results = serde_json::Map::new();
    let mut summary = format!("check-operator {} with A = {}\n", op.name(), a.name());
    let mut record = |label: &str, r: ConditionReport, summary: &mut String| {
        condition_line(summary, label, &r);
        all &= r.holds;
        results.insert(label.to_string(), to_value(&r));
    };
    if check.a1 {
        record("a1", check_a1(op, &a, f.as_ref(), None, &spec), &mut summary);
    }
    if check.a2 {
        record("a2", check_a2(op, &spec), &mut summary);
    }
    if check.a3 {
        record("a3", check_a3(op, &a, g.as_ref(), None, &spec), &mut summary);
    }
    if check.potential {
        record("potential", check_potential(op, &spec), &mut summary);
    }
    if let Some(st) = &check.structure {
        let rep = check_structure_conditions(op, &a, st.m0, &spec)?;
        record("dg", rep.dg.clone(), &mut summary);
        record("a", rep.a.clone(), &mut summary);
        record("b", rep.b.clone(), &mut summary);
        record("c", rep.c.clone(), &mut summary);
        if st.lemlib {
            let lem = lemlib_constants(op, &a, &rep, &spec)?;
            let _ = writeln!(summary, "  lemlib: b = {:.6e}, c = {:.6e}", lem.b, lem.c);
            record("lemlib_a1", lem.a1.clone(), &mut summary);
            record("lemlib_a3", lem.a3.clone(), &mut summary);
        }
    }
    if let Some(gr) = &check.growth {
        let term = setup.convection.as_ref().expect("validated");
        let (measure, dim) = setup.mesh.as_ref().map_or((1.0, spec.dim), |m| (m.domain_measure(), m.dim()));
        let bounds = GrowthBounds { s_lo: gr.s_lo, s_hi: gr.s_hi, domain_measure: measure, dim, n: gr.n.unwrap_or(dim), k4: None };
        for v in &gr.variants {
            let label = format!("f_growth_{}", to_value(v).as_str().unwrap_or("variant"));
            let r = check_f_growth(term, &a, variant(*v), &bounds, &spec)?;
            record(&label, r, &mut summary);
        }
    }
    let failure = (!all).then_some(Category::CheckFailed);
    Ok(Outcome::new(config, json!({ "operator": op.name(), "a": a.name(), "conditions": results }), summary, failure))
}

// ---------------------------------------------------------------- solve

fn grid_csv(u: &GridFunction) -> String {
    u.to_csv_string()
}

fn solve_summary(summary: &mut String, rep: &orlicz_core::solver::SolveReport) {
    let _ = writeln!(
        summary,
        "  converged {} at mu = {} after {} iterations\n  weak residual {:.3e}, truncated residual {:.3e}\n  enclosure violation {:.3e}, penalty norm {:.3e}\n  min {:.6e}, max {:.6e}",
        rep.converged,
        rep.mu_used,
        rep.outer_iterations,
        rep.weak_residual_norm,
        rep.truncated_residual_norm,
        rep.enclosure_violation,
        rep.penalty_norm,
        rep.min_value,
        rep.max_value
    );
    for n in &rep.notes {
        let _ = writeln!(summary, "  note: {n}");
    }
}

/// The lower bound, from the energy minimizer when requested.
fn lower_bound(config: &RunConfig, setup: &Setup) -> Step<(GridFunction, Option<Value>, Option<String>)> {
    let mesh = setup.mesh.clone().expect("validated");
    let band = config.band.as_ref().expect("validated");
    if let Some(sub) = build::field_values(&band.sub, &mesh, "band.sub")? {
        return Ok((sub, None, None));
    }
    let cert = &setup.convection.as_ref().expect("validated").certificate;
    let data = VariationalData {
        mesh,
        operator: setup.operator.clone().expect("validated"),
        rho1: cert.rho1.clone().expect("validated"),
        g1: cert.g1.clone().expect("validated"),
        controls: config.variational.unwrap_or_default(),
    };
    let m = minimize_functional(&data)?;
    let line = format!(
        "  subsolution: J = {:.6e} after {} iterations, gradient norm {:.3e}, max {:.3e}, min {:.6e}\n",
        m.energy,
        m.iterations,
        m.gradient_norm,
        m.minimizer.max(),
        m.minimizer.min()
    );
    let mut v = to_value(&m);
    v["max_value"] = json!(m.minimizer.max());
    v["min_value"] = json!(m.minimizer.min());
    Ok((m.minimizer, Some(v), Some(line)))
}

fn sign_check(prob: &TruncatedProblem, summary: &mut String) -> Step<Value> {
    let sc = sub_super_check(prob, 1e-8)?;
    let _ = writeln!(
        summary,
        "  band: sub residual sign {}, super residual sign {} (violations {:.3e}, {:.3e})",
        pass(sc.sub_ok),
        pass(sc.super_ok),
        sc.sub_violation + 0.0,
        sc.super_violation + 0.0
    );
    Ok(to_value(&sc))
}

fn solve(config: &RunConfig, setup: &Setup) -> Step<Outcome> {
    let mut summary = String::from("solve\n");
    let (sub, minimization, line) = lower_bound(config, setup)?;
    if let Some(line) = line {
        summary.push_str(&line);
    }
    let prob = build::problem(config, setup, sub.clone())?;
    let signs = sign_check(&prob, &mut summary)?;
    let rep = solve_truncated(&prob)?;
    solve_summary(&mut summary, &rep);
    let mut result = json!({ "sign_check": signs, "solve": to_value(&rep) });
    let mut files = vec![("solution.csv".to_string(), grid_csv(&rep.solution))];
    if let Some(m) = minimization {
        result["subsolution"] = m;
        files.push(("subsolution.csv".into(), grid_csv(&sub)));
    }
    if config.convection.as_ref().is_some_and(|c| c.flip) {
        // -u solves the problem with the original convection term in the
        // reflected band.
        let reflected = rep.solution.scaled(-1.0);
        let original = TruncatedProblem {
            convection: prob.convection.flipped(),
            sub: prob.sup.scaled(-1.0),
            sup: prob.sub.scaled(-1.0),
            ..prob.clone()
        };
        let v = verify_solution(&reflected, &original)?;
        let _ = writeln!(
            summary,
            "  reflection -u: weak residual {:.3e} for the original term, min {:.6e}, max {:.6e}",
            v.weak_residual_norm, v.min_value, v.max_value
        );
        result["reflected"] = to_value(&v);
        files.push(("reflected_solution.csv".into(), grid_csv(&reflected)));
    }
    let failure = (!rep.converged).then_some(Category::NotConverged);
    let mut o = Outcome::new(config, result, summary, failure);
    o.files = files;
    Ok(o)
}

// ---------------------------------------------------------------- regularity

/// Whether `f_R` agrees bitwise with `f` on sampled `|ξ| <= R`.
fn cutoff_consistency(prob: &TruncatedProblem, r: f64) -> (bool, usize) {
    let f = &prob.convection;
    let fr = f.gradient_cutoff(r, &prob.a);
    let mut count = 0;
    let mut ok = true;
    let s_vals: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let mags = log_grid(1e-6 * r, r, 25);
    for &x in prob.mesh.nodes().iter().step_by(17) {
        for &s in &s_vals {
            for &t in &mags {
                for xi in [[t, 0.0], [0.0, -t], [t * 0.6, t * 0.8]] {
                    count += 1;
                    ok &= f.evaluate(x, s, xi).to_bits() == fr.evaluate(x, s, xi).to_bits();
                }
            }
        }
    }
    (ok, count)
}

fn regularity(config: &RunConfig, setup: &Setup) -> Step<Outcome> {
    let mut summary = String::from("regularity\n");
    let (sub, _, _) = lower_bound(config, setup)?;
    let prob = build::problem(config, setup, sub)?;
    let signs = sign_check(&prob, &mut summary)?;
    let m0 = config.regularity.as_ref().and_then(|r| r.m0_guess);
    let rep = run_regularity_pipeline(&prob, m0)?;
    let _ = writeln!(
        summary,
        "  gradient cutoff R: {} -> {} after {} escalations, clamp level M = {}\n  max gradient {:.6e}, C^0,{} seminorm of the gradient {:.6e}",
        rep.r_initial, rep.r_final, rep.escalations, rep.m, rep.gradient_max, rep.holder_exponent, rep.holder_seminorm
    );
    solve_summary(&mut summary, &rep.solve);
    for n in &rep.notes {
        let _ = writeln!(summary, "  note: {n}");
    }
    let (consistent, samples) = cutoff_consistency(&prob, rep.r_final);
    let _ = writeln!(summary, "  f_R = f below R on {samples} samples: {}", pass(consistent));
    let result = json!({
        "sign_check": signs,
        "regularity": to_value(&rep),
        "cutoff_consistency": { "holds": consistent, "samples": samples },
    });
    let failure = (!rep.solve.converged).then_some(Category::NotConverged);
    let mut o = Outcome::new(config, result, summary, failure);
    o.files.push(("solution.csv".into(), grid_csv(&rep.solve.solution)));
    Ok(o)
}

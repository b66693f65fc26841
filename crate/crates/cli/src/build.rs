//! Resolution of a configuration into toolkit objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use orlicz_core::grid::GridFunction;
use orlicz_core::mesh::Mesh;
use orlicz_core::operators::{
    custom_convection, custom_operator, make_builtin, make_convection, natural_young_function, Coefficient, ConvectionTerm,
    EllipticOperator, Params,
};
use orlicz_core::solver::{default_mu_schedule, SolverControls, TruncatedProblem};
use orlicz_core::young::{self, YoungFunction};

use crate::config::{ConfigError, FieldDecl, RunConfig, SolverDecl, Subcommand, YoungDecl, VARIATIONAL};

/// Resolved declarations of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Setup {
    pub young: BTreeMap<String, YoungFunction>,
    pub mesh: Option<Arc<Mesh>>,
    pub operator: Option<EllipticOperator>,
    pub convection: Option<ConvectionTerm>,
}

fn sem(key: impl Into<String>, e: impl ToString) -> ConfigError {
    ConfigError::semantic(key, e.to_string())
}

fn build_young(decls: &BTreeMap<String, YoungDecl>) -> Result<BTreeMap<String, YoungFunction>, ConfigError> {
    fn visit(
        name: &str,
        decls: &BTreeMap<String, YoungDecl>,
        done: &mut BTreeMap<String, YoungFunction>,
        stack: &mut Vec<String>,
    ) -> Result<YoungFunction, ConfigError> {
        if let Some(a) = done.get(name) {
            return Ok(a.clone());
        }
        let key = format!("young.{name}");
        if stack.iter().any(|s| s == name) {
            return Err(sem(key, format!("cyclic reference through {}", stack.join(" -> "))));
        }
        let decl = &decls[name];
        let fields: &[&str] = match decl {
            YoungDecl::Interpolate { .. } => &["lower", "upper"],
            _ => &["of"],
        };
        for (field, r) in fields.iter().zip(decl.references()) {
            if !decls.contains_key(r) {
                return Err(sem(format!("{key}.{field}"), format!("undeclared Young function `{r}`")));
            }
        }
        stack.push(name.to_string());
        let mut get = |r: &str| visit(r, decls, done, stack);
        let a = match decl {
            YoungDecl::Power { p } => young::power(*p),
            YoungDecl::PowerOverP { p } => young::power_over_p(*p),
            YoungDecl::ScaledPower { p, c } => young::scaled_power(*p, *c),
            YoungDecl::PowerLog { p, q } => young::power_log(*p, *q),
            YoungDecl::Exp => young::exp(),
            YoungDecl::ExpExp => young::exp_exp(),
            YoungDecl::ExpPower { k } => young::exp_power(*k),
            YoungDecl::ExpExpPower { k } => young::exp_exp_power(*k),
            YoungDecl::Tabulated { file } => young::tabulated_from_file(file.as_ref()).map_err(|e| sem(&key, e))?,
            YoungDecl::Conjugate { of } => get(of)?.conjugate(),
            YoungDecl::SobolevConjugate { of, n } => young::sobolev_conjugate(&get(of)?, *n).map_err(|e| sem(&key, e))?.function,
            YoungDecl::Interpolate { lower, upper } => {
                let (b, a) = (get(lower)?, get(upper)?);
                young::interpolate(&b, &a).map_err(|e| sem(&key, e))?
            }
        };
        stack.pop();
        let a = a.renamed(name);
        done.insert(name.to_string(), a.clone());
        Ok(a)
    }
    let mut done = BTreeMap::new();
    for (name, decl) in decls {
        check_parameters(name, decl)?;
        visit(name, decls, &mut done, &mut Vec::new())?;
    }
    Ok(done)
}

fn check_parameters(name: &str, decl: &YoungDecl) -> Result<(), ConfigError> {
    let bad = |field: &str, rule: &str| Err(sem(format!("young.{name}.{field}"), rule.to_string()));
    match decl {
        YoungDecl::Power { p } | YoungDecl::PowerOverP { p } if !(*p > 1.0) => bad("p", "p > 1 is required"),
        YoungDecl::ScaledPower { p, c } => {
            if !(*p > 1.0) {
                bad("p", "p > 1 is required")
            } else if !(*c > 0.0) {
                bad("c", "c > 0 is required")
            } else {
                Ok(())
            }
        }
        YoungDecl::PowerLog { p, q } => {
            if !(*p > 1.0) {
                bad("p", "p > 1 is required")
            } else if !(p + q > 1.0) {
                bad("q", "p + q > 1 is required")
            } else {
                Ok(())
            }
        }
        YoungDecl::ExpPower { k } | YoungDecl::ExpExpPower { k } if !(*k > 0.0) => bad("k", "k > 0 is required"),
        _ => Ok(()),
    }
}

/// Looks up a declared Young function, naming `key` when it is missing.
pub fn lookup(setup: &Setup, name: &str, key: &str) -> Result<YoungFunction, ConfigError> {
    setup.young.get(name).cloned().ok_or_else(|| sem(key, format!("undeclared Young function `{name}`")))
}

fn coefficient(decl: &FieldDecl, params: &Params, mesh: Option<&Arc<Mesh>>, key: &str) -> Result<Coefficient, ConfigError> {
    match decl {
        FieldDecl::Constant(c) => Ok(Coefficient::Constant(*c)),
        FieldDecl::Expr(src) => Coefficient::parse(src, params).map_err(|e| sem(key, e)),
        FieldDecl::File { file } => {
            let mesh = mesh.ok_or_else(|| sem(key, "a nodal file needs a [mesh]"))?;
            Ok(Coefficient::Grid(read_field(mesh, file, key)?))
        }
    }
}

fn read_field(mesh: &Arc<Mesh>, file: &str, key: &str) -> Result<GridFunction, ConfigError> {
    let f = std::fs::File::open(file).map_err(|e| sem(key, format!("{file}: {e}")))?;
    GridFunction::read_csv(mesh.clone(), f).map_err(|e| sem(key, format!("{file}: {e}")))
}

/// Nodal values of a band bound; `None` for the variational bound.
pub fn field_values(decl: &FieldDecl, mesh: &Arc<Mesh>, key: &str) -> Result<Option<GridFunction>, ConfigError> {
    match decl {
        FieldDecl::Expr(s) if s == VARIATIONAL => Ok(None),
        FieldDecl::Constant(c) => Ok(Some(GridFunction::constant(mesh.clone(), *c))),
        FieldDecl::Expr(_) => {
            let c = coefficient(decl, &Params::new(), Some(mesh), key)?;
            Ok(Some(GridFunction::from_fn(mesh.clone(), |x| c.eval(x))))
        }
        FieldDecl::File { file } => read_field(mesh, file, key).map(Some),
    }
}

fn need<'a, T>(v: &'a Option<T>, section: &str, sub: Subcommand) -> Result<&'a T, ConfigError> {
    v.as_ref().ok_or_else(|| sem(section, format!("section [{section}] is required by {}", sub.as_str())))
}

/// Builds the declarations the subcommand uses.
pub fn build(config: &RunConfig) -> Result<Setup, ConfigError> {
    let sub = config.subcommand.ok_or_else(|| sem("subcommand", "missing; set it in the file or on the command line"))?;
    if config.threads == 0 {
        return Err(sem("threads", "must be at least 1"));
    }
    // TOML integers are signed 64-bit
    if config.seed > i64::MAX as u64 {
        return Err(sem("seed", "must be at most 2^63 - 1"));
    }
    let mut setup = Setup { young: build_young(&config.young)?, ..Setup::default() };
    if let Some(spec) = &config.mesh {
        setup.mesh = Some(Arc::new(Mesh::new(spec.clone()).map_err(|e| sem("mesh", e))?));
    }
    if let Some(op) = &config.operator {
        let coeff = op.coefficient.as_ref().map(|c| coefficient(c, &op.params, setup.mesh.as_ref(), "operator.coefficient")).transpose()?;
        let built = match (&op.builtin, &op.phi) {
            (Some(name), None) => {
                if op.potential.is_some() {
                    return Err(sem("operator.potential", "only custom operators take a potential"));
                }
                make_builtin(name, &op.params, coeff)
            }
            (None, Some(phi)) => {
                if coeff.is_some() {
                    return Err(sem("operator.coefficient", "custom operators write the coefficient into phi"));
                }
                custom_operator("custom", phi, op.potential.as_deref(), &op.params)
            }
            _ => return Err(sem("operator", "give exactly one of `builtin` and `phi`")),
        };
        setup.operator = Some(built.map_err(|e| sem("operator", e))?);
    }
    if let Some(c) = &config.convection {
        let h = c.h.as_ref().map(|h| coefficient(h, &c.params, setup.mesh.as_ref(), "convection.h")).transpose()?;
        let built = match (&c.builtin, &c.expr) {
            (Some(name), None) => make_convection(name, &c.params, h),
            (None, Some(src)) => {
                if h.is_some() {
                    return Err(sem("convection.h", "custom terms write the weight into expr"));
                }
                custom_convection("custom", src, &c.params)
            }
            _ => return Err(sem("convection", "give exactly one of `builtin` and `expr`")),
        };
        let built = built.map_err(|e| sem("convection", e))?;
        setup.convection = Some(if c.flip { built.flipped() } else { built });
    }

    match sub {
        Subcommand::Catalog => {}
        Subcommand::YoungAnalyze => {
            if setup.young.is_empty() {
                return Err(sem("young", "young-analyze needs at least one declaration"));
            }
            if let Some(an) = &config.analysis {
                for (k, name) in an.functions.iter().enumerate() {
                    lookup(&setup, name, &format!("analysis.functions[{k}]"))?;
                }
                if !(an.t_min > 0.0 && an.t_max > an.t_min && an.points >= 2) {
                    return Err(sem("analysis", "need 0 < t_min < t_max and points >= 2"));
                }
            }
        }
        Subcommand::CheckOperator => {
            let op = need(&setup.operator, "operator", sub)?;
            let check = config.check.clone().unwrap_or_else(default_check);
            check_young(&setup, op, check.a.as_deref(), "check.a")?;
            for (name, key) in [(&check.f, "check.f"), (&check.g, "check.g")] {
                if let Some(name) = name {
                    lookup(&setup, name, key)?;
                }
            }
            if check.growth.is_some() && setup.convection.is_none() {
                return Err(sem("check.growth", "growth checks need a [convection]"));
            }
            if let Some(st) = &check.structure {
                if !(st.m0 > 0.0) {
                    return Err(sem("check.structure.m0", "must be positive"));
                }
            }
        }
        Subcommand::Solve | Subcommand::Regularity => {
            let op = need(&setup.operator, "operator", sub)?;
            need(&setup.convection, "convection", sub)?;
            let mesh = need(&setup.mesh, "mesh", sub)?.clone();
            let band = need(&config.band, "band", sub)?;
            let solver = config.solver.clone().unwrap_or_else(default_solver);
            check_young(&setup, op, solver.a.as_deref(), "solver.a")?;
            if let Some(e) = &solver.penalty {
                lookup(&setup, e, "solver.penalty")?;
            }
            let mu = &solver.mu_schedule;
            if mu.is_empty() || mu.iter().any(|&m| !(m > 0.0)) || mu.windows(2).any(|w| w[1] <= w[0]) {
                return Err(sem("solver.mu_schedule", "must be a non-empty increasing list of positive values"));
            }
            if !(solver.controls.tolerance > 0.0) {
                return Err(sem("solver.controls.tolerance", "must be positive"));
            }
            if !(solver.controls.relaxation > 0.0 && solver.controls.relaxation <= 1.0) {
                return Err(sem("solver.controls.relaxation", "must lie in (0, 1]"));
            }
            let sub_v = field_values(&band.sub, &mesh, "band.sub")?;
            let sup_v = field_values(&band.sup, &mesh, "band.super")?;
            if sup_v.is_none() {
                return Err(sem("band.super", "only the lower bound may be variational"));
            }
            if sub_v.is_none() {
                if sub == Subcommand::Regularity {
                    return Err(sem("band.sub", "the regularity pipeline needs an explicit lower bound"));
                }
                if !op.has_potential() {
                    return Err(sem("band.sub", "a variational bound needs an operator with a potential"));
                }
                let cert = &setup.convection.as_ref().unwrap().certificate;
                if cert.rho1.is_none() || cert.g1.is_none() {
                    return Err(sem("band.sub", "a variational bound needs rho1 and g1 in the convection certificate"));
                }
            } else {
                problem(config, &setup, sub_v.unwrap()).map_err(|e| sem("band", e))?;
            }
        }
    }
    Ok(setup)
}

pub fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    build(config).map(|_| ())
}

pub fn default_solver() -> SolverDecl {
    SolverDecl { a: None, penalty: None, mu_schedule: default_mu_schedule(), controls: SolverControls::default() }
}

pub fn default_check() -> crate::config::CheckDecl {
    toml::from_str("").expect("all check keys have defaults")
}

fn check_young(setup: &Setup, op: &EllipticOperator, name: Option<&str>, key: &str) -> Result<YoungFunction, ConfigError> {
    match name {
        Some(name) => lookup(setup, name, key),
        None => natural_young_function(op)
            .ok_or_else(|| sem(key, format!("operator `{}` has no natural Young function; declare one", op.name()))),
    }
}

/// The Young function of the energy space.
pub fn energy_young(config: &RunConfig, setup: &Setup) -> Result<YoungFunction, ConfigError> {
    let solver = config.solver.clone().unwrap_or_else(default_solver);
    check_young(setup, setup.operator.as_ref().expect("validated"), solver.a.as_deref(), "solver.a")
}

/// The Young function named by `check.a`, or the operator's own.
pub fn check_a(config: &RunConfig, setup: &Setup) -> Result<YoungFunction, ConfigError> {
    let check = config.check.clone().unwrap_or_else(default_check);
    check_young(setup, setup.operator.as_ref().expect("validated"), check.a.as_deref(), "check.a")
}

/// The truncated problem with the given lower bound.
pub fn problem(config: &RunConfig, setup: &Setup, sub: GridFunction) -> orlicz_core::Result<TruncatedProblem> {
    let solver = config.solver.clone().unwrap_or_else(default_solver);
    let mesh = setup.mesh.clone().expect("validated");
    let band = config.band.as_ref().expect("validated");
    let sup = field_values(&band.sup, &mesh, "band.super").map_err(|e| orlicz_core::Error::Domain(e.to_string()))?.expect("validated");
    let convection = setup.convection.clone().expect("validated");
    let a = energy_young(config, setup).map_err(|e| orlicz_core::Error::Domain(e.to_string()))?;
    let e = match &solver.penalty {
        Some(name) => setup.young[name].clone(),
        None => convection.certificate.e.clone().unwrap_or_else(|| a.clone()),
    };
    TruncatedProblem::new(
        mesh,
        setup.operator.clone().expect("validated"),
        convection,
        a,
        sub,
        sup,
        e,
        solver.mu_schedule.clone(),
        solver.controls.clone(),
    )
}

//! Run configuration: TOML schema, parsing with locations, and catalog expansion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use orlicz_core::mesh::MeshSpec;
use orlicz_core::operators::SampleSpec;
use orlicz_core::solver::{MinimizeControls, SolverControls};
use serde::{Deserialize, Serialize};

use crate::catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    YoungAnalyze,
    CheckOperator,
    Solve,
    Regularity,
    Catalog,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::YoungAnalyze => "young-analyze",
            Subcommand::CheckOperator => "check-operator",
            Subcommand::Solve => "solve",
            Subcommand::Regularity => "regularity",
            Subcommand::Catalog => "catalog",
        }
    }
}

/// A Young function declaration; references name other declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YoungDecl {
    Power {
        p: f64,
    },
    PowerOverP {
        p: f64,
    },
    ScaledPower {
        p: f64,
        c: f64,
    },
    PowerLog {
        p: f64,
        q: f64,
    },
    Exp,
    ExpExp,
    ExpPower {
        k: f64,
    },
    ExpExpPower {
        k: f64,
    },
    /// Two-column text file `t, A(t)`.
    Tabulated {
        file: String,
    },
    Conjugate {
        of: String,
    },
    SobolevConjugate {
        of: String,
        n: usize,
    },
    Interpolate {
        lower: String,
        upper: String,
    },
}

impl YoungDecl {
    pub fn references(&self) -> Vec<&str> {
        match self {
            YoungDecl::Conjugate { of } | YoungDecl::SobolevConjugate { of, .. } => vec![of],
            YoungDecl::Interpolate { lower, upper } => vec![lower, upper],
            _ => Vec::new(),
        }
    }
}

/// A scalar field: a number, an expression in `x, y, r`, or a nodal CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldDecl {
    Constant(f64),
    Expr(String),
    File { file: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDecl {
    /// Name of a built-in family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Factor `φ(x, s, |ξ|)` of a custom radial field `φ ξ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    /// Potential `Φ` of a custom field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<FieldDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvectionDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Custom `f(x, s, |ξ|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    /// The weight `h(x)` of the built-in product terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<FieldDecl>,
    /// Replace `f` by `-f(x, -s, -ξ)`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub flip: bool,
}

/// A bound of the band: a field, or `"variational"` for the minimizer of the
/// energy functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandDecl {
    pub sub: FieldDecl,
    #[serde(rename = "super")]
    pub sup: FieldDecl,
}

pub const VARIATIONAL: &str = "variational";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDecl {
    /// Young function of the energy space; defaults to the operator's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    /// Profile `E` of the penalty; defaults to the convection certificate's
    /// `E`, then to `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<String>,
    #[serde(default = "orlicz_core::solver::default_mu_schedule")]
    pub mu_schedule: Vec<f64>,
    #[serde(default)]
    pub controls: SolverControls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDecl {
    /// Bound on `|s|` and `|w|` in the structure conditions.
    pub m0: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub lemlib: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVariantDecl {
    GrowthPrime,
    GrowthCor,
    Growth1,
    Growth2,
    GrowthReg,
    D,
    G12,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthDecl {
    pub variants: Vec<GrowthVariantDecl>,
    #[serde(default = "minus_ten")]
    pub s_lo: f64,
    #[serde(default = "ten")]
    pub s_hi: f64,
    /// Dimension of the Sobolev conjugate; defaults to the mesh dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDecl {
    /// Defaults to the operator's own Young function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    /// `F` of the growth bound; defaults to the family's natural one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// `G` of the coercivity bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default = "yes")]
    pub a1: bool,
    #[serde(default = "yes")]
    pub a2: bool,
    #[serde(default = "yes")]
    pub a3: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub potential: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthDecl>,
    /// Sample grids; the seed is taken from the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDecl {
    /// Declarations to analyze; all of them when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<String>,
    /// Dimension of the Sobolev conjugate, if wanted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Range and size of the tabulation written to `young.csv`.
    #[serde(default = "table_lo")]
    pub t_min: f64,
    #[serde(default = "table_hi")]
    pub t_max: f64,
    #[serde(default = "table_points")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RegularityDecl {
    /// A priori bound on `‖u‖∞`; the band bound is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0_guess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    /// Catalog entry the remaining keys override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub young: BTreeMap<String, YoungDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convection: Option<ConvectionDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variational: Option<MinimizeControls>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityDecl>,
}

fn is_false(b: &bool) -> bool {
    !*b
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn minus_ten() -> f64 {
    -10.0
}
fn table_lo() -> f64 {
    1e-3
}
fn table_hi() -> f64 {
    1e3
}
fn table_points() -> usize {
    61
}

/// Configuration errors: syntax with a location, or a semantic problem at a
/// key path.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    Semantic { key: String, message: String },
    Io { path: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
            ConfigError::Semantic { key, message } => write!(f, "{key}: {message}"),
            ConfigError::Io { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn semantic(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic { key: key.into(), message: message.into() }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Semantic { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn located(text: &str, err: toml::de::Error) -> ConfigError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Parse { line, column, message: err.message().trim().to_string() }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub subcommand: Option<Subcommand>,
    pub catalog: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub tolerance: Option<f64>,
}

/// Parses configuration text. Relative file references are resolved against
/// `base_dir`. A `catalog` key expands the named entry first, with the
/// remaining keys overriding it. The result is validated.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
    parse_with(text, base_dir, &Overrides::default())
}

/// [`parse_config_str`] with command-line overrides applied before validation.
pub fn parse_with(text: &str, base_dir: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    // Checks syntax and unknown keys against the source text.
    let direct: RunConfig = toml::from_str(text).map_err(|e| located(text, e))?;
    let catalog_name = overrides.catalog.clone().or(direct.catalog.clone());
    let mut config = match &catalog_name {
        None => direct,
        Some(name) => {
            let entry =
                catalog::entry_text(name).ok_or_else(|| ConfigError::semantic("catalog", format!("unknown catalog entry `{name}`")))?;
            let mut table: toml::Table = toml::from_str(entry).map_err(|e| located(entry, e))?;
            let over: toml::Table = toml::from_str(text).map_err(|e| located(text, e))?;
            merge(&mut table, over);
            let mut c: RunConfig = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::semantic("catalog", e.message().trim().to_string()))?;
            c.catalog = Some(name.clone());
            c
        }
    };
    if let Some(s) = overrides.subcommand {
        config.subcommand = Some(s);
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(t) = overrides.threads {
        config.threads = t;
    }
    if let Some(out) = &overrides.out {
        config.out = Some(out.clone());
    }
    if let Some(tol) = overrides.tolerance {
        if !(tol > 0.0) {
            return Err(ConfigError::semantic("solver.controls.tolerance", "must be positive"));
        }
        config.solver.get_or_insert_with(crate::build::default_solver).controls.tolerance = tol;
    }
    if let Some(dir) = base_dir {
        anchor_paths(&mut config, dir);
    }
    if config.subcommand != Some(Subcommand::Catalog) {
        catalog::enforce(&config)?;
    }
    crate::build::validate(&config)?;
    Ok(config)
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config_str(&text, path.parent())
}

/// The configuration as TOML text; parsing it gives the same configuration.
pub fn serialize_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("configurations serialize to TOML")
}

fn anchor(file: &mut String, dir: &Path) {
    let p = PathBuf::from(&*file);
    if p.is_relative() {
        *file = dir.join(p).display().to_string();
    }
}

fn anchor_field(f: &mut FieldDecl, dir: &Path) {
    if let FieldDecl::File { file } = f {
        anchor(file, dir);
    }
}

fn anchor_paths(config: &mut RunConfig, dir: &Path) {
    for decl in config.young.values_mut() {
        if let YoungDecl::Tabulated { file } = decl {
            anchor(file, dir);
        }
    }
    if let Some(c) = config.operator.as_mut().and_then(|o| o.coefficient.as_mut()) {
        anchor_field(c, dir);
    }
    if let Some(h) = config.convection.as_mut().and_then(|c| c.h.as_mut()) {
        anchor_field(h, dir);
    }
    if let Some(b) = config.band.as_mut() {
        anchor_field(&mut b.sub, dir);
        anchor_field(&mut b.sup, dir);
    }
}

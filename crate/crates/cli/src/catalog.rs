//! The built-in example problems as configuration text, and the parameter
//! constraints that tie their sections together.

use crate::config::{ConfigError, FieldDecl, RunConfig};
use orlicz_core::mesh::MeshSpec;

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

const SEC5_1: &str = r#"
subcommand = "solve"

[young.A]
kind = "power_log"
p = 2.0
q = 1.0

# p* = 6 and m = p*(r - q/(p*)') = 1
[young.E]
kind = "power_log"
p = 6.0
q = 1.0

[operator]
builtin = "xsuf"
params = { p = 2.0, q = 1.0, delta = 0.5 }

# n = 3 > 2: any E below A_3 also sits below the planar A_2
[convection]
builtin = "fpq"
params = { n = 3.0, p = 2.0, q = 1.0, row = 1.0, r = 1.0, sbar = 1.0 }

[mesh]
shape = "rectangle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
nx = 65
ny = 65

[band]
sub = 0.0
super = 1.0

[solver]
a = "A"
penalty = "E"
"#;

const SEC5_1_ROW2: &str = r#"
subcommand = "solve"

[young.A]
kind = "power_log"
p = 2.0
q = 0.5

[operator]
builtin = "xsuf"
params = { p = 2.0, q = 0.5, delta = 0.3333333333333333 }

[convection]
builtin = "fpq"
params = { n = 2.0, p = 2.0, q = 0.5, row = 2.0, r = 0.0, sbar = 1.0 }

[mesh]
shape = "rectangle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
nx = 33
ny = 33

[band]
sub = 0.0
super = 1.0

[solver]
a = "A"
"#;

const SEC5_1_ROW3: &str = r#"
subcommand = "solve"

[young.A]
kind = "power_log"
p = 2.0
q = 1.0

[operator]
builtin = "xsuf"
params = { p = 2.0, q = 1.0, delta = 0.5 }

[convection]
builtin = "fpq"
params = { n = 2.0, p = 2.0, q = 1.0, row = 3.0, r = 0.25, sbar = 1.0 }

[mesh]
shape = "rectangle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
nx = 33
ny = 33

[band]
sub = 0.0
super = 1.0

[solver]
a = "A"
"#;

const SEC5_1_ROW4: &str = r#"
subcommand = "solve"

[young.A]
kind = "power_log"
p = 3.0
q = 1.0

[operator]
builtin = "xsuf"
params = { p = 3.0, q = 1.0, delta = 0.5 }

[convection]
builtin = "fpq"
params = { n = 2.0, p = 3.0, q = 1.0, row = 4.0, r = 0.5, sbar = 1.0 }

[mesh]
shape = "rectangle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
nx = 33
ny = 33

[band]
sub = 0.0
super = 1.0

[solver]
a = "A"
"#;

const SEC5_2: &str = r#"
subcommand = "solve"

[young.A]
kind = "power_over_p"
p = 2.5

# p* = 15, m = -1
[young.E]
kind = "power_log"
p = 15.0
q = -1.0

[operator]
builtin = "xuf"
params = { p = 2.5, r = 1.5, n = 3.0 }

# Solved with f replaced by -f(x, -s, -xi); the solution of the original
# problem is the reflection -u, reported alongside.
[convection]
builtin = "xuf_rhs"
params = { n = 3.0, p = 2.5, q = 2.0, m = -1.0, rho = 1.0 }
flip = true

[mesh]
shape = "interval"
x0 = 0.0
x1 = 1.0
nodes = 101

[band]
sub = "variational"
super = 0.0

[solver]
a = "A"
penalty = "E"
"#;

const SEC5_3: &str = r#"
subcommand = "regularity"

[young.A]
kind = "power_log"
p = 2.5
q = 1.0

[operator]
builtin = "xuxifreg"
params = { p = 2.5, q = 1.0, gamma = 1.0 }

[convection]
builtin = "xuxifreg_rhs"
params = { p = 2.5, q = 1.0, sbar = 1.0 }

# The weight |x|^gamma stays away from zero on this rectangle.
[mesh]
shape = "rectangle"
x0 = 1.0
x1 = 2.0
y0 = 0.0
y1 = 1.0
nx = 33
ny = 33

[band]
sub = 0.0
super = 1.0

[solver]
a = "A"
penalty = "A"
"#;

pub const ENTRIES: &[Entry] = &[
    Entry { name: "sec5_1", summary: "xsuf operator, product convection with row-1 k-growth (p < n), 65x65 square", text: SEC5_1 },
    Entry { name: "sec5_1_row2", summary: "xsuf operator, k-growth for p = n and q < n - 1", text: SEC5_1_ROW2 },
    Entry { name: "sec5_1_row3", summary: "xsuf operator, k-growth for p = n and q = n - 1", text: SEC5_1_ROW3 },
    Entry { name: "sec5_1_row4", summary: "xsuf operator, k-growth for p > n", text: SEC5_1_ROW4 },
    Entry { name: "sec5_2", summary: "xuf operator, sign-flipped problem between a variational subsolution and 0", text: SEC5_2 },
    Entry { name: "sec5_3", summary: "xuxifreg operator, regularity pipeline with gradient cutoff", text: SEC5_3 },
];

pub fn entry_text(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|e| e.name == name).map(|e| e.text)
}

fn param(map: &std::collections::BTreeMap<String, f64>, key: &str) -> Option<f64> {
    map.get(key).copied()
}

fn fail(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::semantic(key, message)
}

fn expect_builtin(found: Option<&String>, want: &str, key: &str) -> Result<(), ConfigError> {
    match found {
        Some(b) if b == want => Ok(()),
        _ => Err(fail(key, format!("this catalog entry requires the built-in `{want}`"))),
    }
}

fn expect_constant(f: &FieldDecl, want: f64, key: &str) -> Result<(), ConfigError> {
    match f {
        FieldDecl::Constant(c) if *c == want => Ok(()),
        _ => Err(fail(key, format!("this catalog entry requires the constant {want}"))),
    }
}

/// Cross-section constraints of the catalog problems.
pub fn enforce(config: &RunConfig) -> Result<(), ConfigError> {
    let Some(name) = config.catalog.as_deref() else {
        return Ok(());
    };
    let (Some(op), Some(conv), Some(band)) = (&config.operator, &config.convection, &config.band) else {
        return Err(fail("catalog", "catalog problems need [operator], [convection] and [band]"));
    };
    let same = |key: &str| -> Result<(), ConfigError> {
        if param(&op.params, key) != param(&conv.params, key) {
            return Err(fail(&format!("convection.params.{key}"), format!("must equal operator.params.{key}")));
        }
        Ok(())
    };
    let dim = match &config.mesh {
        Some(MeshSpec::Interval { .. }) => 1.0,
        Some(MeshSpec::Rectangle { .. }) => 2.0,
        None => return Err(fail("mesh", "catalog problems need a [mesh]")),
    };
    if name.starts_with("sec5_1") {
        expect_builtin(op.builtin.as_ref(), "xsuf", "operator.builtin")?;
        expect_builtin(conv.builtin.as_ref(), "fpq", "convection.builtin")?;
        same("p")?;
        same("q")?;
        let row = if name == "sec5_1" { 1.0 } else { name[name.len() - 1..].parse::<f64>().unwrap_or(0.0) };
        if param(&conv.params, "row") != Some(row) {
            return Err(fail("convection.params.row", format!("this catalog entry uses row {row}")));
        }
        if param(&conv.params, "n").is_some_and(|n| n < dim) {
            return Err(fail("convection.params.n", "n must be at least the mesh dimension"));
        }
        expect_constant(&band.sub, 0.0, "band.sub")?;
        expect_constant(&band.sup, param(&conv.params, "sbar").unwrap_or(f64::NAN), "band.super")?;
    } else if name == "sec5_2" {
        expect_builtin(op.builtin.as_ref(), "xuf", "operator.builtin")?;
        expect_builtin(conv.builtin.as_ref(), "xuf_rhs", "convection.builtin")?;
        same("p")?;
        same("n")?;
        if !conv.flip {
            return Err(fail("convection.flip", "this catalog entry solves the sign-flipped problem"));
        }
        expect_constant(&band.sup, 0.0, "band.super")?;
    } else if name == "sec5_3" {
        expect_builtin(op.builtin.as_ref(), "xuxifreg", "operator.builtin")?;
        expect_builtin(conv.builtin.as_ref(), "xuxifreg_rhs", "convection.builtin")?;
        same("p")?;
        same("q")?;
        expect_constant(&band.sub, 0.0, "band.sub")?;
        expect_constant(&band.sup, param(&conv.params, "sbar").unwrap_or(f64::NAN), "band.super")?;
        let touches_origin = match &config.mesh {
            Some(MeshSpec::Rectangle { x0, x1, y0, y1, .. }) => *x0 <= 0.0 && *x1 >= 0.0 && *y0 <= 0.0 && *y1 >= 0.0,
            Some(MeshSpec::Interval { x0, x1, .. }) => *x0 <= 0.0 && *x1 >= 0.0,
            None => false,
        };
        if touches_origin {
            return Err(fail("mesh", "the weight |x|^gamma vanishes at the origin; the domain must avoid it"));
        }
    }
    Ok(())
}

//! Nodal fields on a mesh.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshSpec};

/// Nodal values of a continuous piecewise-linear field.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Domain(format!("grid function has {} values for {} nodes", values.len(), mesh.num_nodes())));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        GridFunction { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_nodes();
        GridFunction { mesh, values: vec![c; n] }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.mesh.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pins boundary values to zero.
    pub fn pin_boundary(&mut self) {
        for (i, v) in self.values.iter_mut().enumerate() {
            if self.mesh.is_boundary(i) {
                *v = 0.0;
            }
        }
    }

    pub fn is_zero_trace(&self) -> bool {
        self.values.iter().enumerate().all(|(i, v)| !self.mesh.is_boundary(i) || *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Constant gradient on element `e`.
    pub fn element_gradient(&self, e: usize) -> [f64; 2] {
        element_gradient(&self.mesh, &self.values, e)
    }

    /// Piecewise-linear interpolant at `x`; points outside the mesh are
    /// clamped to its bounding box.
    pub fn eval_at(&self, x: [f64; 2]) -> f64 {
        let cell = |t: f64, a: f64, b: f64, n: usize| {
            let u = ((t - a) / (b - a)).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (u.floor() as usize).min(n - 2);
            (i, u - i as f64)
        };
        match *self.mesh.spec() {
            MeshSpec::Interval { x0, x1, nodes } => {
                let (i, a) = cell(x[0], x0, x1, nodes);
                self.values[i] + a * (self.values[i + 1] - self.values[i])
            }
            MeshSpec::Rectangle { x0, x1, y0, y1, nx, ny } => {
                let (i, a) = cell(x[0], x0, x1, nx);
                let (j, b) = cell(x[1], y0, y1, ny);
                let v = |di: usize, dj: usize| self.values[(j + dj) * nx + i + di];
                if a >= b {
                    v(0, 0) + a * (v(1, 0) - v(0, 0)) + b * (v(1, 1) - v(1, 0))
                } else {
                    v(0, 0) + b * (v(0, 1) - v(0, 0)) + a * (v(1, 1) - v(0, 1))
                }
            }
        }
    }

    /// Largest element gradient magnitude.
    pub fn max_gradient(&self) -> f64 {
        (0..self.mesh.num_elements()).map(|e| norm2(self.element_gradient(e))).fold(0.0, f64::max)
    }

    /// Writes `x[,y],value` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Other(format!("csv: {e}"));
        if self.mesh.dim() == 1 {
            wr.write_record(["x", "value"]).map_err(io)?;
        } else {
            wr.write_record(["x", "y", "value"]).map_err(io)?;
        }
        for (p, v) in self.mesh.nodes().iter().zip(&self.values) {
            let mut rec = vec![fmt(p[0])];
            if self.mesh.dim() == 2 {
                rec.push(fmt(p[1]));
            }
            rec.push(fmt(*v));
            wr.write_record(&rec).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Other(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads values written by [`GridFunction::write_csv`]; node coordinates
    /// must match the mesh to within `1e-9`.
    pub fn read_csv<R: Read>(mesh: Arc<Mesh>, r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = mesh.dim();
        let mut values = Vec::with_capacity(mesh.num_nodes());
        for (k, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Domain(format!("csv: {e}")))?;
            if rec.len() != dim + 1 {
                return Err(Error::Domain(format!("csv row {}: expected {} columns", k + 1, dim + 1)));
            }
            let num = |j: usize| rec[j].trim().parse::<f64>().map_err(|_| Error::Domain(format!("csv row {}: bad number", k + 1)));
            if k >= mesh.num_nodes() {
                return Err(Error::Domain("csv has more rows than mesh nodes".into()));
            }
            let p = mesh.node(k);
            for j in 0..dim {
                if (num(j)? - p[j]).abs() > 1e-9 * (1.0 + p[j].abs()) {
                    return Err(Error::Domain(format!("csv row {}: coordinates do not match the mesh", k + 1)));
                }
            }
            values.push(num(dim)?);
        }
        Self::new(mesh, values)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub(crate) fn element_gradient(mesh: &Mesh, values: &[f64], e: usize) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&v, gb) in mesh.element(e).iter().zip(mesh.basis_grads(e)) {
        g[0] += values[v] * gb[0];
        g[1] += values[v] * gb[1];
    }
    g
}

pub fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let m = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 2.0, nx: 5, ny: 4 }).unwrap());
        let u = GridFunction::from_fn(m.clone(), |x| 3.0 * x[0] - 2.0 * x[1]);
        for e in 0..m.num_elements() {
            let g = u.element_gradient(e);
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let m = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: -1.0, x1: 1.0, y0: 0.0, y1: 2.0, nx: 6, ny: 5 }).unwrap());
        let u = GridFunction::from_fn(m.clone(), |x| 2.0 * x[0] - x[1] + 0.5);
        for p in [[0.13, 0.77], [-0.9, 1.95], [0.999, 0.001], [0.4, 0.4]] {
            assert!((u.eval_at(p) - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
        let m1 = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 4 }).unwrap());
        let v = GridFunction::from_fn(m1, |x| 3.0 * x[0]);
        assert!((v.eval_at([0.55, 0.0]) - 1.65).abs() < 1e-12);
        assert_eq!(v.eval_at([2.0, 0.0]), 3.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, nx: 4, ny: 3 }).unwrap());
        let u = GridFunction::from_fn(m.clone(), |x| (x[0] * 7.1).sin() + x[1] / 3.0);
        let text = u.to_csv_string();
        let back = GridFunction::read_csv(m, text.as_bytes()).unwrap();
        assert_eq!(back.values(), u.values());
    }
}

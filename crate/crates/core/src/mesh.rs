//! Structured meshes: uniform segments in 1D, right triangles in 2D.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and resolution of a structured mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval { x0: f64, x1: f64, nodes: usize },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize },
}

#[derive(Debug, Clone)]
pub struct Mesh {
    spec: MeshSpec,
    dim: usize,
    nodes: Vec<[f64; 2]>,
    /// Vertex indices; only the first `dim + 1` entries are used.
    elements: Vec<[usize; 3]>,
    measures: Vec<f64>,
    /// Gradients of the element's local basis functions.
    basis_grads: Vec<[[f64; 2]; 3]>,
    boundary: Vec<bool>,
    /// Lumped vertex weights: sum over adjacent elements of measure/(dim+1).
    node_weights: Vec<f64>,
}

impl Mesh {
    pub fn new(spec: MeshSpec) -> Result<Mesh> {
        match spec {
            MeshSpec::Interval { x0, x1, nodes } => {
                if !(x1 > x0) || nodes < 2 {
                    return Err(Error::Domain("interval mesh needs x1 > x0 and at least 2 nodes".into()));
                }
                let h = (x1 - x0) / (nodes - 1) as f64;
                let pts: Vec<[f64; 2]> = (0..nodes).map(|i| [if i == nodes - 1 { x1 } else { x0 + i as f64 * h }, 0.0]).collect();
                let mut elements = Vec::with_capacity(nodes - 1);
                let mut measures = Vec::with_capacity(nodes - 1);
                let mut grads = Vec::with_capacity(nodes - 1);
                for i in 0..nodes - 1 {
                    let len = pts[i + 1][0] - pts[i][0];
                    elements.push([i, i + 1, usize::MAX]);
                    measures.push(len);
                    grads.push([[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]]);
                }
                let mut boundary = vec![false; nodes];
                boundary[0] = true;
                boundary[nodes - 1] = true;
                Ok(Self::finish(spec, 1, pts, elements, measures, grads, boundary))
            }
            MeshSpec::Rectangle { x0, x1, y0, y1, nx, ny } => {
                if !(x1 > x0 && y1 > y0) || nx < 2 || ny < 2 {
                    return Err(Error::Domain("rectangle mesh needs positive extent and at least 2 nodes per axis".into()));
                }
                let hx = (x1 - x0) / (nx - 1) as f64;
                let hy = (y1 - y0) / (ny - 1) as f64;
                let coord = |i: usize, n: usize, a: f64, b: f64, h: f64| if i == n - 1 { b } else { a + i as f64 * h };
                let mut pts = Vec::with_capacity(nx * ny);
                let mut boundary = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        pts.push([coord(i, nx, x0, x1, hx), coord(j, ny, y0, y1, hy)]);
                        boundary.push(i == 0 || j == 0 || i == nx - 1 || j == ny - 1);
                    }
                }
                let id = |i: usize, j: usize| j * nx + i;
                let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
                for j in 0..ny - 1 {
                    for i in 0..nx - 1 {
                        elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                        elements.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                    }
                }
                let mut measures = Vec::with_capacity(elements.len());
                let mut grads = Vec::with_capacity(elements.len());
                for e in &elements {
                    let (p0, p1, p2) = (pts[e[0]], pts[e[1]], pts[e[2]]);
                    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
                    let d2 = [p2[0] - p0[0], p2[1] - p0[1]];
                    let det = d1[0] * d2[1] - d1[1] * d2[0];
                    measures.push(0.5 * det.abs());
                    // gradients of barycentric coordinates
                    let g1 = [d2[1] / det, -d2[0] / det];
                    let g2 = [-d1[1] / det, d1[0] / det];
                    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
                    grads.push([g0, g1, g2]);
                }
                Ok(Self::finish(spec, 2, pts, elements, measures, grads, boundary))
            }
        }
    }

    fn finish(
        spec: MeshSpec,
        dim: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        measures: Vec<f64>,
        basis_grads: Vec<[[f64; 2]; 3]>,
        boundary: Vec<bool>,
    ) -> Mesh {
        let mut node_weights = vec![0.0; nodes.len()];
        for (e, m) in elements.iter().zip(&measures) {
            for &v in &e[..dim + 1] {
                node_weights[v] += m / (dim + 1) as f64;
            }
        }
        Mesh { spec, dim, nodes, elements, measures, basis_grads, boundary, node_weights }
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Vertex indices of element `e` (`dim + 1` of them).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    pub fn basis_grads(&self, e: usize) -> &[[f64; 2]] {
        &self.basis_grads[e][..self.dim + 1]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn node_weight(&self, i: usize) -> f64 {
        self.node_weights[i]
    }

    /// Sum of element measures.
    pub fn volume(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Measure of the domain from its geometry.
    pub fn domain_measure(&self) -> f64 {
        match self.spec {
            MeshSpec::Interval { x0, x1, .. } => x1 - x0,
            MeshSpec::Rectangle { x0, x1, y0, y1, .. } => (x1 - x0) * (y1 - y0),
        }
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        match self.spec {
            MeshSpec::Interval { x0, x1, nodes } => (x1 - x0) / (nodes - 1) as f64,
            MeshSpec::Rectangle { x0, x1, y0, y1, nx, ny } => {
                let hx = (x1 - x0) / (nx - 1) as f64;
                let hy = (y1 - y0) / (ny - 1) as f64;
                hx.hypot(hy)
            }
        }
    }

    /// Interior node indices in increasing order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.boundary[i]).collect()
    }

    /// Centroid of element `e`.
    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let vs = self.element(e);
        let k = vs.len() as f64;
        let mut c = [0.0; 2];
        for &v in vs {
            c[0] += self.nodes[v][0] / k;
            c[1] += self.nodes[v][1] / k;
        }
        c
    }

    /// Elements adjacent to each node.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for e in 0..self.elements.len() {
            for &v in self.element(e) {
                out[v].push(e);
            }
        }
        out
    }

    /// Structured description as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("mesh spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Mesh> {
        let spec: MeshSpec = serde_json::from_str(text).map_err(|e| Error::Domain(format!("mesh json: {e}")))?;
        Mesh::new(spec)
    }
}

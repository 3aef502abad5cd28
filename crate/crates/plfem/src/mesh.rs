//! Simplicial meshes with Dirichlet boundary tagging and quadrature data.
//!
//! Two mesh families are supported:
//! - 1-D: a uniform partition of an interval (a, b) into `n` segments.
//! - 2-D: the unit square split into an n-by-n grid of cells, each cell cut
//!   into two triangles along its diagonal (2n^2 triangles total).
//!
//! Elements are affine P1 simplices, so basis gradients are constant per
//! element and are precomputed. The quadrature rule is a 3-point rule per
//! element (Gauss-Legendre in 1-D, the interior barycentric rule in 2-D);
//! all quadrature points are strictly inside their element, which keeps
//! interpolated positive fields positive at evaluation points.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{Csr, CsrBuilder};

/// One simplex: node indices, measure, and the constant gradient of each
/// vertex basis function. In 1-D only the first two slots are used.
#[derive(Debug, Clone)]
pub struct Element {
    pub nodes: [usize; 3],
    pub measure: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug)]
pub struct Mesh {
    /// 1 or 2.
    pub dim: usize,
    /// Node coordinates; the y entry is 0 in 1-D.
    pub coords: Vec<[f64; 2]>,
    pub elems: Vec<Element>,
    /// Vertices per element: 2 in 1-D, 3 in 2-D.
    pub verts: usize,
    /// Sorted boundary node indices.
    pub boundary: Vec<usize>,
    /// Sorted interior node indices.
    pub interior: Vec<usize>,
    /// node index -> interior dof index (None on the boundary).
    pub interior_id: Vec<Option<usize>>,
    /// Basis values at each local quadrature point (one row per point).
    pub qp_basis: Vec<[f64; 3]>,
    /// Quadrature weights as fractions of the element measure; they sum to 1.
    pub qp_weight: Vec<f64>,
    /// Lazily built Laplacian stiffness matrix over interior dofs; the p = 2
    /// operator is linear in u, so every such solve reuses this.
    stiffness: OnceLock<Csr>,
}

impl Mesh {
    /// Uniform partition of (a, b) into n segments.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Arc<Mesh>> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("need n >= 2, got {n}")));
        }
        if !(b - a).is_finite() || b - a <= 0.0 {
            return Err(Error::InvalidMesh(format!("extent ({a}, {b}) not positive")));
        }
        let h = (b - a) / n as f64;
        let coords: Vec<[f64; 2]> = (0..=n).map(|i| [a + h * i as f64, 0.0]).collect();
        let elems = (0..n)
            .map(|i| Element {
                nodes: [i, i + 1, 0],
                measure: h,
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
            })
            .collect();

        // 3-point Gauss-Legendre mapped to barycentric coordinates.
        let g = (0.6f64).sqrt();
        let pts = [0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)];
        let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let qp_basis = pts.iter().map(|&t| [1.0 - t, t, 0.0]).collect();

        let boundary = vec![0, n];
        Ok(Arc::new(Self::finish(
            1,
            coords,
            elems,
            2,
            boundary,
            qp_basis,
            wts.to_vec(),
        )))
    }

    /// Unit square split into 2 n^2 right triangles.
    pub fn unit_square(n: usize) -> Result<Arc<Mesh>> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("need n >= 2, got {n}")));
        }
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut coords = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                coords.push([h * i as f64, h * j as f64]);
            }
        }
        let mut elems = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = idx(i, j);
                let b = idx(i + 1, j);
                let c = idx(i + 1, j + 1);
                let d = idx(i, j + 1);
                elems.push(Self::triangle(&coords, a, b, c));
                elems.push(Self::triangle(&coords, a, c, d));
            }
        }
        let mut boundary: Vec<usize> = (0..coords.len())
            .filter(|&k| {
                let [x, y] = coords[k];
                x == 0.0 || y == 0.0 || (x - 1.0).abs() < 0.5 * h || (y - 1.0).abs() < 0.5 * h
            })
            .collect();
        boundary.sort_unstable();

        // Interior 3-point rule (degree 2): all points strictly inside.
        let qp_basis = vec![
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        ];
        let qp_weight = vec![1.0 / 3.0; 3];
        Ok(Arc::new(Self::finish(
            2, coords, elems, 3, boundary, qp_basis, qp_weight,
        )))
    }

    fn triangle(coords: &[[f64; 2]], a: usize, b: usize, c: usize) -> Element {
        let (pa, pb, pc) = (coords[a], coords[b], coords[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let area = 0.5 * det;
        debug_assert!(area > 0.0, "triangle nodes must be counter-clockwise");
        let s = 1.0 / (2.0 * area);
        Element {
            nodes: [a, b, c],
            measure: area,
            grads: [
                [(pb[1] - pc[1]) * s, (pc[0] - pb[0]) * s],
                [(pc[1] - pa[1]) * s, (pa[0] - pc[0]) * s],
                [(pa[1] - pb[1]) * s, (pb[0] - pa[0]) * s],
            ],
        }
    }

    fn finish(
        dim: usize,
        coords: Vec<[f64; 2]>,
        elems: Vec<Element>,
        verts: usize,
        boundary: Vec<usize>,
        qp_basis: Vec<[f64; 3]>,
        qp_weight: Vec<f64>,
    ) -> Mesh {
        let mut interior_id = vec![None; coords.len()];
        let mut on_boundary = vec![false; coords.len()];
        for &b in &boundary {
            on_boundary[b] = true;
        }
        let interior: Vec<usize> = (0..coords.len()).filter(|&k| !on_boundary[k]).collect();
        for (dof, &node) in interior.iter().enumerate() {
            interior_id[node] = Some(dof);
        }
        Mesh {
            dim,
            coords,
            elems,
            verts,
            boundary,
            interior,
            interior_id,
            qp_basis,
            qp_weight,
            stiffness: OnceLock::new(),
        }
    }

    /// Stiffness matrix of the Laplacian (p = 2) on interior dofs.
    pub fn stiffness(&self) -> &Csr {
        self.stiffness.get_or_init(|| {
            let mut a = CsrBuilder::new(self.interior_count());
            for e in &self.elems {
                for i in 0..self.verts {
                    let Some(di) = self.interior_id[e.nodes[i]] else {
                        continue;
                    };
                    for j in 0..self.verts {
                        let Some(dj) = self.interior_id[e.nodes[j]] else {
                            continue;
                        };
                        let gij =
                            e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1];
                        a.add(di, dj, e.measure * gij);
                    }
                }
            }
            a.build()
        })
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Total measure of the domain.
    pub fn volume(&self) -> f64 {
        self.elems.iter().map(|e| e.measure).sum()
    }

    /// Diameter of the bounding box; used to scale gradient regularization.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.coords {
            for d in 0..2 {
                lo[d] = lo[d].min(c[d]);
                hi[d] = hi[d].max(c[d]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.interior_id[node].is_none()
    }

    /// Physical coordinates of a quadrature point.
    pub fn qp_coords(&self, elem: &Element, qp: usize) -> [f64; 2] {
        let mut x = [0.0; 2];
        for j in 0..self.verts {
            let c = self.coords[elem.nodes[j]];
            x[0] += self.qp_basis[qp][j] * c[0];
            x[1] += self.qp_basis[qp][j] * c[1];
        }
        x
    }

    /// For each boundary node, the nearest interior node and the distance to
    /// it. Used by the boundary slope check.
    pub fn nearest_interior(&self) -> Vec<(usize, usize, f64)> {
        self.boundary
            .iter()
            .map(|&b| {
                let pb = self.coords[b];
                let mut best = (usize::MAX, f64::INFINITY);
                for &i in &self.interior {
                    let pi = self.coords[i];
                    let d = ((pi[0] - pb[0]).powi(2) + (pi[1] - pb[1]).powi(2)).sqrt();
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                (b, best.0, best.1)
            })
            .collect()
    }
}

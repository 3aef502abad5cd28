//! Nodal fields on a mesh: norms, gradients, weighted integrals, CSV dump.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::weight::WeightField;

/// Piecewise-linear nodal field. One value per mesh node.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.node_count()],
        }
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![c; mesh.node_count()],
        }
    }

    /// Sample a coordinate function at the nodes.
    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: mesh.coords.iter().map(|c| f(c[0], c[1])).collect(),
        }
    }

    /// Build a Dirichlet-zero field from interior dof values.
    pub fn from_interior(mesh: &Arc<Mesh>, interior: &[f64]) -> Self {
        assert_eq!(interior.len(), mesh.interior_count());
        let mut values = vec![0.0; mesh.node_count()];
        for (dof, &node) in mesh.interior.iter().enumerate() {
            values[node] = interior[dof];
        }
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    pub fn same_mesh(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// True when every boundary node carries exactly zero.
    pub fn is_dirichlet_zero(&self) -> bool {
        self.mesh.boundary.iter().all(|&b| self.values[b] == 0.0)
    }

    pub fn require_dirichlet_zero(&self, what: &str) -> Result<()> {
        if self.is_dirichlet_zero() {
            Ok(())
        } else {
            Err(Error::InvalidField(format!(
                "{what} must vanish on the boundary"
            )))
        }
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh.interior.iter().map(|&n| self.values[n]).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact piecewise gradient of the P1 interpolant, one vector per element.
    pub fn grad_eval(&self) -> Vec<[f64; 2]> {
        self.mesh
            .elems
            .iter()
            .map(|e| {
                let mut g = [0.0; 2];
                for j in 0..self.mesh.verts {
                    let v = self.values[e.nodes[j]];
                    g[0] += v * e.grads[j][0];
                    g[1] += v * e.grads[j][1];
                }
                g
            })
            .collect()
    }

    /// Interpolated value at quadrature point `qp` of element `elem`.
    pub fn at_qp(&self, elem: usize, qp: usize) -> f64 {
        let e = &self.mesh.elems[elem];
        let mut v = 0.0;
        for j in 0..self.mesh.verts {
            v += self.mesh.qp_basis[qp][j] * self.values[e.nodes[j]];
        }
        v
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    pub fn abs_nodal(&self) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn clip_below(&self, floor: f64) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| v.max(floor)).collect(),
        }
    }

    /// Overwrite boundary nodes with exact zeros.
    pub fn zero_boundary(mut self) -> Self {
        for b in 0..self.values.len() {
            if self.mesh.interior_id[b].is_none() {
                self.values[b] = 0.0;
            }
        }
        self
    }

    /// Nodewise maximum of two fields.
    pub fn max_with(&self, other: &GridFunction) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    /// max over nodes of (other - self); negative when self >= other everywhere.
    pub fn max_excess_over(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| b - a)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when self <= other + tol at every node.
    pub fn below(&self, other: &GridFunction, tol: f64) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| *a <= *b + tol)
    }

    /// Write as CSV: header `x,u` (1-D) or `x,y,u` (2-D), node-index order.
    /// Values are printed in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        if self.mesh.dim == 1 {
            writeln!(out, "x,u")?;
            for (c, v) in self.mesh.coords.iter().zip(&self.values) {
                writeln!(out, "{},{}", c[0], v)?;
            }
        } else {
            writeln!(out, "x,y,u")?;
            for (c, v) in self.mesh.coords.iter().zip(&self.values) {
                writeln!(out, "{},{},{}", c[0], c[1], v)?;
            }
        }
        Ok(())
    }

    /// Read nodal values written by `write_csv` back onto `mesh`.
    pub fn read_csv<R: BufRead>(mesh: &Arc<Mesh>, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty nodal file".into()))??;
        let expect = if mesh.dim == 1 { "x,u" } else { "x,y,u" };
        if header.trim() != expect {
            return Err(Error::Parse(format!(
                "expected header '{expect}', found '{header}'"
            )));
        }
        let mut values = Vec::with_capacity(mesh.node_count());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::Parse(format!("bad row '{line}'")))?;
            let v: f64 = last
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value '{last}'")))?;
            values.push(v);
        }
        if values.len() != mesh.node_count() {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                mesh.node_count(),
                values.len()
            )));
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }
}

/// Quadrature approximation of the weighted power integral of |f|^r.
///
/// Both fields are interpolated at the quadrature points; the result is
/// nonnegative for any admissible weight.
pub fn integrate_weighted_power(f: &GridFunction, w: &WeightField, r: f64) -> Result<f64> {
    if !Arc::ptr_eq(&f.mesh, &w.mesh) {
        return Err(Error::IncompatibleFields(
            "field and weight live on different meshes".into(),
        ));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("power r = {r} must be >= 0")));
    }
    let mesh = &f.mesh;
    let mut acc = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        let mut local = 0.0;
        for qp in 0..mesh.qp_weight.len() {
            let fv = f.at_qp(ei, qp).abs();
            let wv = w.at_qp(ei, qp);
            local += mesh.qp_weight[qp] * wv * fv.powf(r);
        }
        acc += e.measure * local;
    }
    Ok(acc)
}

/// Plain integral of |f|^r (unit weight).
pub fn integrate_power(f: &GridFunction, r: f64) -> f64 {
    let mesh = &f.mesh;
    let mut acc = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        let mut local = 0.0;
        for qp in 0..mesh.qp_weight.len() {
            local += mesh.qp_weight[qp] * f.at_qp(ei, qp).abs().powf(r);
        }
        acc += e.measure * local;
    }
    acc
}

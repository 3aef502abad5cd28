//! Strictly positive bounded weight fields.

use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::mesh::Mesh;

/// How a weight field was produced. Stored so run configs can be reproduced.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Constant(f64),
    /// 1 + alpha * sin(pi x), |alpha| < 1.
    SinBump(f64),
    /// c0 + c1 * x, positivity validated on the samples.
    Affine(f64, f64),
    /// Loaded from a nodal-values file.
    Nodal,
}

/// Nodal samples of a weight, with cached essential bounds over the nodes.
#[derive(Debug, Clone)]
pub struct WeightField {
    pub mesh: Arc<Mesh>,
    pub kind: WeightKind,
    pub values: Vec<f64>,
    pub inf: f64,
    pub sup: f64,
}

impl WeightField {
    fn from_samples(mesh: &Arc<Mesh>, kind: WeightKind, values: Vec<f64>) -> Result<Self> {
        assert_eq!(values.len(), mesh.node_count());
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidWeight(format!("sample {v} at node {i}")));
            }
            inf = inf.min(v);
            sup = sup.max(v);
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            kind,
            values,
            inf,
            sup,
        })
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Result<Self> {
        Self::from_samples(mesh, WeightKind::Constant(c), vec![c; mesh.node_count()])
    }

    pub fn sin_bump(mesh: &Arc<Mesh>, alpha: f64) -> Result<Self> {
        if alpha.abs() >= 1.0 {
            return Err(Error::InvalidWeight(format!(
                "sin amplitude |{alpha}| must be < 1"
            )));
        }
        let values = mesh
            .coords
            .iter()
            .map(|c| 1.0 + alpha * (std::f64::consts::PI * c[0]).sin())
            .collect();
        Self::from_samples(mesh, WeightKind::SinBump(alpha), values)
    }

    pub fn affine(mesh: &Arc<Mesh>, c0: f64, c1: f64) -> Result<Self> {
        let values = mesh.coords.iter().map(|c| c0 + c1 * c[0]).collect();
        Self::from_samples(mesh, WeightKind::Affine(c0, c1), values)
    }

    pub fn from_nodal_file<R: BufRead>(mesh: &Arc<Mesh>, input: R) -> Result<Self> {
        let g = GridFunction::read_csv(mesh, input)?;
        Self::from_samples(mesh, WeightKind::Nodal, g.values)
    }

    /// Multiply every sample by s > 0.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_samples(
            &self.mesh,
            WeightKind::Nodal,
            self.values.iter().map(|v| s * v).collect(),
        )
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cached_bounds_match_samples() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let w = WeightField::sin_bump(&m, 0.5).unwrap();
        let lo = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(w.inf, lo);
        assert_eq!(w.sup, hi);
        assert!(w.inf > 0.0);
        assert!((w.sup - 1.5).abs() < 1e-3);
    }

    #[test]
    fn rejects_nonpositive_and_nonfinite() {
        let m = Mesh::interval(0.0, 1.0, 8).unwrap();
        assert!(WeightField::constant(&m, 0.0).is_err());
        assert!(WeightField::constant(&m, -1.0).is_err());
        assert!(WeightField::constant(&m, f64::NAN).is_err());
        assert!(WeightField::affine(&m, 0.5, -1.0).is_err()); // negative at x=1
        assert!(WeightField::sin_bump(&m, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn construction_never_accepts_a_nonpositive_sample(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0
        ) {
            let m = Mesh::interval(0.0, 1.0, 16).unwrap();
            match WeightField::affine(&m, c0, c1) {
                Ok(w) => prop_assert!(w.values.iter().all(|&v| v > 0.0)),
                Err(_) => {
                    let min = m.coords.iter()
                        .map(|c| c0 + c1 * c[0])
                        .fold(f64::INFINITY, f64::min);
                    prop_assert!(min <= 0.0);
                }
            }
        }
    }
}

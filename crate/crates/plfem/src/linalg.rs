//! Minimal sparse linear algebra: CSR storage, a tridiagonal direct solve
//! for 1-D meshes, and Jacobi-preconditioned conjugate gradients for 2-D.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[k] == i {
                    d[i] = self.data[k];
                }
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.indptr[i]..self.indptr[i + 1] {
            if self.indices[k] == j {
                return self.data[k];
            }
        }
        0.0
    }

    /// Largest asymmetry |a_ij - a_ji| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                worst = worst.max((self.data[k] - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Row-list assembler. Rows are short (a handful of couplings per dof), so
/// linear-scan accumulation beats tree maps; rows are sorted on build for a
/// deterministic CSR layout.
pub struct CsrBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &mut self.rows[i];
        for entry in row.iter_mut() {
            if entry.0 == j {
                entry.1 += v;
                return;
            }
        }
        row.push((j, v));
    }

    pub fn build(self) -> Csr {
        let mut indptr = Vec::with_capacity(self.n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in self.rows {
            row.sort_unstable_by_key(|e| e.0);
            for (j, v) in row {
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Csr {
            n: self.n,
            indptr,
            indices,
            data,
        }
    }
}

/// Direct solve for matrices whose rows only couple i-1, i, i+1 (1-D interior
/// dofs in left-to-right order). Thomas algorithm, no pivoting.
pub fn solve_tridiagonal(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        for k in a.indptr[i]..a.indptr[i + 1] {
            let j = a.indices[k];
            let v = a.data[k];
            if j + 1 == i {
                sub[i] = v;
            } else if j == i {
                diag[i] = v;
            } else if j == i + 1 {
                sup[i] = v;
            } else if v != 0.0 {
                return Err(Error::DegenerateLinearization(format!(
                    "entry ({i},{j}) outside tridiagonal band"
                )));
            }
        }
    }
    let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 + 1e-16 * scale {
        return Err(Error::DegenerateLinearization("zero pivot".into()));
    }
    c[0] = sup[0] / denom;
    d[0] = b[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        if denom.abs() < 1e-300 + 1e-16 * scale {
            return Err(Error::DegenerateLinearization(format!("tiny pivot at row {i}")));
        }
        c[i] = sup[i] / denom;
        d[i] = (b[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Jacobi-preconditioned CG for symmetric positive definite systems.
/// Reports a degeneracy error on nonpositive curvature instead of looping.
pub fn solve_pcg(a: &Csr, b: &[f64], tol_rel: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 {
                1.0 / d
            } else {
                1.0 // fall back to unpreconditioned for this row
            }
        })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::DegenerateLinearization(
                "nonpositive curvature in CG".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol_rel * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::DegenerateLinearization(format!(
        "CG did not reach tolerance in {max_iter} iterations"
    )))
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Restarted GMRES for complex, matrix-free linear operators.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// A square complex linear operator applied without forming its matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y <- A x`
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Cap on total inner iterations.
    pub max_iter: usize,
    /// Target relative residual `||b - A x|| / ||b||`.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// True relative residual recomputed from the returned solution.
    pub residual: f64,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a, b> = sum conj(a_i) b_i`
fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn residual(op: &dyn LinearOperator, b: &[C64], x: &[C64], out: &mut [C64]) -> f64 {
    op.apply(x, out);
    for (r, bi) in out.iter_mut().zip(b) {
        *r = bi - *r;
    }
    norm(out)
}

/// Solves `A x = b` starting from the initial guess in `x`.
pub fn gmres(op: &dyn LinearOperator, b: &[C64], x: &mut [C64], cfg: &GmresConfig) -> Result<GmresStats> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::shape(format!("vectors of length {n}"), format!("{} / {}", b.len(), x.len())));
    }
    let bnorm = norm(b);
    let mut r = vec![C64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        return Ok(GmresStats { iterations: 0, residual: 0.0 });
    }
    let m = cfg.restart.max(1);
    let mut basis: Vec<Vec<C64>> = (0..=m).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
    let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![C64::new(0.0, 0.0); m];
    let mut g = vec![C64::new(0.0, 0.0); m + 1];
    let mut w = vec![C64::new(0.0, 0.0); n];

    let mut iterations = 0usize;
    let mut rel = residual(op, b, x, &mut r) / bnorm;
    while rel > cfg.tol {
        if iterations >= cfg.max_iter {
            return Err(Error::NotConverged { iterations, residual: rel, tol: cfg.tol });
        }
        let beta = rel * bnorm;
        for (v, ri) in basis[0].iter_mut().zip(&r) {
            *v = ri / beta;
        }
        g.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        g[0] = C64::new(beta, 0.0);

        let mut k_used = 0;
        for k in 0..m {
            op.apply(&basis[k], &mut w);
            // modified Gram-Schmidt
            for i in 0..=k {
                let hik = dot(&basis[i], &w);
                hess[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&basis[i]) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm(&w);
            hess[k + 1][k] = C64::new(hnext, 0.0);
            if hnext > 0.0 {
                for (v, wj) in basis[k + 1].iter_mut().zip(&w) {
                    *v = wj / hnext;
                }
            }
            // previous rotations
            for i in 0..k {
                let (a, bb) = (hess[i][k], hess[i + 1][k]);
                hess[i][k] = cs[i] * a + sn[i] * bb;
                hess[i + 1][k] = -sn[i].conj() * a + cs[i] * bb;
            }
            // new rotation zeroing hess[k+1][k]
            let (a, bb) = (hess[k][k], hess[k + 1][k]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = C64::new(0.0, 0.0);
            } else if a.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = bb.conj() / bb.norm();
            } else {
                cs[k] = a.norm() / denom;
                sn[k] = (a / a.norm()) * bb.conj() / denom;
            }
            hess[k][k] = cs[k] * a + sn[k] * bb;
            hess[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] = cs[k] * g[k];

            iterations += 1;
            k_used = k + 1;
            let est = g[k + 1].norm() / bnorm;
            if est <= cfg.tol || hnext == 0.0 || iterations >= cfg.max_iter {
                break;
            }
        }

        // back substitution on the k_used x k_used triangle
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
        let prev = rel;
        rel = residual(op, b, x, &mut r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("GMRES residual".into()));
        }
        if rel > cfg.tol && rel >= prev && k_used < m {
            // happy breakdown that did not reach tolerance: stagnation
            return Err(Error::NotConverged { iterations, residual: rel, tol: cfg.tol });
        }
    }
    Ok(GmresStats { iterations, residual: rel })
}

/// Dense row-major matrix as an operator; used in tests and small problems.
pub struct DenseOperator {
    pub n: usize,
    pub data: Vec<C64>,
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, shift: f64, seed: u64) -> (DenseOperator, Vec<C64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    / (n as f64).sqrt();
            }
            data[i * n + i] += C64::new(shift, 0.5);
        }
        let b = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        (DenseOperator { n, data }, b)
    }

    #[test]
    fn solves_well_conditioned_system() {
        let (op, b) = random_system(60, 3.0, 1);
        let mut x = vec![C64::new(0.0, 0.0); 60];
        let stats = gmres(&op, &b, &mut x, &GmresConfig { restart: 10, max_iter: 500, tol: 1e-10 }).unwrap();
        assert!(stats.residual <= 1e-10);
        let mut r = vec![C64::new(0.0, 0.0); 60];
        assert!(residual(&op, &b, &x, &mut r) / norm(&b) <= 1e-10);
    }

    #[test]
    fn full_krylov_converges_in_n_steps() {
        let (op, b) = random_system(12, 0.2, 7);
        let mut x = vec![C64::new(0.0, 0.0); 12];
        let stats = gmres(&op, &b, &mut x, &GmresConfig { restart: 12, max_iter: 12, tol: 1e-9 }).unwrap();
        assert!(stats.iterations <= 12);
        assert!(stats.residual <= 1e-9);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (op, _) = random_system(5, 2.0, 3);
        let mut x = vec![C64::new(1.0, 1.0); 5];
        let stats = gmres(&op, &[C64::new(0.0, 0.0); 5], &mut x, &GmresConfig::default()).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn exact_initial_guess_needs_no_iterations() {
        let (op, _) = random_system(8, 2.0, 4);
        let xs: Vec<C64> = (0..8).map(|i| C64::new(i as f64, -1.0)).collect();
        let mut b = vec![C64::new(0.0, 0.0); 8];
        op.apply(&xs, &mut b);
        let mut x = xs.clone();
        let stats = gmres(&op, &b, &mut x, &GmresConfig::default()).unwrap();
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn reports_non_convergence() {
        let (op, b) = random_system(80, 0.0, 9);
        let mut x = vec![C64::new(0.0, 0.0); 80];
        let err = gmres(&op, &b, &mut x, &GmresConfig { restart: 3, max_iter: 6, tol: 1e-12 }).unwrap_err();
        match err {
            Error::NotConverged { residual, .. } => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}

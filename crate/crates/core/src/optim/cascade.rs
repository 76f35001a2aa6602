//! One cascade round: fit a pair of scalar columns `s`, `t` so that
//! `(s_i − s_j)² − (t_i − t_j)²` absorbs the residual `r_ij`, minimizing
//! `Σ_{i<j} w_ij ((s_i − s_j)² − (t_i − t_j)² − r_ij)²`.

use super::{OptimError, SymMatrix};
use crate::par::{self, Exec};

#[derive(Clone, Debug)]
pub struct CascadeProblem<'a> {
    r: &'a SymMatrix,
    w: &'a SymMatrix,
    exec: Exec,
}

impl<'a> CascadeProblem<'a> {
    pub fn new(r: &'a SymMatrix, w: &'a SymMatrix, exec: Exec) -> Result<Self, OptimError> {
        if r.len() != w.len() {
            return Err(OptimError::DimensionMismatch {
                expected: r.len(),
                found: w.len(),
            });
        }
        Ok(CascadeProblem { r, w, exec })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Objective at `x = [s; t]`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let (s, t) = x.split_at(n);
        par::sum_range(self.exec, n, |i| {
            let (r, w) = (self.r.row(i), self.w.row(i));
            let mut acc = 0.0;
            for j in i + 1..n {
                let (ds, dt) = (s[i] - s[j], t[i] - t[j]);
                let e = ds * ds - dt * dt - r[j];
                acc += w[j] * e * e;
            }
            acc
        })
    }

    /// Objective and gradient at `x = [s; t]`.
    pub fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.len();
        let (s, t) = x.split_at(n);
        // Full rows (both j < i and j > i) so each gradient entry is owned
        // by one row; the objective counts every pair twice.
        let rows = par::map_range(self.exec, n, |i| {
            let (r, w) = (self.r.row(i), self.w.row(i));
            let (mut f, mut gs, mut gt) = (0.0, 0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (ds, dt) = (s[i] - s[j], t[i] - t[j]);
                let e = ds * ds - dt * dt - r[j];
                let we = w[j] * e;
                f += we * e;
                gs += we * ds;
                gt -= we * dt;
            }
            (f, 4.0 * gs, 4.0 * gt)
        });
        let mut f = 0.0;
        for (i, &(fi, gs, gt)) in rows.iter().enumerate() {
            f += fi;
            grad[i] = gs;
            grad[n + i] = gt;
        }
        0.5 * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let n = 9;
        let r = SymMatrix::from_upper(n, Exec::Serial, |i, j| ((i * 3 + j) % 5) as f64 * 0.2 - 0.4);
        let w = SymMatrix::from_upper(n, Exec::Serial, |i, j| 0.5 + ((i + j) % 3) as f64);
        let p = CascadeProblem::new(&r, &w, Exec::Serial).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; 2 * n];
            let f = p.value_and_gradient(&x, &mut g);
            assert!((f - p.value(&x)).abs() <= 1e-12 * f.max(1.0));
            let h = 1e-6;
            for k in 0..2 * n {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (p.value(&a) - p.value(&b)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-3), "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn zero_columns_give_weighted_squared_residual() {
        let r = SymMatrix::from_upper(3, Exec::Serial, |i, j| (i + j) as f64);
        let w = SymMatrix::from_upper(3, Exec::Serial, |_, _| 2.0);
        let p = CascadeProblem::new(&r, &w, Exec::Serial).unwrap();
        let mut g = vec![1.0; 6];
        let f = p.value_and_gradient(&[0.0; 6], &mut g);
        assert_eq!(f, 2.0 * (1.0 + 4.0 + 9.0));
        assert!(g.iter().all(|&x| x == 0.0));
    }
}

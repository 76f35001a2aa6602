//! Weighted stress `Σ_{i<j} w_ij (‖q_i − q_j‖ − d_ij)²` and its
//! minimization by majorization.
//!
//! Each iteration fixes the pair directions `(q_i − q_j)/‖q_i − q_j‖` of
//! the current layout and minimizes the resulting convex quadratic
//! `Σ w_ij ‖(q_i − q_j) − d_ij·dir_ij‖²`, whose normal equations are
//! `L Q = B(Q) Q` with `L` the weighted graph Laplacian. That system is
//! solved approximately by Jacobi-preconditioned conjugate gradients
//! started from the current layout; since CG decreases the quadratic
//! monotonically from its starting point, every iteration decreases the
//! stress even when the inner solve is truncated.

use super::{pair_direction, OptimError, SolverOptions, SymMatrix};
use crate::par::{self, Exec};

/// Inner CG stops once the residual drops by this factor.
const CG_REDUCTION: f64 = 1e-3;
const CG_MAX_ITERATIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct StressProblem {
    d: SymMatrix,
    w: SymMatrix,
    m: usize,
    row_weight: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StressResult {
    /// Row-major `n × m` coordinates.
    pub q: Vec<f64>,
    pub stress: f64,
    /// Stress before the first and after every iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl StressProblem {
    /// Targets `d` with the standard weights `1/d_ij²`.
    pub fn new(d: SymMatrix, m: usize) -> Result<Self, OptimError> {
        check_targets(&d)?;
        let w = d.map(Exec::default(), |x| 1.0 / (x * x));
        Self::with_weights(d, w, m)
    }

    pub fn with_weights(d: SymMatrix, w: SymMatrix, m: usize) -> Result<Self, OptimError> {
        check_targets(&d)?;
        if w.len() != d.len() {
            return Err(OptimError::DimensionMismatch {
                expected: d.len(),
                found: w.len(),
            });
        }
        if w.as_slice().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(OptimError::InvalidTarget("weights must be finite and non-negative".into()));
        }
        if m == 0 {
            return Err(OptimError::InvalidOptions("embedding dimension must be positive".into()));
        }
        let row_weight = (0..w.len()).map(|i| w.row(i).iter().sum()).collect();
        Ok(StressProblem { d, w, m, row_weight })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn targets(&self) -> &SymMatrix {
        &self.d
    }

    pub fn weights(&self) -> &SymMatrix {
        &self.w
    }

    fn check_layout(&self, q: &[f64]) -> Result<(), OptimError> {
        if q.len() != self.len() * self.m {
            return Err(OptimError::DimensionMismatch {
                expected: self.len() * self.m,
                found: q.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, q: &[f64]) -> Result<f64, OptimError> {
        self.check_layout(q)?;
        Ok(self.value_unchecked(q, Exec::default()))
    }

    fn value_unchecked(&self, q: &[f64], exec: Exec) -> f64 {
        let (n, m) = (self.len(), self.m);
        par::sum_range(exec, n, |i| {
            let qi = &q[i * m..(i + 1) * m];
            let (d, w) = (self.d.row(i), self.w.row(i));
            let mut acc = 0.0;
            for j in i + 1..n {
                let r = dist(qi, &q[j * m..(j + 1) * m]) - d[j];
                acc += w[j] * r * r;
            }
            acc
        })
    }

    /// Stress and its gradient at `q`. Between coincident points the
    /// gradient uses the deterministic direction from `seed`.
    pub fn value_and_gradient(&self, q: &[f64], grad: &mut [f64], seed: u64) -> Result<f64, OptimError> {
        self.check_layout(q)?;
        if grad.len() != q.len() {
            return Err(OptimError::DimensionMismatch {
                expected: q.len(),
                found: grad.len(),
            });
        }
        let exec = Exec::default();
        let mut rhs = vec![0.0; q.len()];
        self.majorizer_rhs(q, &mut rhs, seed, exec);
        self.laplacian_apply(q, grad, exec);
        for (g, r) in grad.iter_mut().zip(&rhs) {
            *g = 2.0 * (*g - r);
        }
        Ok(self.value_unchecked(q, exec))
    }

    /// `out = L x` for the weighted Laplacian `L`.
    fn laplacian_apply(&self, x: &[f64], out: &mut [f64], exec: Exec) {
        let m = self.m;
        par::for_each_row(exec, out, m, |i, row| {
            let w = self.w.row(i);
            let xi = &x[i * m..(i + 1) * m];
            for (k, o) in row.iter_mut().enumerate() {
                *o = self.row_weight[i] * xi[k];
            }
            for (j, &wij) in w.iter().enumerate() {
                if wij != 0.0 {
                    let xj = &x[j * m..(j + 1) * m];
                    for (o, &v) in row.iter_mut().zip(xj) {
                        *o -= wij * v;
                    }
                }
            }
        });
    }

    /// `out_i = Σ_j w_ij d_ij (q_i − q_j)/‖q_i − q_j‖`.
    fn majorizer_rhs(&self, q: &[f64], out: &mut [f64], seed: u64, exec: Exec) {
        let (n, m) = (self.len(), self.m);
        par::for_each_row(exec, out, m, |i, row| {
            row.iter_mut().for_each(|x| *x = 0.0);
            let qi = &q[i * m..(i + 1) * m];
            let (d, w) = (self.d.row(i), self.w.row(i));
            let mut dir = vec![0.0; m];
            for j in 0..n {
                if j == i || w[j] == 0.0 {
                    continue;
                }
                let qj = &q[j * m..(j + 1) * m];
                let len = dist(qi, qj);
                if len > 0.0 {
                    let c = w[j] * d[j] / len;
                    for k in 0..m {
                        row[k] += c * (qi[k] - qj[k]);
                    }
                } else {
                    pair_direction(i, j, seed, &mut dir);
                    for k in 0..m {
                        row[k] += w[j] * d[j] * dir[k];
                    }
                }
            }
        });
    }

    /// Approximately solves `L x = rhs` starting from `x`, treating the
    /// `n × m` block as one vector.
    fn solve_laplacian(&self, x: &mut [f64], rhs: &[f64], exec: Exec) {
        let m = self.m;
        let mut lx = vec![0.0; x.len()];
        self.laplacian_apply(x, &mut lx, exec);
        let mut r: Vec<f64> = rhs.iter().zip(&lx).map(|(b, a)| b - a).collect();
        let precond = |r: &[f64], z: &mut [f64]| {
            for (i, (zi, ri)) in z.chunks_mut(m).zip(r.chunks(m)).enumerate() {
                let inv = if self.row_weight[i] > 0.0 { 1.0 / self.row_weight[i] } else { 0.0 };
                for (a, b) in zi.iter_mut().zip(ri) {
                    *a = inv * b;
                }
            }
        };
        let mut z = vec![0.0; x.len()];
        precond(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let stop = CG_REDUCTION * norm(&r);
        let mut ap = vec![0.0; x.len()];
        for _ in 0..CG_MAX_ITERATIONS {
            if norm(&r) <= stop || rz <= 0.0 {
                break;
            }
            self.laplacian_apply(&p, &mut ap, exec);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            precond(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..x.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

fn check_targets(d: &SymMatrix) -> Result<(), OptimError> {
    let n = d.len();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(OptimError::InvalidTarget(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            let x = d.get(i, j);
            if !(x.is_finite() && x > 0.0) {
                return Err(OptimError::InvalidTarget(format!("d({i}, {j}) = {x}")));
            }
            if x != d.get(j, i) {
                return Err(OptimError::InvalidTarget(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Minimizes the weighted stress from the row-major layout `q0`.
pub fn minimize_stress(
    problem: &StressProblem,
    q0: &[f64],
    opts: &SolverOptions,
) -> Result<StressResult, OptimError> {
    opts.validate()?;
    problem.check_layout(q0)?;
    let exec = opts.exec;
    let m = problem.m;
    let mut q = q0.to_vec();
    center(&mut q, m);

    let mut stress = problem.value_unchecked(&q, exec);
    let mut history = vec![stress];
    let mut rhs = vec![0.0; q.len()];
    let mut lq = vec![0.0; q.len()];
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        problem.majorizer_rhs(&q, &mut rhs, opts.seed, exec);
        problem.laplacian_apply(&q, &mut lq, exec);
        gradient_norm = 2.0 * lq.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if gradient_norm <= opts.gradient_tolerance {
            converged = true;
            break;
        }
        let mut next = q.clone();
        problem.solve_laplacian(&mut next, &rhs, exec);
        center(&mut next, m);
        let next_stress = problem.value_unchecked(&next, exec);
        iterations += 1;
        if next_stress > stress {
            // Only reachable through rounding once converged.
            history.push(stress);
            converged = true;
            break;
        }
        let decrease = stress - next_stress;
        q = next;
        stress = next_stress;
        history.push(stress);
        if decrease <= opts.relative_objective_tolerance * stress.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(StressResult {
        q,
        stress,
        history,
        iterations,
        gradient_norm,
        converged,
    })
}

/// Subtracts the column means.
fn center(q: &mut [f64], m: usize) {
    let n = q.len() / m;
    if n == 0 {
        return;
    }
    for k in 0..m {
        let mean = q.iter().skip(k).step_by(m).sum::<f64>() / n as f64;
        q.iter_mut().skip(k).step_by(m).for_each(|x| *x -= mean);
    }
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

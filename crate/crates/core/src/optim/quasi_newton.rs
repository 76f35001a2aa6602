//! Limited-memory BFGS with a strong-Wolfe line search (bracketing and
//! cubic-interpolation zoom). Every evaluation is bounded, so the solver
//! always terminates and reports why it stopped.

use std::collections::VecDeque;

use super::{OptimError, SolverOptions};

/// Sufficient-decrease and curvature constants of the Wolfe conditions.
const C1: f64 = 1e-4;
const C2: f64 = 0.9;
/// Objective evaluations allowed in one line search.
const MAX_LINE_SEARCH_EVALUATIONS: usize = 40;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QnStatus {
    /// Gradient norm fell below the tolerance.
    Converged,
    /// One iteration changed the objective by less than the relative
    /// tolerance.
    Stalled,
    MaxIterations,
    /// No step along a descent direction decreased the objective; the best
    /// point so far is returned.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct QuasiNewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: QnStatus,
}

impl QuasiNewtonResult {
    /// False only when the line search failed.
    pub fn ok(&self) -> bool {
        self.status != QnStatus::LineSearchFailed
    }
}

/// A point with its value and gradient.
#[derive(Clone)]
struct Sample {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Counted<F> {
    objective: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: Vec<f64>) -> Sample {
        let mut g = vec![0.0; x.len()];
        let f = (self.objective)(&x, &mut g);
        self.evaluations += 1;
        Sample { x, f, g }
    }
}

/// Minimizes `objective` from `x0`. The callback returns `f(x)` and
/// writes `∇f(x)` into its second argument.
///
/// Stops when `‖∇f‖ ≤ gradient_tolerance`, when an iteration decreases the
/// objective by at most `relative_objective_tolerance · |f|`, after
/// `max_iterations`, or when the line search fails. Accepted steps satisfy
/// sufficient decrease, so the result is never worse than `x0`.
pub fn quasi_newton_minimize<F>(
    objective: F,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<QuasiNewtonResult, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    opts.validate()?;
    let mut obj = Counted {
        objective,
        evaluations: 0,
    };
    let mut cur = obj.eval(x0.to_vec());
    if !cur.f.is_finite() {
        return Err(OptimError::InvalidTarget(format!("objective is {} at the start point", cur.f)));
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let status = loop {
        let gnorm = norm(&cur.g);
        if gnorm <= opts.gradient_tolerance {
            break QnStatus::Converged;
        }
        if iterations >= opts.max_iterations {
            break QnStatus::MaxIterations;
        }
        let mut d = two_loop(&memory, &cur.g);
        let mut slope = dot(&d, &cur.g);
        if !(slope < 0.0) {
            memory.clear();
            d = cur.g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let step0 = if memory.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let next = match line_search(&mut obj, &cur, &d, slope, step0) {
            Some(next) => next,
            None if !memory.is_empty() => {
                // Retry once along steepest descent with a fresh model.
                memory.clear();
                let sd: Vec<f64> = cur.g.iter().map(|v| -v).collect();
                match line_search(&mut obj, &cur, &sd, -gnorm * gnorm, (1.0 / gnorm).min(1.0)) {
                    Some(next) => next,
                    None => break QnStatus::LineSearchFailed,
                }
            }
            None => break QnStatus::LineSearchFailed,
        };
        iterations += 1;

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, sy));
        }
        let decrease = cur.f - next.f;
        cur = next;
        if decrease <= opts.relative_objective_tolerance * cur.f.abs().max(f64::MIN_POSITIVE) {
            break if norm(&cur.g) <= opts.gradient_tolerance {
                QnStatus::Converged
            } else {
                QnStatus::Stalled
            };
        }
    };
    Ok(QuasiNewtonResult {
        gradient_norm: norm(&cur.g),
        value: cur.f,
        x: cur.x,
        iterations,
        evaluations: obj.evaluations,
        status,
    })
}

/// `−H g` for the limited-memory inverse Hessian `H`.
fn two_loop(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; memory.len()];
    for (k, (s, y, sy)) in memory.iter().enumerate().rev() {
        alpha[k] = dot(s, &q) / sy;
        axpy(-alpha[k], y, &mut q);
    }
    if let Some((_, y, sy)) = memory.back() {
        let gamma = sy / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (k, (s, y, sy)) in memory.iter().enumerate() {
        let beta = dot(y, &q) / sy;
        axpy(alpha[k] - beta, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Finds a step along `d` satisfying the strong Wolfe conditions. Falls
/// back to the best sufficient-decrease step when the bracket collapses or
/// the evaluation budget runs out; `None` if no step decreased `f`.
fn line_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    obj: &mut Counted<F>,
    start: &Sample,
    d: &[f64],
    slope0: f64,
    step0: f64,
) -> Option<Sample> {
    let f0 = start.f;
    let at = |a: f64| -> Vec<f64> { start.x.iter().zip(d).map(|(x, di)| x + a * di).collect() };
    let armijo = |a: f64, f: f64| f.is_finite() && f <= f0 + C1 * a * slope0;
    let curvature = |s: f64| s.abs() <= -C2 * slope0;

    // `lo` always satisfies sufficient decrease and has the lowest value
    // seen; `hi` bounds the bracket once known.
    let mut lo = (0.0, f0, slope0);
    let mut lo_sample: Option<Sample> = None;
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut a = step0;
    for _ in 0..MAX_LINE_SEARCH_EVALUATIONS {
        let sample = obj.eval(at(a));
        let slope = dot(&sample.g, d);
        if !armijo(a, sample.f) || sample.f >= lo.1 {
            hi = Some((a, sample.f, slope));
        } else {
            if curvature(slope) {
                return Some(sample);
            }
            if let Some(h) = hi {
                if slope * (h.0 - a) >= 0.0 {
                    hi = Some(lo);
                }
            } else if slope >= 0.0 {
                hi = Some(lo);
            }
            lo = (a, sample.f, slope);
            lo_sample = Some(sample);
        }
        a = match hi {
            None => 2.0 * a,
            Some(h) => {
                let width = (h.0 - lo.0).abs();
                if width <= f64::EPSILON * lo.0.abs().max(h.0.abs()) {
                    break;
                }
                interpolate(lo, h)
            }
        };
    }
    lo_sample
}

/// Safeguarded cubic step inside the bracket `(lo, hi)`, each given as
/// `(step, value, slope)`.
fn interpolate(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a1, f1, d1) = lo;
    let (a2, f2, d2) = if hi.1.is_finite() { hi } else { return 0.5 * (lo.0 + hi.0) };
    let t1 = d1 + d2 - 3.0 * (f1 - f2) / (a1 - a2);
    let disc = t1 * t1 - d1 * d2;
    let mid = 0.5 * (a1 + a2);
    if !(disc >= 0.0) {
        return mid;
    }
    let t2 = (a2 - a1).signum() * disc.sqrt();
    let a = a2 - (a2 - a1) * (d2 + t2 - t1) / (d2 - d1 + 2.0 * t2);
    let (lo_b, hi_b) = (a1.min(a2), a1.max(a2));
    let margin = 0.1 * (hi_b - lo_b);
    if a.is_finite() && a > lo_b + margin && a < hi_b - margin {
        a
    } else {
        mid
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn solves_rosenbrock() {
        let res = quasi_newton_minimize(rosenbrock, &[-1.2, 1.0], &SolverOptions::quasi_newton()).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6, "{:?} {:?}", res.x, res.status);
        assert_eq!(res.status, QnStatus::Converged);
    }

    #[test]
    fn solves_shifted_parabola() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            (x[0] - 3.0).powi(2)
        };
        let res = quasi_newton_minimize(f, &[0.0], &SolverOptions::quasi_newton()).unwrap();
        assert!((res.x[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn never_worse_than_start() {
        // Kink at the minimum: the line search eventually cannot satisfy
        // the curvature condition.
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = x[0].signum();
            x[0].abs()
        };
        for x0 in [5.0, -0.3, 1e-3] {
            let res = quasi_newton_minimize(f, &[x0], &SolverOptions::quasi_newton()).unwrap();
            assert!(res.value <= x0.abs());
            assert!(res.evaluations <= 1 + 200 * 2 * MAX_LINE_SEARCH_EVALUATIONS);
        }
    }

    #[test]
    fn unbounded_below_stops_at_iteration_cap() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -1.0;
            -x[0]
        };
        let res = quasi_newton_minimize(f, &[0.0], &SolverOptions::quasi_newton().with_max_iterations(5)).unwrap();
        assert!(res.value < 0.0);
        assert_eq!(res.status, QnStatus::MaxIterations);
    }

    #[test]
    fn starting_at_minimum_returns_immediately() {
        let res = quasi_newton_minimize(rosenbrock, &[1.0, 1.0], &SolverOptions::quasi_newton()).unwrap();
        assert_eq!(res.x, vec![1.0, 1.0]);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.status, QnStatus::Converged);
    }

    #[test]
    fn rejects_non_finite_start() {
        let f = |_: &[f64], _: &mut [f64]| f64::NAN;
        assert!(quasi_newton_minimize(f, &[0.0], &SolverOptions::quasi_newton()).is_err());
    }

    #[test]
    fn deterministic() {
        let a = quasi_newton_minimize(rosenbrock, &[-1.2, 1.0], &SolverOptions::quasi_newton()).unwrap();
        let b = quasi_newton_minimize(rosenbrock, &[-1.2, 1.0], &SolverOptions::quasi_newton()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.evaluations, b.evaluations);
    }
}

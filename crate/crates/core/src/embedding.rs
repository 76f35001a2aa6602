//! Geodesic embedding of the saddle vertices.
//!
//! Each saddle `k` gets a vector `P_k = (q_k, s_k, t_k)` with a Euclidean
//! part `q_k ∈ R^m` and `l` cascade pairs, and geodesic distances between
//! saddles are approximated by
//!
//! ```text
//! f(P_i, P_j) = ‖q_i − q_j‖ − ‖s_i − s_j‖² + ‖t_i − t_j‖²
//! ```
//!
//! The Euclidean part minimizes weighted stress against exact distances;
//! every cascade round then fits one more `(s, t)` column pair to the
//! remaining residual, with earlier columns frozen.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geodesic::ExactGeodesics;
use crate::mesh::{Mesh, MeshError, VertexClassification};
use crate::optim::{
    minimize_stress, quasi_newton_minimize, CascadeProblem, OptimError, SolverOptions, StressProblem, SymMatrix,
};
use crate::par::{self, Exec};

/// Landmark count cap for the classical-MDS initialization.
pub const MAX_LANDMARKS: usize = 500;
/// Relative jitter added to the initial Euclidean layout.
const INIT_JITTER: f64 = 1e-6;
/// Relative half-width of the uniform cascade initialization (times √scale).
const CASCADE_INIT: f64 = 1e-3;
/// Pair weights are `1 / max(d, WEIGHT_FLOOR · scale)²`.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("need at least 2 saddle vertices, found {0}")]
    TooFewSaddles(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("some saddle vertex is unreachable from saddle {0}")]
    Unreachable(u32),
    #[error("invalid embedding: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingOptions {
    /// Euclidean dimension.
    pub m: usize,
    /// Cascade rounds.
    pub l: usize,
    pub seed: u64,
    pub stress: SolverOptions,
    pub cascade: SolverOptions,
    pub exec: Exec,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            m: 8,
            l: 46,
            seed: 0,
            stress: SolverOptions::stress(),
            cascade: SolverOptions::quasi_newton(),
            exec: Exec::default(),
        }
    }
}

impl EmbeddingOptions {
    fn stress_opts(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            exec: self.exec,
            ..self.stress
        }
    }

    fn cascade_opts(&self, round: usize) -> SolverOptions {
        SolverOptions {
            seed: self.seed.wrapping_add(0x5EED_0000 + round as u64),
            exec: self.exec,
            ..self.cascade
        }
    }
}

/// Embedded coordinates of the saddle vertices, one row per saddle in
/// classification order.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    m: usize,
    l: usize,
    saddles: Vec<u32>,
    euclidean: Vec<f64>,
    s_block: Vec<f64>,
    t_block: Vec<f64>,
    /// Weighted objective after the Euclidean stage and after each round.
    pub objective_history: Vec<f64>,
    /// Mean relative error over all saddle pairs, same indexing.
    pub epsilon_history: Vec<f64>,
}

/// One embedded vector `(q, s, t)`.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingRow<'a> {
    pub q: &'a [f64],
    pub s: &'a [f64],
    pub t: &'a [f64],
}

impl Embedding {
    /// Assembles an embedding from row-major blocks (`n × m`, `n × l`,
    /// `n × l`).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        m: usize,
        l: usize,
        saddles: Vec<u32>,
        euclidean: Vec<f64>,
        s_block: Vec<f64>,
        t_block: Vec<f64>,
        objective_history: Vec<f64>,
        epsilon_history: Vec<f64>,
    ) -> Result<Self, EmbeddingError> {
        let n = saddles.len();
        for (len, want) in [(euclidean.len(), n * m), (s_block.len(), n * l), (t_block.len(), n * l)] {
            if len != want {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: want,
                    found: len,
                });
            }
        }
        for h in [&objective_history, &epsilon_history] {
            if h.len() != l + 1 {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: l + 1,
                    found: h.len(),
                });
            }
        }
        if objective_history.windows(2).any(|w| w[1] > w[0]) {
            return Err(EmbeddingError::Invalid("objective history increases".into()));
        }
        Ok(Embedding {
            m,
            l,
            saddles,
            euclidean,
            s_block,
            t_block,
            objective_history,
            epsilon_history,
        })
    }

    /// Embedding with no saddle rows (surfaces without saddles).
    pub fn empty(m: usize, l: usize, saddles: Vec<u32>) -> Self {
        let n = saddles.len();
        Embedding {
            m,
            l,
            saddles,
            euclidean: vec![0.0; n * m],
            s_block: vec![0.0; n * l],
            t_block: vec![0.0; n * l],
            objective_history: vec![0.0; l + 1],
            epsilon_history: vec![0.0; l + 1],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.saddles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.saddles.is_empty()
    }

    /// Mesh vertex of each row.
    pub fn saddles(&self) -> &[u32] {
        &self.saddles
    }

    pub fn euclidean(&self) -> &[f64] {
        &self.euclidean
    }

    pub fn s_block(&self) -> &[f64] {
        &self.s_block
    }

    pub fn t_block(&self) -> &[f64] {
        &self.t_block
    }

    pub fn row(&self, i: usize) -> EmbeddingRow<'_> {
        EmbeddingRow {
            q: &self.euclidean[i * self.m..(i + 1) * self.m],
            s: &self.s_block[i * self.l..(i + 1) * self.l],
            t: &self.t_block[i * self.l..(i + 1) * self.l],
        }
    }

    /// `f(P_i, P_j)` for rows `i`, `j`.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        row_distance(&self.row(i), &self.row(j))
    }

    /// The first `rounds` cascade rounds only.
    pub fn truncated(&self, rounds: usize) -> Embedding {
        let rounds = rounds.min(self.l);
        let n = self.len();
        let cut = |block: &[f64]| -> Vec<f64> {
            (0..n)
                .flat_map(|i| block[i * self.l..i * self.l + rounds].iter().copied())
                .collect()
        };
        Embedding {
            m: self.m,
            l: rounds,
            saddles: self.saddles.clone(),
            euclidean: self.euclidean.clone(),
            s_block: cut(&self.s_block),
            t_block: cut(&self.t_block),
            objective_history: self.objective_history[..=rounds].to_vec(),
            epsilon_history: self.epsilon_history[..=rounds].to_vec(),
        }
    }
}

/// `f(P_i, P_j) = ‖q_i − q_j‖ − ‖s_i − s_j‖² + ‖t_i − t_j‖²`.
pub fn embed_distance(a: &EmbeddingRow<'_>, b: &EmbeddingRow<'_>) -> Result<f64, EmbeddingError> {
    for (x, y) in [(a.q.len(), b.q.len()), (a.s.len(), b.s.len()), (a.t.len(), b.t.len())] {
        if x != y {
            return Err(EmbeddingError::DimensionMismatch { expected: x, found: y });
        }
    }
    if a.s.len() != a.t.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.s.len(),
            found: a.t.len(),
        });
    }
    Ok(row_distance(a, b))
}

#[inline]
fn row_distance(a: &EmbeddingRow<'_>, b: &EmbeddingRow<'_>) -> f64 {
    let sq = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum() };
    sq(a.q, b.q).sqrt() - sq(a.s, b.s) + sq(a.t, b.t)
}

/// Exact geodesic distances between all pairs of saddle vertices, indexed
/// by saddle rank.
pub fn ground_truth_saddle_distances(
    mesh: &Mesh,
    classification: &VertexClassification,
) -> Result<SymMatrix, EmbeddingError> {
    ground_truth_saddle_distances_with(mesh, classification, Exec::default())
}

pub fn ground_truth_saddle_distances_with(
    mesh: &Mesh,
    classification: &VertexClassification,
    exec: Exec,
) -> Result<SymMatrix, EmbeddingError> {
    let saddles = classification.saddles();
    let n = saddles.len();
    if n < 2 {
        return Err(EmbeddingError::TooFewSaddles(n));
    }
    if classification.num_vertices() != mesh.num_vertices() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: classification.num_vertices(),
        });
    }
    let engine = ExactGeodesics::new(mesh);
    // Row i holds distances to saddles of higher rank; each source stops
    // once all of those are settled. Saddles are relays, so they get settle
    // events without settling every vertex.
    let rows = par::map_range(exec, n, |i| {
        let mut row = vec![f64::INFINITY; n - i - 1];
        let mut remaining = row.len();
        if remaining > 0 {
            engine.run(
                saddles[i] as usize,
                &mut |v, d, _| {
                    if let Some(r) = classification.saddle_rank(v) {
                        if r > i && row[r - i - 1].is_infinite() {
                            row[r - i - 1] = d;
                            remaining -= 1;
                        }
                    }
                    remaining > 0
                },
                false,
            );
        }
        row
    });
    if let Some(i) = rows.iter().position(|r| r.iter().any(|d| !d.is_finite())) {
        return Err(EmbeddingError::Unreachable(saddles[i]));
    }
    Ok(SymMatrix::from_upper(n, exec, |i, j| rows[i][j - i - 1]))
}

/// Pair weights `1/d²` with `d` floored at `WEIGHT_FLOOR · scale`.
pub fn pair_weights(d: &SymMatrix, scale: f64, exec: Exec) -> SymMatrix {
    let floor = WEIGHT_FLOOR * scale;
    d.map(exec, |x| {
        let x = x.max(floor);
        1.0 / (x * x)
    })
}

/// Largest entry of `d`, used as the length scale of an embedding problem.
pub fn distance_scale(d: &SymMatrix) -> f64 {
    d.as_slice().iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Mean of `|approx_ij − d_ij| / d_ij` over all pairs `i < j`.
pub fn mean_relative_error(d: &SymMatrix, approx: impl Fn(usize, usize) -> f64 + Sync + Send, exec: Exec) -> f64 {
    let n = d.len();
    if n < 2 {
        return 0.0;
    }
    let total = par::sum_range(exec, n, |i| {
        let row = d.row(i);
        (i + 1..n).map(|j| (approx(i, j) - row[j]).abs() / row[j]).sum::<f64>()
    });
    total / (n * (n - 1) / 2) as f64
}

/// Result of the Euclidean stage.
#[derive(Clone, Debug)]
pub struct EuclideanResult {
    pub m: usize,
    /// Row-major `n × m`.
    pub q: Vec<f64>,
    pub stress: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

/// Landmark classical MDS: `k` columns, row-major `n × k`.
fn landmark_mds(d: &SymMatrix, k: usize, seed: u64) -> Vec<f64> {
    let n = d.len();
    let nl = n.min(MAX_LANDMARKS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut landmarks = index::sample(&mut rng, n, nl).into_vec();
    landmarks.sort_unstable();

    let sq = |a: usize, b: usize| {
        let x = d.get(a, b);
        x * x
    };
    let mut delta = nalgebra::DMatrix::<f64>::zeros(nl, nl);
    for a in 0..nl {
        for b in 0..nl {
            delta[(a, b)] = sq(landmarks[a], landmarks[b]);
        }
    }
    let row_mean: Vec<f64> = (0..nl).map(|a| delta.row(a).sum() / nl as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / nl as f64;
    let b = nalgebra::DMatrix::from_fn(nl, nl, |a, c| -0.5 * (delta[(a, c)] - row_mean[a] - row_mean[c] + grand));
    let eig = nalgebra::SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..nl).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));

    // Distance-to-landmark triangulation; reproduces classical MDS on the
    // landmarks themselves.
    let mut q = vec![0.0; n * k];
    for (col, &e) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[e];
        if lambda <= 1e-12 * eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE) {
            continue;
        }
        let v = eig.eigenvectors.column(e);
        let c = -0.5 / lambda.sqrt();
        for x in 0..n {
            let mut acc = 0.0;
            for a in 0..nl {
                acc += v[a] * (sq(x, landmarks[a]) - row_mean[a]);
            }
            q[x * k + col] = c * acc;
        }
    }
    q
}

fn jitter(q: &mut [f64], amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4A17_7E55);
    for x in q {
        *x += amplitude * rng.gen_range(-1.0..1.0);
    }
}

/// Euclidean embeddings for an increasing list of dimensions. The first
/// starts from landmark MDS; each later one starts from the previous
/// solution padded with the next MDS columns.
pub fn euclidean_embed_schedule(
    d: &SymMatrix,
    dims: &[usize],
    opts: &EmbeddingOptions,
) -> Result<Vec<EuclideanResult>, EmbeddingError> {
    let n = d.len();
    if n < 2 {
        return Err(EmbeddingError::TooFewSaddles(n));
    }
    if dims.is_empty() || dims[0] == 0 || dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EmbeddingError::Invalid("dimensions must be positive and increasing".into()));
    }
    let scale = distance_scale(d);
    let kmax = *dims.last().unwrap();
    let mut init = landmark_mds(d, kmax, opts.seed);
    jitter(&mut init, INIT_JITTER * scale, opts.seed);
    let w = pair_weights(d, scale, opts.exec);

    let mut results: Vec<EuclideanResult> = Vec::with_capacity(dims.len());
    for &m in dims {
        let problem = StressProblem::with_weights(d.clone(), w.clone(), m)?;
        let start: Vec<f64> = match results.last() {
            None => (0..n).flat_map(|i| init[i * kmax..i * kmax + m].iter().copied()).collect(),
            Some(prev) => (0..n)
                .flat_map(|i| {
                    let old = &prev.q[i * prev.m..(i + 1) * prev.m];
                    old.iter().copied().chain(init[i * kmax + prev.m..i * kmax + m].iter().copied())
                })
                .collect(),
        };
        let res = minimize_stress(&problem, &start, &opts.stress_opts())?;
        let epsilon = mean_relative_error(
            d,
            |i, j| {
                let (a, b) = (&res.q[i * m..(i + 1) * m], &res.q[j * m..(j + 1) * m]);
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            },
            opts.exec,
        );
        results.push(EuclideanResult {
            m,
            q: res.q,
            stress: res.stress,
            epsilon,
            iterations: res.iterations,
        });
    }
    Ok(results)
}

/// Euclidean embedding of dimension `m` from a landmark-MDS start.
pub fn euclidean_embed(d: &SymMatrix, m: usize, opts: &EmbeddingOptions) -> Result<EuclideanResult, EmbeddingError> {
    Ok(euclidean_embed_schedule(d, &[m], opts)?.remove(0))
}

/// `r_ij = f_ij − d_ij` for the embedding built so far.
pub fn residuals(d: &SymMatrix, emb: &Embedding, exec: Exec) -> Result<SymMatrix, EmbeddingError> {
    if emb.len() != d.len() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: d.len(),
            found: emb.len(),
        });
    }
    Ok(SymMatrix::from_upper(d.len(), exec, |i, j| emb.distance(i, j) - d.get(i, j)))
}

/// Result of one cascade round.
#[derive(Clone, Debug)]
pub struct CascadeRound {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Objective with zero columns (the incoming weighted squared residual).
    pub objective_before: f64,
    pub objective_after: f64,
    /// The solve did not improve on zero columns, which were kept instead.
    pub reset: bool,
}

/// Fits one `(s, t)` column pair to the residual `r` under weights `w`.
/// `scale` sets the size of the random start.
pub fn cascade_round(
    r: &SymMatrix,
    w: &SymMatrix,
    scale: f64,
    opts: &SolverOptions,
) -> Result<CascadeRound, EmbeddingError> {
    let n = r.len();
    let problem = CascadeProblem::new(r, w, opts.exec)?;
    let zero = vec![0.0; 2 * n];
    let objective_before = problem.value(&zero);
    // Zero columns are a stationary point; start just off it.
    let delta = CASCADE_INIT * scale.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-delta..=delta)).collect();
    let res = quasi_newton_minimize(|x, g| problem.value_and_gradient(x, g), &x0, opts)?;
    let (x, objective_after, reset) = if res.value < objective_before {
        (res.x, res.value, false)
    } else {
        (zero, objective_before, true)
    };
    let (s, t) = x.split_at(n);
    Ok(CascadeRound {
        s: s.to_vec(),
        t: t.to_vec(),
        objective_before,
        objective_after,
        reset,
    })
}

/// Full pipeline: exact saddle distances, Euclidean stage, `l` cascade
/// rounds. Surfaces with fewer than two saddles get an empty embedding.
pub fn geodesic_embedding(
    mesh: &Mesh,
    classification: &VertexClassification,
    opts: &EmbeddingOptions,
) -> Result<Embedding, EmbeddingError> {
    let saddles = classification.saddles().to_vec();
    if saddles.len() < 2 {
        return Ok(Embedding::empty(opts.m, opts.l, saddles));
    }
    let d = ground_truth_saddle_distances_with(mesh, classification, opts.exec)?;
    embed_distances(&d, saddles, opts)
}

/// Embedding stage on precomputed saddle distances `d` (rows match
/// `saddles`).
pub fn embed_distances(d: &SymMatrix, saddles: Vec<u32>, opts: &EmbeddingOptions) -> Result<Embedding, EmbeddingError> {
    let n = d.len();
    if saddles.len() != n {
        return Err(EmbeddingError::DimensionMismatch {
            expected: n,
            found: saddles.len(),
        });
    }
    if opts.m == 0 {
        return Err(EmbeddingError::Invalid("m must be at least 1".into()));
    }
    let euclid = euclidean_embed(d, opts.m, opts)?;
    let (m, l) = (opts.m, opts.l);
    let scale = distance_scale(d);
    let w = pair_weights(d, scale, opts.exec);

    let mut emb = Embedding {
        m,
        l: 0,
        saddles,
        euclidean: euclid.q,
        s_block: Vec::new(),
        t_block: Vec::new(),
        objective_history: Vec::with_capacity(l + 1),
        epsilon_history: Vec::with_capacity(l + 1),
    };
    let mut r = residuals(d, &emb, opts.exec)?;
    emb.objective_history.push(weighted_square(&r, &w, opts.exec));
    emb.epsilon_history.push(residual_epsilon(&r, d, opts.exec));

    let mut s_cols: Vec<Vec<f64>> = Vec::with_capacity(l);
    let mut t_cols: Vec<Vec<f64>> = Vec::with_capacity(l);
    for round in 0..l {
        let res = cascade_round(&r, &w, scale, &opts.cascade_opts(round))?;
        let (s, t) = (&res.s, &res.t);
        r = SymMatrix::from_upper(n, opts.exec, |i, j| {
            let (ds, dt) = (s[i] - s[j], t[i] - t[j]);
            r.get(i, j) - ds * ds + dt * dt
        });
        let objective = weighted_square(&r, &w, opts.exec);
        // Recomputing from the updated residual can differ from the
        // solver's value in the last bits; keep the record monotone.
        let prev = *emb.objective_history.last().unwrap();
        emb.objective_history.push(objective.min(prev));
        emb.epsilon_history.push(residual_epsilon(&r, d, opts.exec));
        s_cols.push(res.s);
        t_cols.push(res.t);
    }
    emb.l = l;
    emb.s_block = (0..n).flat_map(|i| s_cols.iter().map(move |c| c[i])).collect();
    emb.t_block = (0..n).flat_map(|i| t_cols.iter().map(move |c| c[i])).collect();
    Ok(emb)
}

fn weighted_square(r: &SymMatrix, w: &SymMatrix, exec: Exec) -> f64 {
    let n = r.len();
    par::sum_range(exec, n, |i| {
        let (rr, ww) = (r.row(i), w.row(i));
        (i + 1..n).map(|j| ww[j] * rr[j] * rr[j]).sum::<f64>()
    })
}

fn residual_epsilon(r: &SymMatrix, d: &SymMatrix, exec: Exec) -> f64 {
    mean_relative_error(d, |i, j| d.get(i, j) + r.get(i, j), exec)
}

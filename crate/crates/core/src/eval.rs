//! Error metrics, pair sampling and query timing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesic::ExactGeodesics;
use crate::mesh::Mesh;
use crate::par::{self, Exec};
use crate::query::{QueryContext, QueryError, QueryStats};

/// Queries run before timing starts.
pub const WARMUP_QUERIES: usize = 100;
/// Histogram bin width (relative error).
pub const BIN_WIDTH: f64 = 0.005;
/// Regular bins up to `BIN_COUNT · BIN_WIDTH`, then one overflow bin.
pub const BIN_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 vertices, mesh has {0}")]
    TooFewVertices(usize),
    #[error("requested {requested} pairs but only {available} exist")]
    TooManyPairs { requested: usize, available: usize },
    #[error("length mismatch: {expected} pairs, {found} values")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("vertex {index} out of range (mesh has {count} vertices)")]
    InvalidVertex { index: usize, count: usize },
}

/// Ordered vertex pairs with `u ≠ v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub pairs: Vec<(u32, u32)>,
    pub seed: u64,
}

impl PairSample {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `count` distinct ordered pairs drawn uniformly from the `n(n−1)` pairs
/// of a mesh with `n` vertices.
pub fn sample_pairs(mesh: &Mesh, count: usize, seed: u64) -> Result<PairSample, EvalError> {
    sample_vertex_pairs(mesh.num_vertices(), count, seed)
}

pub fn sample_vertex_pairs(n: usize, count: usize, seed: u64) -> Result<PairSample, EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewVertices(n));
    }
    let available = n * (n - 1);
    if count > available {
        return Err(EvalError::TooManyPairs {
            requested: count,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = index::sample(&mut rng, available, count)
        .into_iter()
        .map(|k| {
            let u = k / (n - 1);
            let r = k % (n - 1);
            let v = if r >= u { r + 1 } else { r };
            (u as u32, v as u32)
        })
        .collect();
    Ok(PairSample { pairs, seed })
}

/// `|approx − truth| / truth`. `None` when `truth = 0` and `approx ≠ 0`.
pub fn relative_error(approx: f64, truth: f64) -> Option<f64> {
    if truth > 0.0 {
        Some((approx - truth).abs() / truth)
    } else if approx == truth {
        Some(0.0)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges; the last is `+∞` (serialized as null).
    pub edges: Vec<Option<f64>>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn relative_error_bins() -> Self {
        let mut edges: Vec<Option<f64>> = (0..=BIN_COUNT).map(|k| Some(k as f64 * BIN_WIDTH)).collect();
        edges.push(None);
        Histogram {
            edges,
            counts: vec![0; BIN_COUNT + 1],
        }
    }

    fn add(&mut self, e: f64) {
        let k = ((e / BIN_WIDTH).floor() as usize).min(BIN_COUNT);
        self.counts[k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub u: u32,
    pub v: u32,
    pub approx: f64,
    pub truth: f64,
    /// `None` for undefined pairs (zero truth, nonzero estimate).
    pub error: Option<f64>,
}

/// Wall-clock statistics per query, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub queries: usize,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

impl TimingStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return TimingStats {
                queries: 0,
                mean: 0.0,
                median: 0.0,
                p99: 0.0,
            };
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let at = |q: f64| samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        TimingStats {
            queries: n,
            mean: samples.iter().sum::<f64>() / n as f64,
            median: if n % 2 == 1 {
                samples[n / 2]
            } else {
                0.5 * (samples[n / 2 - 1] + samples[n / 2])
            },
            p99: at(0.99),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mean_relative_error: f64,
    pub histogram: Histogram,
    /// Undefined pairs, left out of the mean and the histogram.
    pub excluded: usize,
    pub timing: Option<TimingStats>,
    pub case_mix: Option<QueryStats>,
    #[serde(skip)]
    pub pairs: Vec<PairError>,
}

impl ErrorReport {
    /// Builds the report from per-pair estimates and exact values.
    pub fn from_values(sample: &PairSample, approx: &[f64], truth: &[f64]) -> Result<Self, EvalError> {
        for len in [approx.len(), truth.len()] {
            if len != sample.len() {
                return Err(EvalError::LengthMismatch {
                    expected: sample.len(),
                    found: len,
                });
            }
        }
        let mut histogram = Histogram::relative_error_bins();
        let (mut sum, mut used) = (0.0, 0usize);
        let pairs: Vec<PairError> = sample
            .pairs
            .iter()
            .zip(approx.iter().zip(truth))
            .map(|(&(u, v), (&a, &t))| {
                let error = relative_error(a, t);
                if let Some(e) = error {
                    histogram.add(e);
                    sum += e;
                    used += 1;
                }
                PairError {
                    u,
                    v,
                    approx: a,
                    truth: t,
                    error,
                }
            })
            .collect();
        Ok(ErrorReport {
            mean_relative_error: if used > 0 { sum / used as f64 } else { 0.0 },
            histogram,
            excluded: sample.len() - used,
            timing: None,
            case_mix: None,
            pairs,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per pair: `u,v,approx,truth,relative_error` (empty error
    /// for undefined pairs).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v,approx,truth,relative_error\n");
        for p in &self.pairs {
            let e = p.error.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", p.u, p.v, p.approx, p.truth, e);
        }
        out
    }
}

/// Mean relative error of `approx` against `truth` over the sample.
pub fn mean_relative_error(
    sample: &PairSample,
    approx: impl Fn(usize, usize) -> f64 + Sync + Send,
    truth: impl Fn(usize, usize) -> f64 + Sync + Send,
    exec: Exec,
) -> ErrorReport {
    let values = par::map_slice(exec, &sample.pairs, |&(u, v)| (approx(u as usize, v as usize), truth(u as usize, v as usize)));
    let (a, t): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
    ErrorReport::from_values(sample, &a, &t).expect("lengths match")
}

/// Exact distances for every sampled pair, one exact SSAD per distinct
/// source vertex.
pub fn exact_pair_distances(mesh: &Mesh, sample: &PairSample, exec: Exec) -> Result<Vec<f64>, EvalError> {
    let n = mesh.num_vertices();
    let mut by_source: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, &(u, v)) in sample.pairs.iter().enumerate() {
        for x in [u, v] {
            if x as usize >= n {
                return Err(EvalError::InvalidVertex {
                    index: x as usize,
                    count: n,
                });
            }
        }
        by_source.entry(u).or_default().push(k);
    }
    let groups: Vec<(u32, Vec<usize>)> = by_source.into_iter().collect();
    let engine = ExactGeodesics::new(mesh);
    let found = par::map_slice(exec, &groups, |(src, members)| {
        let (dist, _) = engine.distances(*src as usize);
        members
            .iter()
            .map(|&k| (k, dist[sample.pairs[k].1 as usize]))
            .collect::<Vec<_>>()
    });
    let mut out = vec![0.0; sample.len()];
    for (k, d) in found.into_iter().flatten() {
        out[k] = d;
    }
    Ok(out)
}

/// Query answers and case mix for the sample.
pub fn query_sample(ctx: &QueryContext<'_>, sample: &PairSample) -> Result<(Vec<f64>, QueryStats), EvalError> {
    let mut stats = QueryStats::default();
    let mut out = Vec::with_capacity(sample.len());
    for &(u, v) in &sample.pairs {
        let r = ctx.query(u as usize, v as usize)?;
        stats.record(&r);
        out.push(r.distance);
    }
    Ok((out, stats))
}

/// Error report of query answers against exact distances.
pub fn evaluate_queries(ctx: &QueryContext<'_>, sample: &PairSample, truth: &[f64]) -> Result<ErrorReport, EvalError> {
    let (approx, stats) = query_sample(ctx, sample)?;
    let mut report = ErrorReport::from_values(sample, &approx, truth)?;
    report.case_mix = Some(stats);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub timing: TimingStats,
    /// One pass over the sample.
    pub case_mix: QueryStats,
}

/// Times each query individually: `WARMUP_QUERIES` untimed queries, then
/// `repetitions` passes over the sample. Single-threaded.
pub fn benchmark_queries(
    ctx: &QueryContext<'_>,
    sample: &PairSample,
    repetitions: usize,
) -> Result<BenchmarkReport, EvalError> {
    let (_, case_mix) = query_sample(ctx, sample)?;
    if sample.is_empty() {
        return Ok(BenchmarkReport {
            timing: TimingStats::from_samples(Vec::new()),
            case_mix,
        });
    }
    let mut sink = 0.0;
    for &(u, v) in sample.pairs.iter().cycle().take(WARMUP_QUERIES) {
        sink += ctx.query(u as usize, v as usize)?.distance;
    }
    let mut samples = Vec::with_capacity(sample.len() * repetitions);
    for _ in 0..repetitions {
        for &(u, v) in &sample.pairs {
            let start = Instant::now();
            let r = ctx.query(u as usize, v as usize)?;
            samples.push(start.elapsed().as_secs_f64());
            sink += r.distance;
        }
    }
    std::hint::black_box(sink);
    Ok(BenchmarkReport {
        timing: TimingStats::from_samples(samples),
        case_mix,
    })
}

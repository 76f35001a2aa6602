//! Degree-capped saddle vertex graph.
//!
//! Every vertex is linked to the vertices it reaches by direct geodesics
//! (paths that do not bend through a relay vertex), up to `k` neighbors or
//! `k_saddle` saddle neighbors per source. The result is symmetrized and
//! stored as a compressed sparse row graph with rows sorted by neighbor.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

use crate::geodesic::ExactGeodesics;
use crate::mesh::{Mesh, MeshError, VertexClassification};
use crate::par::{self, Exec};

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("invalid SVG parameters: K = {k}, K_S = {k_saddle} (need K >= 1 and 1 <= K_S <= K)")]
    InvalidParams { k: usize, k_saddle: usize },
    #[error("vertex {index} out of range ({count} vertices)")]
    InvalidVertex { index: usize, count: usize },
    #[error("malformed graph: {0}")]
    Malformed(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SvgParams {
    pub k: usize,
    pub k_saddle: usize,
}

impl Default for SvgParams {
    fn default() -> Self {
        SvgParams { k: 60, k_saddle: 20 }
    }
}

impl SvgParams {
    pub fn new(k: usize, k_saddle: usize) -> Result<Self, SvgError> {
        let params = SvgParams { k, k_saddle };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SvgError> {
        if self.k == 0 || self.k_saddle == 0 || self.k_saddle > self.k {
            return Err(SvgError::InvalidParams {
                k: self.k,
                k_saddle: self.k_saddle,
            });
        }
        Ok(())
    }
}

/// Edge class by endpoint type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tier {
    /// Both endpoints are saddles.
    SS,
    /// Exactly one endpoint is a saddle.
    NS,
    /// Neither endpoint is a saddle.
    NN,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::SS => "SS",
            Tier::NS => "NS",
            Tier::NN => "NN",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgNeighbor {
    pub vertex: usize,
    pub weight: f64,
    pub tier: Tier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Svg {
    params: SvgParams,
    classification: VertexClassification,
    offsets: Vec<u64>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

/// Builds the saddle vertex graph of `mesh` with the given caps.
pub fn build_svg(
    mesh: &Mesh,
    classification: &VertexClassification,
    params: SvgParams,
) -> Result<Svg, SvgError> {
    build_svg_with(mesh, classification, params, Exec::default())
}

/// [`build_svg`] with an explicit execution mode. The result does not
/// depend on `exec`.
pub fn build_svg_with(
    mesh: &Mesh,
    classification: &VertexClassification,
    params: SvgParams,
    exec: Exec,
) -> Result<Svg, SvgError> {
    params.validate()?;
    if classification.num_vertices() != mesh.num_vertices() {
        return Err(SvgError::Malformed(format!(
            "classification covers {} vertices, mesh has {}",
            classification.num_vertices(),
            mesh.num_vertices()
        )));
    }
    let engine = ExactGeodesics::new(mesh);
    let lists = par::map_range(exec, mesh.num_vertices(), |v| {
        engine.local_direct(classification, v, params.k, params.k_saddle)
    });

    let mut pairs: Vec<(u32, u32, f64)> = Vec::with_capacity(lists.iter().map(|l| l.entries.len()).sum());
    for list in &lists {
        let u = list.source as u32;
        for e in &list.entries {
            let v = e.vertex as u32;
            pairs.push((u.min(v), u.max(v), e.distance));
        }
    }
    Ok(Svg::from_undirected(mesh.num_vertices(), classification.clone(), params, pairs))
}

impl Svg {
    /// Builds the graph from undirected edges. Duplicate pairs keep the
    /// smaller weight.
    fn from_undirected(
        n: usize,
        classification: VertexClassification,
        params: SvgParams,
        mut pairs: Vec<(u32, u32, f64)>,
    ) -> Svg {
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        pairs.dedup_by(|next, kept| next.0 == kept.0 && next.1 == kept.1);

        let mut degree = vec![0u64; n + 1];
        for &(a, b, _) in &pairs {
            degree[a as usize + 1] += 1;
            degree[b as usize + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill: Vec<u64> = offsets[..n].to_vec();
        let total = offsets[n] as usize;
        let mut neighbors = vec![0u32; total];
        let mut weights = vec![0f64; total];
        for &(a, b, w) in &pairs {
            for (from, to) in [(a, b), (b, a)] {
                let slot = fill[from as usize] as usize;
                neighbors[slot] = to;
                weights[slot] = w;
                fill[from as usize] += 1;
            }
        }
        let mut row: Vec<(u32, f64)> = Vec::new();
        for v in 0..n {
            // Reverse edges arrive interleaved with forward ones.
            let (lo, hi) = (offsets[v] as usize, offsets[v + 1] as usize);
            row.clear();
            row.extend(neighbors[lo..hi].iter().copied().zip(weights[lo..hi].iter().copied()));
            row.sort_by_key(|&(x, _)| x);
            for (i, &(x, w)) in row.iter().enumerate() {
                neighbors[lo + i] = x;
                weights[lo + i] = w;
            }
        }
        Svg {
            params,
            classification,
            offsets,
            neighbors,
            weights,
        }
    }

    /// Reassembles a graph from its CSR arrays, checking structure.
    pub fn from_csr(
        classification: VertexClassification,
        params: SvgParams,
        offsets: Vec<u64>,
        neighbors: Vec<u32>,
        weights: Vec<f64>,
    ) -> Result<Svg, SvgError> {
        params.validate()?;
        let n = classification.num_vertices();
        if offsets.len() != n + 1 || offsets[0] != 0 {
            return Err(SvgError::Malformed("offset array has the wrong length".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(SvgError::Malformed("offsets are not monotone".into()));
        }
        let total = offsets[n] as usize;
        if neighbors.len() != total || weights.len() != total {
            return Err(SvgError::Malformed("adjacency length does not match offsets".into()));
        }
        for v in 0..n {
            let row = &neighbors[offsets[v] as usize..offsets[v + 1] as usize];
            if row.iter().any(|&x| x as usize >= n || x as usize == v) {
                return Err(SvgError::Malformed(format!("row {v} has an invalid neighbor")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SvgError::Malformed(format!("row {v} is not strictly sorted")));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(SvgError::Malformed("non-positive or non-finite weight".into()));
        }
        let svg = Svg {
            params,
            classification,
            offsets,
            neighbors,
            weights,
        };
        for v in 0..n {
            let (row, ws) = svg.row(v);
            for (&x, &w) in row.iter().zip(ws) {
                if svg.edge_weight(x as usize, v) != Some(w) {
                    return Err(SvgError::Malformed(format!("edge ({v}, {x}) is not symmetric")));
                }
            }
        }
        Ok(svg)
    }

    pub fn params(&self) -> SvgParams {
        self.params
    }

    pub fn classification(&self) -> &VertexClassification {
        &self.classification
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn weight_array(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Sorted neighbor indices of `v` and the matching weights.
    ///
    /// # Panics
    /// If `v` is out of range.
    #[inline]
    pub fn row(&self, v: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.offsets[v] as usize, self.offsets[v + 1] as usize);
        (&self.neighbors[lo..hi], &self.weights[lo..hi])
    }

    pub fn tier(&self, u: usize, v: usize) -> Tier {
        match (self.classification.is_saddle(u), self.classification.is_saddle(v)) {
            (true, true) => Tier::SS,
            (false, false) => Tier::NN,
            _ => Tier::NS,
        }
    }

    pub fn neighbors(&self, v: usize) -> Result<Vec<SvgNeighbor>, SvgError> {
        self.check_vertex(v)?;
        let (row, ws) = self.row(v);
        Ok(row
            .iter()
            .zip(ws)
            .map(|(&x, &weight)| SvgNeighbor {
                vertex: x as usize,
                weight,
                tier: self.tier(v, x as usize),
            })
            .collect())
    }

    /// Weight of edge `(u, v)`, if present. Out-of-range indices yield
    /// `None`.
    #[inline]
    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        if u >= self.num_vertices() || v >= self.num_vertices() {
            return None;
        }
        let (row, ws) = self.row(u);
        row.binary_search(&(v as u32)).ok().map(|i| ws[i])
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), SvgError> {
        if v < self.num_vertices() {
            Ok(())
        } else {
            Err(SvgError::InvalidVertex {
                index: v,
                count: self.num_vertices(),
            })
        }
    }

    /// Graph distances from `source` to every vertex.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>, SvgError> {
        self.check_vertex(source)?;
        Ok(self.dijkstra(source, None))
    }

    /// Graph shortest-path length from `u` to `v`, stopping once `v` is
    /// settled. `None` when `v` is unreachable.
    pub fn shortest_path(&self, u: usize, v: usize) -> Result<Option<f64>, SvgError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let d = self.dijkstra(u, Some(v))[v];
        Ok(d.is_finite().then_some(d))
    }

    fn dijkstra(&self, source: usize, target: Option<usize>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.num_vertices()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem(0.0, source as u32));
        while let Some(HeapItem(d, u)) = heap.pop() {
            let u = u as usize;
            if d > dist[u] {
                continue;
            }
            if Some(u) == target {
                break;
            }
            let (row, ws) = self.row(u);
            for (&x, &w) in row.iter().zip(ws) {
                let nd = d + w;
                if nd < dist[x as usize] {
                    dist[x as usize] = nd;
                    heap.push(HeapItem(nd, x));
                }
            }
        }
        dist
    }
}

/// Min-heap entry ordered by distance, then vertex.
#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

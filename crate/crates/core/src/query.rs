//! Distance queries between arbitrary vertex pairs.
//!
//! Saddle pairs read the embedding. Pairs with a non-saddle endpoint try,
//! in order: an SVG edge, a common SVG neighbor, a relay through the
//! saddle neighbors of each non-saddle endpoint (joined by the embedding),
//! and finally Dijkstra on the whole SVG.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::mesh::{Mesh, VertexClassification};
use crate::svg::Svg;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("vertex {index} out of range (mesh has {count} vertices)")]
    InvalidVertex { index: usize, count: usize },
    #[error("vertex {vertex} is {actual}, expected {expected}")]
    WrongClass {
        vertex: usize,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("inconsistent query context: {0}")]
    Mismatch(String),
}

/// How a query was answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryCase {
    /// `u = v`.
    Identical,
    /// Both endpoints are saddles; embedding lookup.
    SaddlePair,
    /// SVG edge between the endpoints.
    Direct,
    /// Shortest two-edge path through a common SVG neighbor.
    Near,
    /// Relay through saddle neighbors and the embedding.
    Far,
    /// Dijkstra on the whole SVG.
    Fallback,
}

impl QueryCase {
    pub const ALL: [QueryCase; 6] = [
        QueryCase::Identical,
        QueryCase::SaddlePair,
        QueryCase::Direct,
        QueryCase::Near,
        QueryCase::Far,
        QueryCase::Fallback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryCase::Identical => "identical",
            QueryCase::SaddlePair => "saddle_pair",
            QueryCase::Direct => "direct",
            QueryCase::Near => "near",
            QueryCase::Far => "far",
            QueryCase::Fallback => "fallback",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryResult {
    pub distance: f64,
    pub case: QueryCase,
    /// Some embedding value fell below the Euclidean chord and was raised
    /// to it.
    pub clamped: bool,
}

/// Running counts over many queries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub identical: u64,
    pub saddle_pair: u64,
    pub direct: u64,
    pub near: u64,
    pub far: u64,
    pub fallback: u64,
    pub clamped: u64,
}

impl QueryStats {
    pub fn record(&mut self, r: &QueryResult) {
        *self.slot(r.case) += 1;
        self.clamped += r.clamped as u64;
    }

    pub fn count(&self, case: QueryCase) -> u64 {
        match case {
            QueryCase::Identical => self.identical,
            QueryCase::SaddlePair => self.saddle_pair,
            QueryCase::Direct => self.direct,
            QueryCase::Near => self.near,
            QueryCase::Far => self.far,
            QueryCase::Fallback => self.fallback,
        }
    }

    fn slot(&mut self, case: QueryCase) -> &mut u64 {
        match case {
            QueryCase::Identical => &mut self.identical,
            QueryCase::SaddlePair => &mut self.saddle_pair,
            QueryCase::Direct => &mut self.direct,
            QueryCase::Near => &mut self.near,
            QueryCase::Far => &mut self.far,
            QueryCase::Fallback => &mut self.fallback,
        }
    }

    pub fn total(&self) -> u64 {
        QueryCase::ALL.iter().map(|&c| self.count(c)).sum()
    }

    /// How many of direct / near / far / fallback occurred at least once.
    pub fn graph_cases_exercised(&self) -> usize {
        [self.direct, self.near, self.far, self.fallback]
            .iter()
            .filter(|&&c| c > 0)
            .count()
    }
}

/// Read-only bundle used to answer queries.
#[derive(Clone, Copy, Debug)]
pub struct QueryContext<'a> {
    mesh: &'a Mesh,
    svg: &'a Svg,
    embedding: &'a Embedding,
}

impl<'a> QueryContext<'a> {
    pub fn new(mesh: &'a Mesh, svg: &'a Svg, embedding: &'a Embedding) -> Result<Self, QueryError> {
        if svg.num_vertices() != mesh.num_vertices() {
            return Err(QueryError::Mismatch(format!(
                "graph has {} vertices, mesh has {}",
                svg.num_vertices(),
                mesh.num_vertices()
            )));
        }
        if embedding.saddles() != svg.classification().saddles() {
            return Err(QueryError::Mismatch(format!(
                "embedding has {} rows for {} saddles",
                embedding.len(),
                svg.classification().num_saddles()
            )));
        }
        Ok(QueryContext { mesh, svg, embedding })
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn svg(&self) -> &'a Svg {
        self.svg
    }

    pub fn embedding(&self) -> &'a Embedding {
        self.embedding
    }

    pub fn classification(&self) -> &'a VertexClassification {
        self.svg.classification()
    }

    fn check(&self, v: usize) -> Result<(), QueryError> {
        if v < self.mesh.num_vertices() {
            Ok(())
        } else {
            Err(QueryError::InvalidVertex {
                index: v,
                count: self.mesh.num_vertices(),
            })
        }
    }

    fn class_name(&self, v: usize) -> &'static str {
        if self.classification().is_saddle(v) {
            "a saddle"
        } else {
            "a non-saddle"
        }
    }

    fn expect(&self, v: usize, saddle: bool) -> Result<(), QueryError> {
        self.check(v)?;
        if self.classification().is_saddle(v) == saddle {
            Ok(())
        } else {
            Err(QueryError::WrongClass {
                vertex: v,
                expected: if saddle { "a saddle" } else { "a non-saddle" },
                actual: self.class_name(v),
            })
        }
    }

    /// Distance between any two vertices.
    pub fn query_distance(&self, u: usize, v: usize) -> Result<f64, QueryError> {
        Ok(self.query(u, v)?.distance)
    }

    /// Distance with the case that produced it.
    pub fn query(&self, u: usize, v: usize) -> Result<QueryResult, QueryError> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.query_unchecked(u, v))
    }

    fn query_unchecked(&self, u: usize, v: usize) -> QueryResult {
        if u == v {
            return QueryResult {
                distance: 0.0,
                case: QueryCase::Identical,
                clamped: false,
            };
        }
        let class = self.classification();
        match (class.is_saddle(u), class.is_saddle(v)) {
            (true, true) => self.ss(u.min(v), u.max(v)),
            (false, false) => self.nn(u.min(v), u.max(v)),
            (false, true) => self.ns(u, v),
            (true, false) => self.ns(v, u),
        }
    }

    /// Both endpoints saddles.
    pub fn ss_distance(&self, s: usize, t: usize) -> Result<f64, QueryError> {
        self.expect(s, true)?;
        self.expect(t, true)?;
        if s == t {
            return Ok(0.0);
        }
        Ok(self.ss(s.min(t), s.max(t)).distance)
    }

    /// Both endpoints non-saddles.
    pub fn nn_distance(&self, u: usize, v: usize) -> Result<f64, QueryError> {
        self.expect(u, false)?;
        self.expect(v, false)?;
        if u == v {
            return Ok(0.0);
        }
        Ok(self.nn(u.min(v), u.max(v)).distance)
    }

    /// `u` a non-saddle, `s` a saddle.
    pub fn ns_distance(&self, u: usize, s: usize) -> Result<f64, QueryError> {
        self.expect(u, false)?;
        self.expect(s, true)?;
        Ok(self.ns(u, s).distance)
    }

    #[inline]
    fn chord(&self, u: usize, v: usize) -> f64 {
        self.mesh.distance(u, v)
    }

    /// Embedding value for a saddle pair, raised to the chord if below it.
    #[inline]
    fn embedded(&self, s: usize, t: usize) -> (f64, bool) {
        if s == t {
            return (0.0, false);
        }
        let class = self.classification();
        let (i, j) = (class.saddle_rank(s).unwrap(), class.saddle_rank(t).unwrap());
        let f = self.embedding.distance(i, j);
        let chord = self.chord(s, t);
        if f < chord {
            (chord, true)
        } else {
            (f, false)
        }
    }

    fn ss(&self, s: usize, t: usize) -> QueryResult {
        let (distance, clamped) = self.embedded(s, t);
        QueryResult {
            distance,
            case: QueryCase::SaddlePair,
            clamped,
        }
    }

    fn direct_or_near(&self, u: usize, v: usize) -> Option<QueryResult> {
        if let Some(w) = self.svg.edge_weight(u, v) {
            return Some(QueryResult {
                distance: w,
                case: QueryCase::Direct,
                clamped: false,
            });
        }
        let ((nu, wu), (nv, wv)) = (self.svg.row(u), self.svg.row(v));
        let (mut a, mut b) = (0, 0);
        let mut best = f64::INFINITY;
        while a < nu.len() && b < nv.len() {
            match nu[a].cmp(&nv[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    best = best.min(wu[a] + wv[b]);
                    a += 1;
                    b += 1;
                }
            }
        }
        best.is_finite().then_some(QueryResult {
            distance: best,
            case: QueryCase::Near,
            clamped: false,
        })
    }

    fn saddle_neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (nbrs, ws) = self.svg.row(u);
        let class = self.classification();
        nbrs.iter()
            .zip(ws)
            .filter(move |(&x, _)| class.is_saddle(x as usize))
            .map(|(&x, &w)| (x as usize, w))
    }

    fn fallback(&self, u: usize, v: usize) -> QueryResult {
        let distance = self
            .svg
            .shortest_path(u, v)
            .expect("indices checked")
            .unwrap_or(f64::INFINITY);
        QueryResult {
            distance,
            case: QueryCase::Fallback,
            clamped: false,
        }
    }

    /// Finishes an embedding-based answer: clamp to the chord of the
    /// endpoints.
    fn far(&self, u: usize, v: usize, best: f64, clamped: bool) -> QueryResult {
        let chord = self.chord(u, v);
        let (distance, raised) = if best < chord { (chord, true) } else { (best, false) };
        QueryResult {
            distance,
            case: QueryCase::Far,
            clamped: clamped || raised,
        }
    }

    fn nn(&self, u: usize, v: usize) -> QueryResult {
        if let Some(r) = self.direct_or_near(u, v) {
            return r;
        }
        let sv: Vec<(usize, f64)> = self.saddle_neighbors(v).collect();
        let mut best = f64::INFINITY;
        let mut best_clamped = false;
        let mut any = false;
        for (s, ws) in self.saddle_neighbors(u) {
            any = true;
            for &(t, wt) in &sv {
                let (f, c) = self.embedded(s, t);
                let total = ws + f + wt;
                if total < best {
                    best = total;
                    best_clamped = c;
                }
            }
        }
        if !any || sv.is_empty() {
            return self.fallback(u, v);
        }
        self.far(u, v, best, best_clamped)
    }

    fn ns(&self, u: usize, s: usize) -> QueryResult {
        if let Some(r) = self.direct_or_near(u, s) {
            return r;
        }
        let mut best = f64::INFINITY;
        let mut best_clamped = false;
        let mut any = false;
        for (t, wt) in self.saddle_neighbors(u) {
            any = true;
            let (f, c) = self.embedded(t, s);
            let total = wt + f;
            if total < best {
                best = total;
                best_clamped = c;
            }
        }
        if !any {
            return self.fallback(u, s);
        }
        self.far(u, s, best, best_clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::svg::SvgParams;

    /// Flat 3×3-vertex grid with spacing 0.01 (chords far below the fixture
    /// weights), saddle flags at `saddles`, and the given SVG edges.
    struct Fixture {
        mesh: Mesh,
        svg: Svg,
        emb: Embedding,
    }

    fn fixture(saddles: &[usize], edges: &[(usize, usize, f64)], q: &[f64]) -> Fixture {
        let mesh = shapes::flat_grid(2, 2, 0.01);
        let n = mesh.num_vertices();
        let mut flags = vec![false; n];
        for &s in saddles {
            flags[s] = true;
        }
        let class = VertexClassification::from_flags(&flags);
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            rows[a].push((b as u32, w));
            rows[b].push((a as u32, w));
        }
        let mut offsets = vec![0u64];
        let (mut nbrs, mut ws) = (Vec::new(), Vec::new());
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            for &(x, w) in row.iter() {
                nbrs.push(x);
                ws.push(w);
            }
            offsets.push(nbrs.len() as u64);
        }
        let svg = Svg::from_csr(class.clone(), SvgParams::default(), offsets, nbrs, ws).unwrap();
        let emb = Embedding::from_parts(1, 0, class.saddles().to_vec(), q.to_vec(), vec![], vec![], vec![0.0], vec![0.0])
            .unwrap();
        Fixture { mesh, svg, emb }
    }

    impl Fixture {
        fn ctx(&self) -> QueryContext<'_> {
            QueryContext::new(&self.mesh, &self.svg, &self.emb).unwrap()
        }
    }

    #[test]
    fn direct_edge_returns_weight_exactly() {
        let f = fixture(&[], &[(0, 1, 1.7)], &[]);
        let r = f.ctx().query(0, 1).unwrap();
        assert_eq!(r.distance, 1.7);
        assert_eq!(r.case, QueryCase::Direct);
        assert_eq!(f.ctx().nn_distance(1, 0).unwrap(), 1.7);
    }

    #[test]
    fn common_neighbor_takes_shortest_relay() {
        let f = fixture(&[], &[(0, 2, 1.0), (2, 4, 2.0), (0, 3, 5.0), (3, 4, 0.5)], &[]);
        let r = f.ctx().query(0, 4).unwrap();
        assert_eq!(r.distance, 3.0);
        assert_eq!(r.case, QueryCase::Near);
    }

    #[test]
    fn far_nn_pair_goes_through_embedding() {
        // Saddles 2 and 5 (rows 0 and 1) embedded 2 apart.
        let f = fixture(&[2, 5], &[(0, 2, 1.0), (5, 7, 1.0)], &[0.0, 2.0]);
        let ctx = f.ctx();
        let r = ctx.query(0, 7).unwrap();
        assert_eq!(r.distance, 4.0);
        assert_eq!(r.case, QueryCase::Far);
        assert!(!r.clamped);
        assert_eq!(ctx.query(7, 0).unwrap(), r);
    }

    #[test]
    fn far_ns_pair_goes_through_embedding() {
        let f = fixture(&[2, 5], &[(0, 2, 1.0)], &[0.0, 3.0]);
        let ctx = f.ctx();
        assert_eq!(ctx.ns_distance(0, 5).unwrap(), 4.0);
        assert_eq!(ctx.query_distance(5, 0).unwrap(), 4.0);
        assert_eq!(ctx.ss_distance(2, 5).unwrap(), 3.0);
        assert_eq!(ctx.ss_distance(5, 5).unwrap(), 0.0);
    }

    #[test]
    fn no_saddle_neighbor_falls_back_to_dijkstra() {
        let f = fixture(&[], &[(0, 1, 1.0), (1, 3, 1.0), (3, 8, 1.0)], &[]);
        let r = f.ctx().query(8, 0).unwrap();
        assert_eq!(r.distance, 3.0);
        assert_eq!(r.case, QueryCase::Fallback);
        let r = f.ctx().query(0, 6).unwrap();
        assert!(r.distance.is_infinite());
    }

    #[test]
    fn negative_embedding_value_is_clamped_to_chord() {
        let mesh = shapes::flat_grid(2, 2, 0.01);
        let class = VertexClassification::from_flags(&[false, false, true, false, false, true, false, false, false]);
        let svg = Svg::from_csr(class.clone(), SvgParams::default(), vec![0; 10], vec![], vec![]).unwrap();
        // f = |0| − (1 − 0)² = −1.
        let emb = Embedding::from_parts(
            1,
            1,
            class.saddles().to_vec(),
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(emb.distance(0, 1), -1.0);
        let ctx = QueryContext::new(&mesh, &svg, &emb).unwrap();
        let r = ctx.query(2, 5).unwrap();
        assert!(r.clamped);
        assert_eq!(r.distance, mesh.distance(2, 5));
        let mut stats = QueryStats::default();
        stats.record(&r);
        assert_eq!(stats.clamped, 1);
        assert_eq!(stats.saddle_pair, 1);
    }

    #[test]
    fn identical_and_invalid_inputs() {
        let f = fixture(&[2], &[], &[0.0]);
        let ctx = f.ctx();
        assert_eq!(ctx.query_distance(4, 4).unwrap(), 0.0);
        assert_eq!(ctx.query_distance(2, 2).unwrap(), 0.0);
        assert!(matches!(ctx.query(0, 99), Err(QueryError::InvalidVertex { index: 99, .. })));
        assert!(matches!(ctx.ss_distance(0, 2), Err(QueryError::WrongClass { vertex: 0, .. })));
        assert!(matches!(ctx.nn_distance(2, 0), Err(QueryError::WrongClass { vertex: 2, .. })));
        assert!(ctx.ns_distance(2, 0).is_err());
    }

    #[test]
    fn mismatched_context_is_rejected() {
        let f = fixture(&[2], &[], &[0.0]);
        let other = fixture(&[3], &[], &[0.0]);
        assert!(matches!(
            QueryContext::new(&f.mesh, &f.svg, &other.emb),
            Err(QueryError::Mismatch(_))
        ));
        let small = shapes::icosahedron();
        assert!(QueryContext::new(&small, &f.svg, &f.emb).is_err());
    }
}

//! Single-source geodesic distances on triangle meshes.
//!
//! [`ssad_exact`] is the exact window-propagation oracle used for ground
//! truth and for SVG construction (via [`local_direct_geodesics`]).
//! [`ssad_reference`] is an independent Steiner-point graph bound used
//! only to cross-check the exact oracle.

mod exact;
mod reference;

use std::fmt::Write as _;

pub use exact::{ExactGeodesics, PropagationStats, WINDOW_TOLERANCE};

use crate::mesh::{Mesh, MeshError, VertexClassification};

/// Per-vertex geodesic distances from one source vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub source: usize,
    pub distances: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, v: usize) -> f64 {
        self.distances[v]
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// One `index distance` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.distances.len() * 24);
        for (i, d) in self.distances.iter().enumerate() {
            let _ = writeln!(out, "{i} {d}");
        }
        out
    }
}

/// A vertex reached from the source by a geodesic that passes through no
/// relay vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectNeighbor {
    pub vertex: usize,
    pub distance: f64,
    pub is_saddle: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectNeighborList {
    pub source: usize,
    /// Sorted by ascending distance.
    pub entries: Vec<DirectNeighbor>,
}

impl DirectNeighborList {
    pub fn saddle_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_saddle).count()
    }
}

/// Exact polyhedral geodesic distances from `source` to all vertices.
pub fn ssad_exact(mesh: &Mesh, source: usize) -> Result<DistanceField, MeshError> {
    mesh.check_vertex(source)?;
    Ok(ExactGeodesics::new(mesh).ssad(source))
}

/// Direct geodesic neighbors of `source`, found by local propagation that
/// stops after `k` direct neighbors or `k_saddle` direct saddle neighbors.
pub fn local_direct_geodesics(
    mesh: &Mesh,
    classification: &VertexClassification,
    source: usize,
    k: usize,
    k_saddle: usize,
) -> Result<DirectNeighborList, MeshError> {
    mesh.check_vertex(source)?;
    Ok(ExactGeodesics::new(mesh).local_direct(classification, source, k, k_saddle))
}

/// Upper-bound distances from a Steiner-point graph with `splits` points
/// per edge. `splits = 0` is plain Dijkstra over mesh edges.
pub fn ssad_reference(
    mesh: &Mesh,
    source: usize,
    splits: usize,
) -> Result<DistanceField, MeshError> {
    mesh.check_vertex(source)?;
    Ok(DistanceField {
        source,
        distances: reference::steiner_distances(mesh, source, splits),
    })
}

impl ExactGeodesics<'_> {
    pub fn ssad(&self, source: usize) -> DistanceField {
        let (distances, _) = self.distances(source);
        DistanceField { source, distances }
    }

    pub fn local_direct(
        &self,
        classification: &VertexClassification,
        source: usize,
        k: usize,
        k_saddle: usize,
    ) -> DirectNeighborList {
        let mut entries = Vec::with_capacity(k);
        let mut saddles = 0usize;
        let cap_saddle = k_saddle.max(1);
        let mut on_settle = |v: usize, d: f64, root: usize| {
            if v == source || root != source {
                return true;
            }
            let is_saddle = classification.is_saddle(v);
            entries.push(DirectNeighbor {
                vertex: v,
                distance: d,
                is_saddle,
            });
            saddles += usize::from(is_saddle);
            entries.len() < k && saddles < cap_saddle
        };
        if k > 0 {
            self.run(source, &mut on_settle, true);
        }
        DirectNeighborList { source, entries }
    }
}

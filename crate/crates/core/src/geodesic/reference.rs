//! Steiner-point graph distances: an independent upper bound on the exact
//! geodesic, converging from above as the per-edge point count grows.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::mesh::{norm, sub, Mesh};

/// Dijkstra over mesh vertices plus `splits` evenly spaced points per
/// edge, with every pair of points on a common face connected by a
/// straight segment.
pub(crate) fn steiner_distances(mesh: &Mesh, source: usize, splits: usize) -> Vec<f64> {
    let n = mesh.num_vertices();
    let node_count = n + mesh.num_edges() * splits;
    let position = |node: usize| -> [f64; 3] {
        if node < n {
            return mesh.position(node);
        }
        let k = node - n;
        let (e, i) = (k / splits, k % splits);
        let edge = mesh.edge(e);
        let a = mesh.position(edge.vertices[0] as usize);
        let b = mesh.position(edge.vertices[1] as usize);
        let t = (i + 1) as f64 / (splits + 1) as f64;
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    };
    let positions: Vec<[f64; 3]> = (0..node_count).map(position).collect();

    // Node -> incident faces, so each face's point set is built on demand.
    let face_nodes = |f: usize, out: &mut Vec<usize>| {
        out.clear();
        out.extend(mesh.face(f));
        for e in mesh.face_edges(f) {
            let base = n + e as usize * splits;
            out.extend(base..base + splits);
        }
    };
    let node_faces = |node: usize, out: &mut Vec<usize>| {
        out.clear();
        if node < n {
            out.extend(mesh.vertex_faces(node).iter().map(|&f| f as usize));
        } else {
            let e = (node - n) / splits;
            out.extend(mesh.edge(e).faces.iter().filter(|&&f| f != u32::MAX).map(|&f| f as usize));
        }
    };

    let mut dist = vec![f64::INFINITY; node_count];
    let mut done = vec![false; node_count];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push((Reverse(OrdF64(0.0)), source));
    let (mut faces, mut nodes) = (Vec::new(), Vec::new());
    while let Some((Reverse(OrdF64(d)), u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        node_faces(u, &mut faces);
        for &f in &faces {
            face_nodes(f, &mut nodes);
            for &w in &nodes {
                if done[w] {
                    continue;
                }
                let nd = d + norm(sub(positions[u], positions[w]));
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push((Reverse(OrdF64(nd)), w));
                }
            }
        }
    }
    dist.truncate(n);
    dist
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

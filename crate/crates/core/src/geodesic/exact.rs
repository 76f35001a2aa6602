//! Exact polyhedral geodesics by window propagation.
//!
//! A window is an interval of a mesh edge lit by straight (unfolded) rays
//! from a single root vertex: either the source or a relay vertex
//! (saddle, or reflex boundary corner) through which geodesics may bend.
//! Windows are processed in order of their nearest point, so vertex
//! distances are final once their settle event is popped. Redundant
//! windows are discarded when one of the three vertices of the face they
//! were lit through already offers a shorter path to every point of the
//! window.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::mesh::{Mesh, SADDLE_ANGLE_TOLERANCE};

/// Relative (to mesh scale) slack used for interval degeneracy and for
/// deciding that a vertex strictly dominates a window.
pub const WINDOW_TOLERANCE: f64 = 1e-12;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Window {
    edge: u32,
    /// Face the window propagates into.
    face: u32,
    /// Edge endpoint placed at the local origin; the other endpoint sits
    /// at `(len, 0)` and the unpropagated face at `y > 0`.
    origin: u32,
    b0: f64,
    b1: f64,
    src: [f64; 2],
    sigma: f64,
    root: u32,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Settle(u32),
    Window(Window),
}

struct Queued {
    key: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Min-heap on (key, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Counters from one propagation run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub windows_created: u64,
    pub windows_pruned: u64,
    pub windows_processed: u64,
}

/// Final distances and counters of a propagation run.
pub(crate) struct Propagation {
    pub dist: Vec<f64>,
    pub stats: PropagationStats,
}

/// Window-propagation engine bound to one mesh. Cheap to share across
/// threads; each run allocates its own state.
pub struct ExactGeodesics<'m> {
    mesh: &'m Mesh,
    relay: Vec<bool>,
    tol: f64,
}

impl<'m> ExactGeodesics<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let relay = (0..mesh.num_vertices())
            .map(|v| {
                let angle = mesh.angle_sum_unchecked(v);
                if mesh.is_boundary_vertex(v) {
                    angle > PI + SADDLE_ANGLE_TOLERANCE
                } else {
                    angle > 2.0 * PI + SADDLE_ANGLE_TOLERANCE
                }
            })
            .collect();
        ExactGeodesics {
            mesh,
            relay,
            tol: WINDOW_TOLERANCE * mesh.scale(),
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    /// Whether geodesics may pass through `v` (it acts as a pseudosource).
    pub fn is_relay(&self, v: usize) -> bool {
        self.relay[v]
    }

    /// Distances from `source` to every vertex.
    pub fn distances(&self, source: usize) -> (Vec<f64>, PropagationStats) {
        let run = self.run(source, &mut |_, _, _| true, false);
        (run.dist, run.stats)
    }

    /// Runs propagation, reporting each vertex as it is settled with
    /// `(vertex, distance, root)`. Stops early when `on_settle` returns
    /// `false`.
    pub(crate) fn run(
        &self,
        source: usize,
        on_settle: &mut dyn FnMut(usize, f64, usize) -> bool,
        settle_all: bool,
    ) -> Propagation {
        let mut state = State {
            engine: self,
            dist: vec![f64::INFINITY; self.mesh.num_vertices()],
            root: vec![NONE; self.mesh.num_vertices()],
            settled: vec![false; self.mesh.num_vertices()],
            angle_best: vec![(f64::INFINITY, 0.0); 3 * self.mesh.num_faces()],
            heap: BinaryHeap::new(),
            seq: 0,
            settle_all,
            stats: PropagationStats::default(),
        };
        state.dist[source] = 0.0;
        state.root[source] = source as u32;
        state.push(0.0, Event::Settle(source as u32));

        while let Some(item) = state.heap.pop() {
            match item.event {
                Event::Settle(v) => {
                    let v = v as usize;
                    if state.settled[v] || item.key > state.dist[v] {
                        continue;
                    }
                    state.settled[v] = true;
                    if !on_settle(v, state.dist[v], state.root[v] as usize) {
                        break;
                    }
                    if v == source || self.relay[v] {
                        state.emit_from_vertex(v);
                    }
                }
                Event::Window(w) => {
                    state.stats.windows_processed += 1;
                    state.propagate(&w);
                }
            }
        }
        Propagation {
            dist: state.dist,
            stats: state.stats,
        }
    }
}

struct State<'a, 'm> {
    engine: &'a ExactGeodesics<'m>,
    dist: Vec<f64>,
    root: Vec<u32>,
    settled: Vec<bool>,
    /// Per face corner: shortest distance to the corner vertex found by a
    /// window crossing the opposite edge, and where that path crossed it
    /// (measured from the corner's successor vertex).
    angle_best: Vec<(f64, f64)>,
    heap: BinaryHeap<Queued>,
    seq: u64,
    settle_all: bool,
    stats: PropagationStats,
}

impl State<'_, '_> {
    fn push(&mut self, key: f64, event: Event) {
        self.heap.push(Queued {
            key,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    fn update_vertex(&mut self, v: usize, d: f64, root: u32) {
        if d < self.dist[v] && !self.settled[v] {
            self.dist[v] = d;
            self.root[v] = root;
            if self.settle_all || self.engine.relay[v] {
                self.push(d, Event::Settle(v as u32));
            }
        }
    }

    /// Lights the edge opposite `v` in every incident face.
    fn emit_from_vertex(&mut self, v: usize) {
        let mesh = self.engine.mesh;
        let dv = self.dist[v];
        for &f in mesh.vertex_faces(v) {
            let f = f as usize;
            let tri = mesh.face(f);
            let corner = tri.iter().position(|&x| x == v).expect("incident face");
            let o = tri[(corner + 1) % 3];
            let d = tri[(corner + 2) % 3];
            let e = mesh.face_edge(f, corner);
            let len = mesh.edge(e).length;
            let ov = mesh.edge(mesh.face_edge(f, (corner + 2) % 3)).length;
            let dvl = mesh.edge(mesh.face_edge(f, (corner + 1) % 3)).length;
            self.update_vertex(o, dv + ov, v as u32);
            self.update_vertex(d, dv + dvl, v as u32);
            let Some(next) = mesh.edge(e).other_face(f as u32) else {
                continue;
            };
            let [x, y] = apex(len, ov, dvl);
            let w = Window {
                edge: e as u32,
                face: next,
                origin: o as u32,
                b0: 0.0,
                b1: len,
                src: [x, -y],
                sigma: dv,
                root: v as u32,
            };
            let key = w.sigma + min_dist_to_interval(w.src, w.b0, w.b1);
            self.stats.windows_created += 1;
            self.push(key, Event::Window(w));
        }
    }

    /// Whether an edge endpoint offers a shorter path to every point of
    /// the interval `[u0, u1]` (endpoint distances `ends`).
    fn dominated(&self, src: [f64; 2], sigma: f64, u0: f64, u1: f64, len: f64, ends: [f64; 2]) -> bool {
        let tol = self.engine.tol;
        let path = |t: f64| sigma + dist2(src, [t, 0.0]);
        ends[0] + u1 < path(u1) - tol || ends[1] + (len - u0) < path(u0) - tol
    }

    /// Whether a vertex at local position `t` with known distance `dt`
    /// offers a shorter path to every point of `[u0, u1]`.
    #[allow(clippy::too_many_arguments)]
    fn dominated_by(&self, src: [f64; 2], sigma: f64, u0: f64, u1: f64, len: f64, dt: f64, t: [f64; 2]) -> bool {
        if !dt.is_finite() {
            return false;
        }
        let path = |x: f64| sigma + dist2(src, [x, 0.0]);
        let via = |x: f64| dt + dist2(t, [x, 0.0]);
        let mut margin = (path(u0) - via(u0)).min(path(u1) - via(u1));
        let (sy, ty) = (src[1].abs(), t[1].abs());
        if (ty - sy).abs() > 1e-15 * len {
            // Interior extremum of the difference of the two distances.
            let crit = (src[0] * ty - t[0] * sy) / (ty - sy);
            if crit > u0 && crit < u1 {
                margin = margin.min(path(crit) - via(crit));
            }
        }
        margin > self.engine.tol
    }

    fn propagate(&mut self, w: &Window) {
        let mesh = self.engine.mesh;
        let tol = self.engine.tol;
        let f = w.face as usize;
        let e = w.edge as usize;
        let tri = mesh.face(f);
        let fe = mesh.face_edges(f);
        let corner = fe.iter().position(|&x| x as usize == e).expect("edge in face");
        let c = tri[corner];
        let o = w.origin as usize;
        let (oc_edge, cd_edge) = if tri[(corner + 1) % 3] == o {
            (fe[(corner + 2) % 3] as usize, fe[(corner + 1) % 3] as usize)
        } else {
            (fe[(corner + 1) % 3] as usize, fe[(corner + 2) % 3] as usize)
        };
        let d = other_vertex(mesh, e, o);
        let len = mesh.edge(e).length;
        let len_oc = mesh.edge(oc_edge).length;
        let len_cd = mesh.edge(cd_edge).length;
        let cpos = apex(len, len_oc, len_cd);
        let s = w.src;

        if w.b0 <= tol {
            self.update_vertex(o, w.sigma + norm2(s), w.root);
        }
        if w.b1 >= len - tol {
            self.update_vertex(d, w.sigma + dist2(s, [len, 0.0]), w.root);
        }

        // Where the ray from the source through the apex crosses the edge.
        let tc = s[0] + (cpos[0] - s[0]) * (-s[1]) / (cpos[1] - s[1]);
        let to_apex = w.sigma + dist2(s, cpos);
        let angle = 3 * f + corner;
        let flipped = tri[(corner + 1) % 3] != o;
        let canon = |t: f64| if flipped { len - t } else { t };
        let (best, best_at) = self.angle_best[angle];
        let covers_apex = tc >= w.b0 - tol && tc <= w.b1 + tol;
        if covers_apex {
            self.update_vertex(c, to_apex, w.root);
            if to_apex < best {
                self.angle_best[angle] = (to_apex, canon(tc));
            }
        }

        // Rays that cross a strictly shorter path into the apex through
        // this face are dominated by it.
        let mut left_hi = w.b1.min(tc);
        let mut right_lo = w.b0.max(tc);
        if to_apex > best + tol {
            let cut = canon(best_at);
            left_hi = left_hi.min(cut);
            right_lo = right_lo.max(cut);
        }

        let opos = [0.0, 0.0];
        let dpos = [len, 0.0];
        if w.b0 < left_hi - tol {
            let hi = left_hi;
            let u0 = ray_hit(s, w.b0, opos, cpos, len_oc);
            let u1 = if hi >= tc { len_oc } else { ray_hit(s, hi, opos, cpos, len_oc) };
            self.spawn_child(w, oc_edge, f, o, c, d, opos, cpos, dpos, len_oc, u0, u1);
        }
        if w.b1 > right_lo + tol {
            let lo = right_lo;
            let u0 = if lo <= tc { 0.0 } else { ray_hit(s, lo, cpos, dpos, len_cd) };
            let u1 = ray_hit(s, w.b1, cpos, dpos, len_cd);
            self.spawn_child(w, cd_edge, f, c, d, o, cpos, dpos, opos, len_cd, u0, u1);
        }
    }

    /// Creates the child window on edge `p -> q` of face `f` (positions in
    /// the parent frame), unless it is degenerate, on the boundary, or
    /// dominated by one of the face's vertices.
    #[allow(clippy::too_many_arguments)]
    fn spawn_child(
        &mut self,
        parent: &Window,
        edge: usize,
        f: usize,
        p: usize,
        q: usize,
        third: usize,
        ppos: [f64; 2],
        qpos: [f64; 2],
        tpos: [f64; 2],
        len: f64,
        u0: f64,
        u1: f64,
    ) {
        let tol = self.engine.tol;
        let (u0, u1) = (u0.clamp(0.0, len), u1.clamp(0.0, len));
        if u1 - u0 <= tol {
            return;
        }
        let Some(next) = self.engine.mesh.edge(edge).other_face(f as u32) else {
            return;
        };
        let ex = [(qpos[0] - ppos[0]) / len, (qpos[1] - ppos[1]) / len];
        let to_local = |x: [f64; 2]| {
            let r = [x[0] - ppos[0], x[1] - ppos[1]];
            [ex[0] * r[0] + ex[1] * r[1], ex[0] * r[1] - ex[1] * r[0]]
        };
        let mut src = to_local(parent.src);
        src[1] = src[1].min(0.0);
        let sigma = parent.sigma;

        if self.dominated(src, sigma, u0, u1, len, [self.dist[p], self.dist[q]])
            || self.dominated_by(src, sigma, u0, u1, len, self.dist[third], to_local(tpos))
        {
            self.stats.windows_pruned += 1;
            return;
        }

        let w = Window {
            edge: edge as u32,
            face: next,
            origin: p as u32,
            b0: u0,
            b1: u1,
            src,
            sigma,
            root: parent.root,
        };
        let key = sigma + min_dist_to_interval(src, u0, u1);
        self.stats.windows_created += 1;
        self.push(key, Event::Window(w));
    }
}

fn other_vertex(mesh: &Mesh, e: usize, v: usize) -> usize {
    let [a, b] = mesh.edge(e).vertices;
    if a as usize == v {
        b as usize
    } else {
        a as usize
    }
}

/// Position of the third triangle vertex given the base length and the
/// two other side lengths, with the base on the x-axis from the origin
/// and the apex at `y >= 0`.
fn apex(base: f64, from_origin: f64, from_end: f64) -> [f64; 2] {
    let x = (base * base + from_origin * from_origin - from_end * from_end) / (2.0 * base);
    let y = (from_origin * from_origin - x * x).max(0.0).sqrt();
    [x, y]
}

/// Distance along `p -> q` (length `len`) where the ray from `s` through
/// `(t, 0)` meets that segment's line.
fn ray_hit(s: [f64; 2], t: f64, p: [f64; 2], q: [f64; 2], len: f64) -> f64 {
    let r = [t - s[0], -s[1]];
    let e = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
    let denom = e[0] * r[1] - e[1] * r[0];
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    let sp = [s[0] - p[0], s[1] - p[1]];
    ((sp[0] * r[1] - sp[1] * r[0]) / denom).clamp(0.0, len)
}

fn min_dist_to_interval(s: [f64; 2], b0: f64, b1: f64) -> f64 {
    let x = s[0].clamp(b0, b1);
    dist2(s, [x, 0.0])
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (x, y) = (a[0] - b[0], a[1] - b[1]);
    (x * x + y * y).sqrt()
}

#[inline]
fn norm2(a: [f64; 2]) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apex_of_unit_right_triangle() {
        let p = apex(1.0, 1.0, 2f64.sqrt());
        assert!((p[0]).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ray_hit_maps_onto_side() {
        // Source straight below the origin, ray through (0.5, 0) hits the
        // side from (0,0) to (0,2)... only at the origin; use a slanted side.
        let s = [0.5, -1.0];
        let hit = ray_hit(s, 0.5, [0.0, 1.0], [1.0, 1.0], 1.0);
        assert!((hit - 0.5).abs() < 1e-15);
    }
}

//! Indexed triangle meshes: loading, connectivity, angle sums and the
//! saddle / non-saddle vertex split.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Marker for a missing face on a boundary edge.
pub const NO_FACE: u32 = u32::MAX;

/// Angle-sum margin above 2π required before a vertex counts as a saddle.
pub const SADDLE_ANGLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format for {0} (expected .off or .obj)")]
    UnsupportedFormat(PathBuf),
    #[error("face {face} has {arity} vertices; only triangles are supported")]
    NonTriangleFace { face: usize, arity: usize },
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        count: usize,
    },
    #[error("face {0} is degenerate (repeated vertex or zero area)")]
    DegenerateFace(usize),
    #[error("edge ({0}, {1}) is shared by more than two faces")]
    NonManifoldEdge(usize, usize),
    #[error("mesh is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("mesh has no faces")]
    Empty,
    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    InvalidVertex { index: usize, count: usize },
}

impl MeshError {
    /// True for errors about mesh topology rather than file syntax or I/O.
    pub fn is_topology(&self) -> bool {
        matches!(
            self,
            MeshError::NonTriangleFace { .. }
                | MeshError::IndexOutOfRange { .. }
                | MeshError::DegenerateFace(_)
                | MeshError::NonManifoldEdge(..)
                | MeshError::Disconnected { .. }
                | MeshError::Empty
        )
    }
}

/// An undirected mesh edge with its (at most two) incident faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [u32; 2],
    pub faces: [u32; 2],
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces[1] == NO_FACE
    }

    /// The face across this edge from `face`, if any.
    pub fn other_face(&self, face: u32) -> Option<u32> {
        let other = if self.faces[0] == face {
            self.faces[1]
        } else {
            self.faces[0]
        };
        (other != NO_FACE).then_some(other)
    }
}

/// Connected, manifold triangle mesh. Immutable after construction.
#[derive(Clone)]
pub struct Mesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    edges: Vec<Edge>,
    /// `face_edges[f][i]` is the edge opposite corner `i` of face `f`.
    face_edges: Vec<[u32; 3]>,
    vertex_face_offsets: Vec<u32>,
    vertex_faces: Vec<u32>,
    vertex_edge_offsets: Vec<u32>,
    vertex_edges: Vec<u32>,
    boundary_vertex: Vec<bool>,
    scale: f64,
}

impl fmt::Debug for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mesh")
            .field("vertices", &self.positions.len())
            .field("faces", &self.faces.len())
            .field("edges", &self.edges.len())
            .finish()
    }
}

impl Mesh {
    /// Builds a mesh and its adjacency, validating indices, face
    /// non-degeneracy, edge manifoldness and connectivity.
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = positions.len();
        let mut tris = Vec::with_capacity(faces.len());
        for (fi, face) in faces.iter().enumerate() {
            for &idx in face {
                if idx >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx as i64,
                        count: n,
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::DegenerateFace(fi));
            }
            let [a, b, c] = [positions[face[0]], positions[face[1]], positions[face[2]]];
            let e0 = sub(b, a);
            let e1 = sub(c, a);
            let e2 = sub(c, b);
            let longest = dot(e0, e0).max(dot(e1, e1)).max(dot(e2, e2));
            let area2 = norm(cross(e0, e1));
            if !(area2 > 1e-12 * longest) || !area2.is_finite() {
                return Err(MeshError::DegenerateFace(fi));
            }
            tris.push([face[0] as u32, face[1] as u32, face[2] as u32]);
        }

        let mut edge_ids: HashMap<(u32, u32), u32> = HashMap::with_capacity(tris.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(tris.len() * 3 / 2 + 1);
        let mut face_edges = vec![[0u32; 3]; tris.len()];
        for (fi, tri) in tris.iter().enumerate() {
            for corner in 0..3 {
                let a = tri[(corner + 1) % 3];
                let b = tri[(corner + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    let length = norm(sub(positions[a as usize], positions[b as usize]));
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        faces: [NO_FACE, NO_FACE],
                        length,
                    });
                    (edges.len() - 1) as u32
                });
                let edge = &mut edges[id as usize];
                if edge.faces[0] == NO_FACE {
                    edge.faces[0] = fi as u32;
                } else if edge.faces[1] == NO_FACE {
                    edge.faces[1] = fi as u32;
                } else {
                    return Err(MeshError::NonManifoldEdge(key.0 as usize, key.1 as usize));
                }
                face_edges[fi][corner] = id;
            }
        }

        let (vertex_face_offsets, vertex_faces) = build_csr(
            n,
            tris.iter()
                .enumerate()
                .flat_map(|(f, t)| t.iter().map(move |&v| (v, f as u32))),
        );
        let (vertex_edge_offsets, vertex_edges) = build_csr(
            n,
            edges.iter().enumerate().flat_map(|(e, edge)| {
                edge.vertices.iter().map(move |&v| (v, e as u32))
            }),
        );

        let mut boundary_vertex = vec![false; n];
        for edge in edges.iter().filter(|e| e.is_boundary()) {
            boundary_vertex[edge.vertices[0] as usize] = true;
            boundary_vertex[edge.vertices[1] as usize] = true;
        }

        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &positions {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let scale = norm(sub(hi, lo));

        let mesh = Mesh {
            positions,
            faces: tris,
            edges,
            face_edges,
            vertex_face_offsets,
            vertex_faces,
            vertex_edge_offsets,
            vertex_edges,
            boundary_vertex,
            scale,
        };
        let components = mesh.count_components();
        if components != 1 {
            return Err(MeshError::Disconnected { components });
        }
        Ok(mesh)
    }

    /// Loads an ASCII OFF or OBJ file, dispatching on the extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("off") => Self::from_off_str(&text),
            Some("obj") => Self::from_obj_str(&text),
            _ => Err(MeshError::UnsupportedFormat(path.to_path_buf())),
        }
    }

    pub fn from_off_str(text: &str) -> Result<Self, MeshError> {
        let (positions, faces) = parse_off(text)?;
        Self::new(positions, faces)
    }

    pub fn from_obj_str(text: &str) -> Result<Self, MeshError> {
        let (positions, faces) = parse_obj(text)?;
        Self::new(positions, faces)
    }

    /// ASCII OFF serialization, full round-trip precision.
    pub fn to_off_string(&self) -> String {
        let mut out = String::with_capacity(self.positions.len() * 48 + self.faces.len() * 24);
        out.push_str("OFF\n");
        out.push_str(&format!("{} {} 0\n", self.positions.len(), self.faces.len()));
        for p in &self.positions {
            out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        for f in &self.faces {
            out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        out
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> [f64; 3] {
        self.positions[v]
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        let t = self.faces[f];
        [t[0] as usize, t[1] as usize, t[2] as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge opposite corner `corner` of face `f`.
    pub fn face_edge(&self, f: usize, corner: usize) -> usize {
        self.face_edges[f][corner] as usize
    }

    pub fn face_edges(&self, f: usize) -> [u32; 3] {
        self.face_edges[f]
    }

    pub fn vertex_faces(&self, v: usize) -> &[u32] {
        let lo = self.vertex_face_offsets[v] as usize;
        let hi = self.vertex_face_offsets[v + 1] as usize;
        &self.vertex_faces[lo..hi]
    }

    pub fn vertex_edges(&self, v: usize) -> &[u32] {
        let lo = self.vertex_edge_offsets[v] as usize;
        let hi = self.vertex_edge_offsets[v + 1] as usize;
        &self.vertex_edges[lo..hi]
    }

    /// Mesh-edge neighbors of `v` with edge lengths.
    pub fn vertex_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.vertex_edges(v).iter().map(move |&e| {
            let edge = &self.edges[e as usize];
            let other = if edge.vertices[0] as usize == v {
                edge.vertices[1]
            } else {
                edge.vertices[0]
            };
            (other as usize, edge.length)
        })
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_closed(&self) -> bool {
        self.edges.iter().all(|e| !e.is_boundary())
    }

    /// Bounding-box diagonal, used to scale absolute tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.positions.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        norm(sub(self.positions[u], self.positions[v]))
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), MeshError> {
        if v < self.positions.len() {
            Ok(())
        } else {
            Err(MeshError::InvalidVertex {
                index: v,
                count: self.positions.len(),
            })
        }
    }

    /// Interior angle of face `f` at corner `corner`.
    pub fn corner_angle(&self, f: usize, corner: usize) -> f64 {
        let t = self.faces[f];
        let p = self.positions[t[corner] as usize];
        let a = sub(self.positions[t[(corner + 1) % 3] as usize], p);
        let b = sub(self.positions[t[(corner + 2) % 3] as usize], p);
        norm(cross(a, b)).atan2(dot(a, b))
    }

    /// Sum of the triangle angles incident to `v`.
    pub fn vertex_angle_sum(&self, v: usize) -> Result<f64, MeshError> {
        self.check_vertex(v)?;
        Ok(self.angle_sum_unchecked(v))
    }

    pub(crate) fn angle_sum_unchecked(&self, v: usize) -> f64 {
        self.vertex_faces(v)
            .iter()
            .map(|&f| {
                let corner = self.faces[f as usize]
                    .iter()
                    .position(|&x| x as usize == v)
                    .expect("vertex-face adjacency is consistent");
                self.corner_angle(f as usize, corner)
            })
            .sum()
    }

    /// Edge-connected components, counting every vertex (isolated ones too).
    fn count_components(&self) -> usize {
        let n = self.positions.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (w, _) in self.vertex_neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    /// FNV-1a over little-endian vertex coordinates and face indices.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(&(self.positions.len() as u64).to_le_bytes());
        h.write(&(self.faces.len() as u64).to_le_bytes());
        for p in &self.positions {
            for c in p {
                h.write(&c.to_bits().to_le_bytes());
            }
        }
        for f in &self.faces {
            for i in f {
                h.write(&i.to_le_bytes());
            }
        }
        h.finish()
    }
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn build_csr(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; n + 1];
    for (v, _) in pairs.clone() {
        offsets[v as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut items = vec![0u32; offsets[n] as usize];
    for (v, x) in pairs {
        items[cursor[v as usize] as usize] = x;
        cursor[v as usize] += 1;
    }
    (offsets, items)
}

/// Saddle / non-saddle partition of the mesh vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexClassification {
    saddles: Vec<u32>,
    non_saddles: Vec<u32>,
    saddle_rank: Vec<u32>,
}

const NOT_SADDLE: u32 = u32::MAX;

impl VertexClassification {
    /// Classifies every vertex by its angle sum: saddle iff the sum exceeds
    /// 2π by more than [`SADDLE_ANGLE_TOLERANCE`]. Boundary vertices follow
    /// the same rule.
    pub fn classify(mesh: &Mesh) -> Self {
        let flags: Vec<bool> = (0..mesh.num_vertices())
            .map(|v| mesh.angle_sum_unchecked(v) > 2.0 * PI + SADDLE_ANGLE_TOLERANCE)
            .collect();
        Self::from_flags(&flags)
    }

    pub fn from_flags(is_saddle: &[bool]) -> Self {
        let mut saddles = Vec::new();
        let mut non_saddles = Vec::new();
        let mut saddle_rank = vec![NOT_SADDLE; is_saddle.len()];
        for (v, &s) in is_saddle.iter().enumerate() {
            if s {
                saddle_rank[v] = saddles.len() as u32;
                saddles.push(v as u32);
            } else {
                non_saddles.push(v as u32);
            }
        }
        VertexClassification {
            saddles,
            non_saddles,
            saddle_rank,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.saddle_rank.len()
    }

    pub fn num_saddles(&self) -> usize {
        self.saddles.len()
    }

    pub fn saddles(&self) -> &[u32] {
        &self.saddles
    }

    pub fn non_saddles(&self) -> &[u32] {
        &self.non_saddles
    }

    pub fn is_saddle(&self, v: usize) -> bool {
        self.saddle_rank[v] != NOT_SADDLE
    }

    /// Row of `v` in the saddle list, if it is a saddle.
    pub fn saddle_rank(&self, v: usize) -> Option<usize> {
        let r = self.saddle_rank[v];
        (r != NOT_SADDLE).then_some(r as usize)
    }

    pub fn flags(&self) -> Vec<bool> {
        (0..self.saddle_rank.len()).map(|v| self.is_saddle(v)).collect()
    }
}

pub fn classify_vertices(mesh: &Mesh) -> VertexClassification {
    VertexClassification::classify(mesh)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    Mesh::load(path)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

type RawMesh = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_off(text: &str) -> Result<RawMesh, MeshError> {
    // Tokens with their source line, comments stripped.
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (i + 1, t))
    });
    let (line, header) = tokens.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut pending_count = None;
    if header != "OFF" {
        match header.strip_prefix("OFF") {
            Some(rest) if rest.parse::<usize>().is_ok() => pending_count = rest.parse().ok(),
            _ => return Err(parse_err(line, format!("expected OFF header, found {header:?}"))),
        }
    }
    let mut next_usize = |what: &str| -> Result<usize, MeshError> {
        let (line, tok) = tokens
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file reading {what}")))?;
        tok.parse::<usize>()
            .map_err(|_| parse_err(line, format!("invalid {what}: {tok:?}")))
    };
    let nv = match pending_count {
        Some(n) => n,
        None => next_usize("vertex count")?,
    };
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    drop(next_usize);

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            let (line, tok) = tokens
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file in vertex list"))?;
            *c = tok
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid coordinate {tok:?}")))?;
        }
        positions.push(p);
    }

    // Faces are line-oriented (trailing colour values are allowed).
    let mut faces = Vec::with_capacity(nf);
    let mut rest: Vec<(usize, &str)> = tokens.collect();
    rest.reverse();
    for fi in 0..nf {
        let (line, tok) = rest
            .pop()
            .ok_or_else(|| parse_err(0, "unexpected end of file in face list"))?;
        let arity = tok
            .parse::<usize>()
            .map_err(|_| parse_err(line, format!("invalid face arity {tok:?}")))?;
        if arity != 3 {
            return Err(MeshError::NonTriangleFace { face: fi, arity });
        }
        let mut f = [0usize; 3];
        for slot in &mut f {
            let (l, tok) = rest
                .pop()
                .ok_or_else(|| parse_err(line, "truncated face"))?;
            if l != line {
                return Err(parse_err(line, "truncated face"));
            }
            *slot = tok
                .parse::<usize>()
                .map_err(|_| parse_err(line, format!("invalid vertex index {tok:?}")))?;
        }
        faces.push(f);
        // Skip any per-face colour tokens on the same line.
        while rest.last().is_some_and(|&(l, _)| l == line) {
            rest.pop();
        }
    }
    Ok((positions, faces))
}

fn parse_obj(text: &str) -> Result<RawMesh, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    let tok = parts
                        .next()
                        .ok_or_else(|| parse_err(line_no, "vertex needs three coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid coordinate {tok:?}")))?;
                }
                positions.push(p);
            }
            Some("f") => {
                let corners: Vec<&str> = parts.collect();
                if corners.len() != 3 {
                    return Err(MeshError::NonTriangleFace {
                        face: faces.len(),
                        arity: corners.len(),
                    });
                }
                let mut f = [0usize; 3];
                for (slot, corner) in f.iter_mut().zip(&corners) {
                    let idx_tok = corner.split('/').next().unwrap_or("");
                    let idx: i64 = idx_tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid face index {corner:?}")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        positions.len() as i64 + idx
                    } else {
                        return Err(parse_err(line_no, "face index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 {
                        return Err(MeshError::IndexOutOfRange {
                            face: faces.len(),
                            index: idx,
                            count: positions.len(),
                        });
                    }
                    *slot = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((positions, faces))
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

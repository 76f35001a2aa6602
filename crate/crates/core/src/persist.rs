//! `.gepc` files: a precomputation in a fixed little-endian layout.
//!
//! ```text
//! magic "GEPC" | version u32 | mesh checksum u64
//! n, |V_S|, m, l, K, K_S, Σdegree, metadata bytes   (u64 each)
//! saddle bitmap            ceil(n/8) bytes, bit v%8 of byte v/8
//! saddle list              |V_S| × u32
//! q, s, t                  |V_S|·m, |V_S|·l, |V_S|·l × f64, row-major
//! objective, ε history     (l+1) × f64 each
//! CSR offsets              (n+1) × u64
//! CSR neighbors, weights   Σdegree × u32, Σdegree × f64
//! metadata                 JSON text
//! CRC-32 of all preceding bytes, u32
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embedding::{Embedding, EmbeddingError};
use crate::mesh::{Mesh, VertexClassification};
use crate::pipeline::{Metadata, Precomputation};
use crate::svg::{Svg, SvgError};

pub const MAGIC: &[u8; 4] = b"GEPC";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 * 8;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a precomputation file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0} (this build reads {VERSION})")]
    UnsupportedVersion(u32),
    #[error("file is for a different mesh (checksum {file:#018x}, mesh {mesh:#018x})")]
    MeshMismatch { file: u64, mesh: u64 },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("file is corrupt (CRC mismatch)")]
    Corrupt,
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Fixed-size header fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Header {
    pub version: u32,
    pub mesh_checksum: u64,
    pub num_vertices: u64,
    pub num_saddles: u64,
    pub m: u64,
    pub l: u64,
    pub k: u64,
    pub k_saddle: u64,
    pub num_adjacency: u64,
    pub metadata_len: u64,
}

impl Header {
    /// Total file length implied by the header, if it fits in a u64.
    pub fn file_len(&self) -> Option<u64> {
        let (n, ns) = (self.num_vertices, self.num_saddles);
        let parts = [
            Some(HEADER_LEN as u64),
            n.checked_add(7).map(|x| x / 8),
            ns.checked_mul(4),
            ns.checked_mul(self.m.checked_add(self.l.checked_mul(2)?)?)?.checked_mul(8),
            self.l.checked_add(1)?.checked_mul(16),
            n.checked_add(1)?.checked_mul(8),
            self.num_adjacency.checked_mul(12),
            Some(self.metadata_len),
            Some(4),
        ];
        parts.iter().try_fold(0u64, |acc, p| acc.checked_add((*p)?))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes a precomputation.
pub fn encode(pre: &Precomputation) -> Vec<u8> {
    let svg = &pre.svg;
    let emb = &pre.embedding;
    let class = svg.classification();
    let n = class.num_vertices();
    let metadata = serde_json::to_vec(&pre.metadata).expect("metadata serializes");
    let header = Header {
        version: VERSION,
        mesh_checksum: pre.mesh_checksum,
        num_vertices: n as u64,
        num_saddles: emb.len() as u64,
        m: emb.m() as u64,
        l: emb.l() as u64,
        k: svg.params().k as u64,
        k_saddle: svg.params().k_saddle as u64,
        num_adjacency: svg.neighbor_array().len() as u64,
        metadata_len: metadata.len() as u64,
    };
    let mut out = Vec::with_capacity(header.file_len().unwrap_or(0) as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&header.mesh_checksum.to_le_bytes());
    for x in [
        header.num_vertices,
        header.num_saddles,
        header.m,
        header.l,
        header.k,
        header.k_saddle,
        header.num_adjacency,
        header.metadata_len,
    ] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let mut bitmap = vec![0u8; n.div_ceil(8)];
    for &s in class.saddles() {
        bitmap[s as usize / 8] |= 1 << (s % 8);
    }
    out.extend_from_slice(&bitmap);
    for &s in emb.saddles() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let floats = emb
        .euclidean()
        .iter()
        .chain(emb.s_block())
        .chain(emb.t_block())
        .chain(&emb.objective_history)
        .chain(&emb.epsilon_history);
    for x in floats {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for x in svg.offsets() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for x in svg.neighbor_array() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for x in svg.weight_array() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&metadata);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Writes `pre` to `path` through a temporary file in the same directory
/// and a rename.
pub fn save_precomputation(path: impl AsRef<Path>, mesh: &Mesh, pre: &Precomputation) -> Result<(), PersistError> {
    let path = path.as_ref();
    if mesh.checksum() != pre.mesh_checksum {
        return Err(PersistError::MeshMismatch {
            file: pre.mesh_checksum,
            mesh: mesh.checksum(),
        });
    }
    if pre.svg.num_vertices() != mesh.num_vertices() || pre.embedding.saddles() != pre.classification().saddles() {
        return Err(PersistError::Malformed("inconsistent precomputation".into()));
    }
    let bytes = encode(pre);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(&bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PersistError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], PersistError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(PersistError::Truncated {
                expected: (self.pos as u64).saturating_add(len as u64),
                found: self.bytes.len() as u64,
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, PersistError> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<u64>, PersistError> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, PersistError> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses and checks the fixed header, including that the byte count
/// matches it.
pub fn decode_header(bytes: &[u8]) -> Result<Header, PersistError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| PersistError::BadMagic)? != MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(PersistError::UnsupportedVersion(version));
    }
    let mesh_checksum = r.u64()?;
    let v = r.u64s(8)?;
    let header = Header {
        version,
        mesh_checksum,
        num_vertices: v[0],
        num_saddles: v[1],
        m: v[2],
        l: v[3],
        k: v[4],
        k_saddle: v[5],
        num_adjacency: v[6],
        metadata_len: v[7],
    };
    let expected = header
        .file_len()
        .ok_or_else(|| PersistError::Malformed("header sizes overflow".into()))?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(PersistError::Truncated { expected, found });
    }
    if found > expected {
        return Err(PersistError::Malformed(format!(
            "{} trailing bytes",
            found - expected
        )));
    }
    if header.num_saddles > header.num_vertices || header.num_vertices > u32::MAX as u64 {
        return Err(PersistError::Malformed("inconsistent vertex counts".into()));
    }
    Ok(header)
}

/// Rebuilds a precomputation from bytes, checking it against `mesh`.
pub fn decode(bytes: &[u8], mesh: &Mesh) -> Result<Precomputation, PersistError> {
    let header = decode_header(bytes)?;
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(PersistError::Corrupt);
    }
    if header.mesh_checksum != mesh.checksum() {
        return Err(PersistError::MeshMismatch {
            file: header.mesh_checksum,
            mesh: mesh.checksum(),
        });
    }
    if header.num_vertices != mesh.num_vertices() as u64 {
        return Err(PersistError::Malformed("vertex count differs from mesh".into()));
    }
    // Sizes are bounded by the (length-checked) file from here on.
    let n = header.num_vertices as usize;
    let ns = header.num_saddles as usize;
    let (m, l) = (header.m as usize, header.l as usize);
    let nnz = header.num_adjacency as usize;

    let mut r = Reader {
        bytes: body,
        pos: HEADER_LEN,
    };
    let bitmap = r.take(n.div_ceil(8))?;
    let flags: Vec<bool> = (0..n).map(|v| bitmap[v / 8] & (1 << (v % 8)) != 0).collect();
    let class = VertexClassification::from_flags(&flags);
    let saddles = r.u32s(ns)?;
    if saddles != class.saddles() {
        return Err(PersistError::Malformed("saddle list disagrees with bitmap".into()));
    }
    let euclidean = r.f64s(ns * m)?;
    let s_block = r.f64s(ns * l)?;
    let t_block = r.f64s(ns * l)?;
    let objective = r.f64s(l + 1)?;
    let epsilon = r.f64s(l + 1)?;
    let offsets = r.u64s(n + 1)?;
    let neighbors = r.u32s(nnz)?;
    let weights = r.f64s(nnz)?;
    let metadata: Metadata = serde_json::from_slice(r.take(header.metadata_len as usize)?)
        .map_err(|e| PersistError::Malformed(format!("metadata: {e}")))?;
    if metadata.svg.k as u64 != header.k || metadata.svg.k_saddle as u64 != header.k_saddle {
        return Err(PersistError::Malformed("metadata disagrees with header".into()));
    }

    let svg = Svg::from_csr(class, metadata.svg, offsets, neighbors, weights)?;
    let embedding = Embedding::from_parts(m, l, saddles, euclidean, s_block, t_block, objective, epsilon)?;
    Ok(Precomputation {
        mesh_checksum: header.mesh_checksum,
        svg,
        embedding,
        metadata,
    })
}

pub fn load_precomputation(path: impl AsRef<Path>, mesh: &Mesh) -> Result<Precomputation, PersistError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes, mesh)
}

/// Header and metadata of a file, without a mesh.
pub fn read_info(path: impl AsRef<Path>) -> Result<(Header, Metadata), PersistError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let header = decode_header(&bytes)?;
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(PersistError::Corrupt);
    }
    let start = body.len() - header.metadata_len as usize;
    let metadata = serde_json::from_slice(&body[start..])
        .map_err(|e| PersistError::Malformed(format!("metadata: {e}")))?;
    Ok((header, metadata))
}

/// Human-readable dump. Lossy: matrices are summarized by their first
/// rows.
pub fn debug_json(header: &Header, metadata: &Metadata, pre: Option<&Precomputation>) -> String {
    let mut value = serde_json::json!({
        "header": header,
        "metadata": metadata,
    });
    if let Some(pre) = pre {
        let emb = &pre.embedding;
        let rows: Vec<serde_json::Value> = (0..emb.len().min(3))
            .map(|i| {
                let r = emb.row(i);
                serde_json::json!({ "vertex": emb.saddles()[i], "q": r.q, "s": r.s, "t": r.t })
            })
            .collect();
        value["objective_history"] = serde_json::json!(emb.objective_history);
        value["epsilon_history"] = serde_json::json!(emb.epsilon_history);
        value["first_rows"] = serde_json::json!(rows);
        value["max_degree"] = serde_json::json!(pre.svg.max_degree());
    }
    serde_json::to_string_pretty(&value).expect("dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingOptions;
    use crate::shapes;
    use crate::svg::SvgParams;

    fn small() -> (Mesh, Precomputation) {
        let mesh = shapes::bumpy_sphere(1, 0.3, 4);
        let opts = EmbeddingOptions {
            m: 3,
            l: 2,
            ..EmbeddingOptions::default()
        };
        let pre = Precomputation::build(&mesh, SvgParams::new(12, 4).unwrap(), &opts).unwrap();
        assert!(pre.embedding.len() >= 2);
        (mesh, pre)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (mesh, pre) = small();
        let bytes = encode(&pre);
        let back = decode(&bytes, &mesh).unwrap();
        assert_eq!(back, pre);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.embedding.euclidean()), bits(pre.embedding.euclidean()));
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn file_size_matches_layout() {
        let (_, pre) = small();
        let bytes = encode(&pre);
        let header = decode_header(&bytes).unwrap();
        let (ns, m, l) = (pre.embedding.len(), 3, 2);
        let degree_sum = pre.svg.neighbor_array().len();
        let n = pre.svg.num_vertices();
        let payload = 8 * ns * (m + 2 * l) + 12 * degree_sum;
        let fixed = HEADER_LEN + n.div_ceil(8) + 4 * ns + 16 * (l + 1) + 8 * (n + 1) + 4;
        assert_eq!(bytes.len(), payload + fixed + header.metadata_len as usize);
    }

    #[test]
    fn damaged_files_give_structured_errors() {
        let (mesh, pre) = small();
        let bytes = encode(&pre);
        for cut in [0, 3, 10, HEADER_LEN, bytes.len() / 2, bytes.len() - 1] {
            let err = decode(&bytes[..cut], &mesh).unwrap_err();
            assert!(
                matches!(err, PersistError::Truncated { .. } | PersistError::BadMagic),
                "cut {cut}: {err}"
            );
        }
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 20] ^= 0x40;
        assert!(matches!(decode(&flipped, &mesh), Err(PersistError::Corrupt)));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode(&magic, &mesh), Err(PersistError::BadMagic)));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(decode(&version, &mesh), Err(PersistError::UnsupportedVersion(9))));
        let mut huge = bytes.clone();
        huge[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&huge, &mesh), Err(PersistError::Malformed(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode(&longer, &mesh), Err(PersistError::Malformed(_))));
    }

    #[test]
    fn wrong_mesh_is_rejected() {
        let (_, pre) = small();
        let other = shapes::bumpy_sphere(1, 0.3, 5);
        assert!(matches!(
            decode(&encode(&pre), &other),
            Err(PersistError::MeshMismatch { .. })
        ));
    }

    #[test]
    fn save_and_load_through_files() {
        let (mesh, pre) = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.gepc");
        save_precomputation(&path, &mesh, &pre).unwrap();
        assert_eq!(load_precomputation(&path, &mesh).unwrap(), pre);
        let (header, meta) = read_info(&path).unwrap();
        assert_eq!(header.num_saddles as usize, pre.embedding.len());
        assert_eq!(header.k, 12);
        assert_eq!(meta, pre.metadata);
        let dump = debug_json(&header, &meta, Some(&pre));
        assert!(dump.contains("objective_history"));
        assert!(matches!(
            load_precomputation(dir.path().join("missing.gepc"), &mesh),
            Err(PersistError::Io { .. })
        ));
        let other = shapes::icosphere(1);
        assert!(save_precomputation(&path, &other, &pre).is_err());
    }
}

//! The full precomputation: vertex classification, SVG and saddle
//! embedding for one mesh.

use thiserror::Error;

use crate::embedding::{geodesic_embedding, Embedding, EmbeddingError, EmbeddingOptions, WEIGHT_FLOOR};
use crate::mesh::{Mesh, MeshError, VertexClassification};
use crate::query::{QueryContext, QueryError};
use crate::svg::{build_svg_with, Svg, SvgError, SvgParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Settings a precomputation was built with, stored alongside it.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metadata {
    pub svg: SvgParams,
    pub embedding: EmbeddingOptions,
    /// Pair weights were `1 / max(d, weight_floor · scale)²`.
    pub weight_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Precomputation {
    pub mesh_checksum: u64,
    pub svg: Svg,
    pub embedding: Embedding,
    pub metadata: Metadata,
}

impl Precomputation {
    pub fn build(mesh: &Mesh, svg_params: SvgParams, opts: &EmbeddingOptions) -> Result<Self, PipelineError> {
        svg_params.validate()?;
        let class = VertexClassification::classify(mesh);
        let svg = build_svg_with(mesh, &class, svg_params, opts.exec)?;
        let embedding = geodesic_embedding(mesh, &class, opts)?;
        Ok(Precomputation {
            mesh_checksum: mesh.checksum(),
            svg,
            embedding,
            metadata: Metadata {
                svg: svg_params,
                embedding: opts.clone(),
                weight_floor: WEIGHT_FLOOR,
            },
        })
    }

    pub fn classification(&self) -> &VertexClassification {
        self.svg.classification()
    }

    /// Query context over `mesh`, which must be the mesh this was built
    /// from.
    pub fn context<'a>(&'a self, mesh: &'a Mesh) -> Result<QueryContext<'a>, QueryError> {
        if mesh.checksum() != self.mesh_checksum {
            return Err(QueryError::Mismatch("mesh checksum differs from the precomputation".into()));
        }
        QueryContext::new(mesh, &self.svg, &self.embedding)
    }
}

pub mod embedding;
pub mod eval;
pub mod geodesic;
pub mod mesh;
pub mod optim;
pub mod par;
pub mod persist;
pub mod pipeline;
pub mod query;
pub mod shapes;
pub mod svg;

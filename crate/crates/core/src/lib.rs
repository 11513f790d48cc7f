//! Sparse dual-grid voxel representation for triangle meshes with PBR materials.
//!
//! A mesh is converted into a sparse set of active voxels, each holding a dual
//! vertex, intersection flags for its three canonical edges, a split weight and
//! optionally a material. The conversion back emits one quad per flagged edge.

pub mod error;
pub mod geom;
pub mod grid;
pub mod io;
pub mod material;
pub mod mesh;
pub mod metrics;
pub mod resample;
pub mod shapes;
pub mod spatial;
pub mod surfacer;
pub mod voxelizer;

pub use error::{Error, ErrorKind, Result};
pub use geom::{Aabb, Vec3};
pub use grid::{
    canonical_edges, downsample_coords, downsample_structure, edge_neighbors, Axis, GridEdge,
    MaterialFeature, OVoxelGrid, ShapeFeature, VoxelCoord, WorldTransform,
};
pub use mesh::TriangleMesh;
pub use resample::{ChildMask, SparseFeatureGrid};
pub use surfacer::{extract_mesh, extract_mesh_with_stats, ExtractStats};
pub use voxelizer::{voxelize, voxelize_with_stats, VoxelizeConfig, VoxelizeStats};

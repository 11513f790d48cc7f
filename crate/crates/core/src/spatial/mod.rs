//! Acceleration structures: a triangle BVH and a point KD-tree.

mod bvh;
mod kdtree;

pub use bvh::{ClosestHit, MeshBvh, RayHit};
pub use kdtree::KdTree;

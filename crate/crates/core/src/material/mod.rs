//! PBR materials: texture sampling, texture → voxel baking, and voxel → surface queries.

mod bake;
mod query;
mod texture;

pub use bake::{bake_materials, mip_level, sample_weight, BakeConfig, BakeStats, WeightMode};
pub use query::{bake_texture_map, bake_vertex_colors, query_material, BakedMaps, MaterialSampler};
pub use texture::{Texture, TextureSet};

/// sRGB transfer function, encoded → linear.
pub fn srgb_to_linear(c: f32) -> f32 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB transfer function, linear → encoded.
pub fn linear_to_srgb(c: f32) -> f32 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

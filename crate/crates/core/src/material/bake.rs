//! Texture → voxel: every active voxel averages the materials of the triangles
//! crossing its cube, sampled at the point closest to the voxel center.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{closest_point_on_triangle, triangle_area, triangle_intersects_aabb, Aabb, Vec3};
use crate::grid::{MaterialFeature, OVoxelGrid};
use crate::mesh::TriangleMesh;
use crate::spatial::MeshBvh;

use super::TextureSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightMode {
    /// `max(w_min, 1 − d / (√3 · voxel_size))`.
    Normalized { w_min: f64 },
    /// `1 − d`, with `d` in unit-cube units.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BakeConfig {
    pub weight: WeightMode,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            weight: WeightMode::Normalized { w_min: 0.1 },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BakeStats {
    pub voxels: usize,
    /// (voxel, triangle) samples taken.
    pub samples: usize,
    /// Voxels no triangle crosses; they take the material at the closest surface point.
    pub fallback_voxels: usize,
    /// Textured triangles with zero UV area, sampled at the finest mip.
    pub zero_uv_area_triangles: usize,
}

/// Weight of a sample at distance `d` from the voxel center (unit-cube units).
pub fn sample_weight(d: f64, voxel_size: f64, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Normalized { w_min } => (1.0 - d / (3f64.sqrt() * voxel_size)).max(w_min),
        WeightMode::Literal => (1.0 - d).max(f64::MIN_POSITIVE),
    }
}

/// Mip level whose texel footprint on the surface is about one voxel:
/// `max(0, log2(voxel_size · tex_dim · sqrt(area_uv / area_world)))`.
/// `None` when the UV area is zero.
pub fn mip_level(area_world: f64, area_uv: f64, voxel_size: f64, tex_dim: usize) -> Option<f64> {
    if !(area_uv > 0.0) || !(area_world > 0.0) {
        return None;
    }
    Some((voxel_size * tex_dim as f64 * (area_uv / area_world).sqrt()).log2().max(0.0))
}

fn uv_area(uv: &[[f64; 2]; 3]) -> f64 {
    let (a, b, c) = (uv[0], uv[1], uv[2]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

struct Source<'a> {
    mesh: &'a TriangleMesh,
    textures: &'a [TextureSet],
    default: TextureSet,
    voxel_size: f64,
}

impl Source<'_> {
    fn set(&self, t: usize) -> &TextureSet {
        let id = match &self.mesh.material_ids {
            Some(ids) => ids[t] as usize,
            None => 0,
        };
        self.textures.get(id).unwrap_or(&self.default)
    }

    /// Material of triangle `t` at barycentric `bary`; the flag reports a zero-UV-area fallback.
    fn sample(&self, t: usize, bary: &[f64; 3]) -> ([f64; 6], bool) {
        let set = self.set(t);
        let uvs = self.mesh.uvs.as_ref().map(|u| u[t]);
        let uv = uvs.map(|u| {
            [
                bary[0] * u[0][0] + bary[1] * u[1][0] + bary[2] * u[2][0],
                bary[0] * u[0][1] + bary[1] * u[1][1] + bary[2] * u[2][1],
            ]
        });
        let area_uv = uvs.map_or(0.0, |u| uv_area(&u));
        let area_world = self.mesh.triangle_area(t);
        let degenerate = set.is_textured() && uv.is_some() && mip_level(area_world, area_uv, self.voxel_size, 1).is_none();
        let v = set.sample(uv, |dim| mip_level(area_world, area_uv, self.voxel_size, dim).unwrap_or(0.0));
        (v, degenerate)
    }
}

/// Attaches a material to every active voxel of `grid`, sampled from `mesh`
/// (given in the grid's world frame). `mesh.material_ids` index `textures`; a mesh
/// without ids uses `textures[0]`, and missing entries fall back to the default material.
pub fn bake_materials(
    mesh: &TriangleMesh,
    textures: &[TextureSet],
    grid: &OVoxelGrid,
    cfg: &BakeConfig,
) -> Result<(OVoxelGrid, BakeStats)> {
    mesh.validate()?;
    if let WeightMode::Normalized { w_min } = cfg.weight {
        if !(w_min > 0.0 && w_min <= 1.0) {
            return Err(Error::invalid(format!("w_min must be in (0, 1], got {w_min}")));
        }
    }
    if mesh.is_empty() && !grid.is_empty() {
        return Err(Error::invalid("cannot bake materials from an empty mesh"));
    }
    let t = *grid.transform();
    let unit = mesh.transformed(|p| t.to_unit(p));
    let bvh = MeshBvh::new(&unit);
    let n = grid.resolution() as f64;
    let src = Source {
        mesh: &unit,
        textures,
        default: TextureSet::default(),
        voxel_size: 1.0 / n,
    };

    struct Out {
        m: MaterialFeature,
        samples: usize,
        fallback: bool,
        degenerate: usize,
    }
    let per_voxel: Vec<Out> = grid
        .coords()
        .par_iter()
        .map_init(Vec::new, |cands, c| {
            let lo = c.as_vec() / n;
            let cube = Aabb::new(lo, (c.as_vec() + Vec3::repeat(1.0)) / n);
            let center = (c.as_vec() + Vec3::repeat(0.5)) / n;
            bvh.overlapping(&cube, cands);
            let mut acc = [0f64; 6];
            let mut wsum = 0.0;
            let mut samples = 0;
            let mut degenerate = 0;
            for &ti in cands.iter() {
                let [a, b, cc] = unit.corners(ti as usize);
                if triangle_area(&a, &b, &cc) == 0.0 || !triangle_intersects_aabb(&a, &b, &cc, &cube) {
                    continue;
                }
                let (q, bary) = closest_point_on_triangle(&center, &a, &b, &cc);
                let w = sample_weight((center - q).norm(), src.voxel_size, cfg.weight);
                let (v, deg) = src.sample(ti as usize, &bary);
                degenerate += deg as usize;
                for k in 0..6 {
                    acc[k] += w * v[k];
                }
                wsum += w;
                samples += 1;
            }
            let fallback = samples == 0;
            if fallback {
                if let Some(h) = bvh.closest_point(&center) {
                    let (v, _) = src.sample(h.triangle as usize, &h.barycentric);
                    acc = v;
                    wsum = 1.0;
                }
            }
            let v = acc.map(|x| ((x / wsum).clamp(0.0, 1.0)) as f32);
            Out {
                m: MaterialFeature::from_array(v),
                samples,
                fallback,
                degenerate,
            }
        })
        .collect();

    let mut stats = BakeStats {
        voxels: grid.len(),
        ..Default::default()
    };
    let mut mats = Vec::with_capacity(per_voxel.len());
    for o in per_voxel {
        stats.samples += o.samples;
        stats.fallback_voxels += o.fallback as usize;
        stats.zero_uv_area_triangles += o.degenerate;
        mats.push(o.m);
    }
    Ok((grid.clone().with_materials(mats)?, stats))
}

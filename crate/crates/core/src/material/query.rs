//! Voxel → surface: trilinear interpolation of voxel materials.

use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::grid::{MaterialFeature, OVoxelGrid, VoxelCoord};
use crate::mesh::TriangleMesh;
use crate::spatial::KdTree;

use super::linear_to_srgb;

/// Interpolates voxel materials at arbitrary points.
///
/// Weights come from the eight voxels whose centers surround the point; inactive
/// voxels are dropped and the rest renormalized. With no active neighbor the
/// nearest active voxel is used.
pub struct MaterialSampler<'a> {
    grid: &'a OVoxelGrid,
    materials: &'a [MaterialFeature],
    centers: OnceLock<KdTree>,
}

impl<'a> MaterialSampler<'a> {
    pub fn new(grid: &'a OVoxelGrid) -> Result<Self> {
        let materials = grid
            .materials()
            .ok_or_else(|| Error::InvalidState("grid has no material features".into()))?;
        if grid.is_empty() {
            return Err(Error::InvalidState("grid has no active voxels".into()));
        }
        Ok(MaterialSampler {
            grid,
            materials,
            centers: OnceLock::new(),
        })
    }

    /// Query at a world-space point.
    pub fn query(&self, p: &Vec3) -> MaterialFeature {
        self.query_unit(&self.grid.transform().to_unit(p))
    }

    /// Query at a point of the unit cube frame.
    pub fn query_unit(&self, p: &Vec3) -> MaterialFeature {
        let n = self.grid.resolution();
        let t = p * n as f64 - Vec3::repeat(0.5);
        let base = t.map(f64::floor);
        let f = t - base;
        let mut acc = [0f64; 6];
        let mut wsum = 0.0;
        for corner in 0..8u32 {
            let mut c = [0i64; 3];
            let mut w = 1.0;
            for a in 0..3 {
                let bit = (corner >> a & 1) as i64;
                c[a] = base[a] as i64 + bit;
                w *= if bit == 1 { f[a] } else { 1.0 - f[a] };
            }
            if w == 0.0 || c.iter().any(|&x| x < 0 || x >= n as i64) {
                continue;
            }
            let vc = VoxelCoord::new(c[0] as u32, c[1] as u32, c[2] as u32);
            if let Some(i) = self.grid.index_of(&vc) {
                let m = self.materials[i].to_array();
                for k in 0..6 {
                    acc[k] += w * m[k] as f64;
                }
                wsum += w;
            }
        }
        if wsum > 0.0 {
            return MaterialFeature::from_array(acc.map(|v| (v / wsum).clamp(0.0, 1.0) as f32));
        }
        let tree = self.centers.get_or_init(|| {
            KdTree::new(
                self.grid
                    .coords()
                    .iter()
                    .map(|c| c.as_vec() + Vec3::repeat(0.5))
                    .collect(),
            )
        });
        let (_, i) = tree.nearest(&(p * n as f64)).expect("grid is nonempty");
        self.materials[i as usize]
    }
}

/// Material at a world-space point.
pub fn query_material(grid: &OVoxelGrid, p: &Vec3) -> Result<MaterialFeature> {
    Ok(MaterialSampler::new(grid)?.query(p))
}

/// Material at every vertex of `mesh` (world frame), in vertex order.
pub fn bake_vertex_colors(mesh: &TriangleMesh, grid: &OVoxelGrid) -> Result<Vec<MaterialFeature>> {
    let s = MaterialSampler::new(grid)?;
    Ok(mesh.vertices.par_iter().map(|v| s.query(v)).collect())
}

/// Baked PBR maps in linear values, row 0 at the top (v = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct BakedMaps {
    pub width: usize,
    pub height: usize,
    /// RGB base color and opacity.
    pub base_color: Vec<[f32; 4]>,
    /// glTF packing: G = roughness, B = metallic; R is unused (0).
    pub metallic_roughness: Vec<[f32; 3]>,
    /// Texels covered by a triangle before dilation.
    pub covered: Vec<bool>,
}

impl BakedMaps {
    /// Writes the base color as sRGB RGBA8 and the packed metallic-roughness map as RGB8.
    pub fn save_png(&self, base_color: &Path, metallic_roughness: &Path) -> Result<()> {
        let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let mut bc = Vec::with_capacity(self.base_color.len() * 4);
        for t in &self.base_color {
            bc.extend_from_slice(&[q(linear_to_srgb(t[0])), q(linear_to_srgb(t[1])), q(linear_to_srgb(t[2])), q(t[3])]);
        }
        let mr: Vec<u8> = self.metallic_roughness.iter().flat_map(|t| t.map(q)).collect();
        let save = |path: &Path, data: Vec<u8>, ct| {
            image::save_buffer_with_format(path, &data, self.width as u32, self.height as u32, ct, image::ImageFormat::Png)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(path, io),
                    other => Error::Image {
                        path: path.to_path_buf(),
                        message: other.to_string(),
                    },
                })
        };
        save(base_color, bc, image::ExtendedColorType::Rgba8)?;
        save(metallic_roughness, mr, image::ExtendedColorType::Rgb8)
    }
}

/// Number of dilation passes that grow charts into uncovered texels.
pub const DILATION_PASSES: usize = 4;

/// Rasterizes `mesh` in UV space and fills each covered texel with the material at
/// the corresponding surface point. Where triangles overlap in UV space the later one wins.
pub fn bake_texture_map(mesh: &TriangleMesh, grid: &OVoxelGrid, width: usize, height: usize) -> Result<BakedMaps> {
    mesh.validate()?;
    let uvs = mesh
        .uvs
        .as_ref()
        .ok_or_else(|| Error::invalid("texture baking needs a mesh with UV coordinates"))?;
    if width == 0 || height == 0 {
        return Err(Error::invalid("texture size must be positive"));
    }
    let sampler = MaterialSampler::new(grid)?;

    // Texel → surface point, by rasterizing every triangle over texel centers.
    let mut owner: Vec<Option<Vec3>> = vec![None; width * height];
    for (t, uv) in uvs.iter().enumerate() {
        let px = uv.map(|c| [c[0] * width as f64, (1.0 - c[1]) * height as f64]);
        let area = (px[1][0] - px[0][0]) * (px[2][1] - px[0][1]) - (px[2][0] - px[0][0]) * (px[1][1] - px[0][1]);
        if area == 0.0 {
            continue;
        }
        let lo = |k: usize| px.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = |k: usize| px.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = ((lo(0) - 0.5).ceil().max(0.0)) as usize;
        let x1 = ((hi(0) - 0.5).floor().min(width as f64 - 1.0)) as i64;
        let y0 = ((lo(1) - 0.5).ceil().max(0.0)) as usize;
        let y1 = ((hi(1) - 0.5).floor().min(height as f64 - 1.0)) as i64;
        let corners = mesh.corners(t);
        for y in y0..=(y1.max(-1) as usize).min(height - 1) {
            if (y as i64) > y1 {
                break;
            }
            for x in x0..=(x1.max(-1) as usize).min(width - 1) {
                if (x as i64) > x1 {
                    break;
                }
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let e = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
                let w = [e(px[1], px[2]) / area, e(px[2], px[0]) / area, e(px[0], px[1]) / area];
                if w.iter().all(|&v| v >= -1e-12) {
                    owner[y * width + x] = Some(corners[0] * w[0] + corners[1] * w[1] + corners[2] * w[2]);
                }
            }
        }
    }

    let mut values: Vec<Option<MaterialFeature>> = owner
        .par_iter()
        .map(|o| o.map(|p| sampler.query(&p)))
        .collect();
    let covered: Vec<bool> = values.iter().map(Option::is_some).collect();
    for _ in 0..DILATION_PASSES {
        let prev = values.clone();
        values.par_iter_mut().enumerate().for_each(|(i, v)| {
            if v.is_some() {
                return;
            }
            let (x, y) = (i % width, i / width);
            let nbrs = [
                (x > 0).then(|| i - 1),
                (x + 1 < width).then(|| i + 1),
                (y > 0).then(|| i - width),
                (y + 1 < height).then(|| i + width),
            ];
            *v = nbrs.into_iter().flatten().find_map(|j| prev[j]);
        });
    }
    let fill = MaterialFeature::new([0.0; 3], 0.0, 1.0, 1.0);
    let values: Vec<MaterialFeature> = values.into_iter().map(|v| v.unwrap_or(fill)).collect();
    Ok(BakedMaps {
        width,
        height,
        base_color: values
            .iter()
            .map(|m| [m.base_color[0], m.base_color[1], m.base_color[2], m.opacity])
            .collect(),
        metallic_roughness: values.iter().map(|m| [0.0, m.roughness, m.metallic]).collect(),
        covered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ShapeFeature, WorldTransform};
    use crate::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_with(entries: Vec<(VoxelCoord, MaterialFeature)>, n: u32) -> OVoxelGrid {
        let shapes = entries
            .iter()
            .map(|(c, _)| (*c, ShapeFeature::new([0.5; 3], [false; 3], 0.5)))
            .collect();
        let g = OVoxelGrid::from_entries(n, shapes, WorldTransform::IDENTITY).unwrap();
        let mut e = entries;
        e.sort_by_key(|x| x.0);
        g.with_materials(e.into_iter().map(|x| x.1).collect()).unwrap()
    }

    fn gray(v: f32) -> MaterialFeature {
        MaterialFeature::new([v; 3], v, v, 1.0)
    }

    #[test]
    fn center_and_midpoint() {
        let a = VoxelCoord::new(2, 2, 2);
        let b = VoxelCoord::new(3, 2, 2);
        let g = grid_with(vec![(a, gray(0.2)), (b, gray(0.6))], 8);
        let s = MaterialSampler::new(&g).unwrap();
        assert_eq!(s.query(&((a.as_vec() + Vec3::repeat(0.5)) / 8.0)), gray(0.2));
        let mid = (a.as_vec() + b.as_vec() + Vec3::repeat(1.0)) / 16.0;
        let m = s.query(&mid);
        assert!((m.metallic - 0.4).abs() < 1e-6);
        // Far away from both: nearest voxel.
        assert_eq!(s.query(&Vec3::new(0.05, 0.3, 0.3)), gray(0.2));
    }

    #[test]
    fn errors_without_materials() {
        let g = OVoxelGrid::empty(4).unwrap();
        assert!(matches!(query_material(&g, &Vec3::zeros()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn matches_full_trilinear_in_active_region() {
        // Fully active 8^3 block with a linear field: trilinear reproduces it exactly.
        let mut e = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let v = (i + j + k) as f32 / 21.0;
                    e.push((VoxelCoord::new(i, j, k), gray(v)));
                }
            }
        }
        let g = grid_with(e, 8);
        let s = MaterialSampler::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = Vec3::new(rng.random_range(0.0625..0.9375), rng.random_range(0.0625..0.9375), rng.random_range(0.0625..0.9375));
            let want = ((p * 8.0 - Vec3::repeat(0.5)).sum() / 21.0) as f32;
            assert!((s.query(&p).metallic - want).abs() < 1e-5);
        }
    }

    #[test]
    fn vertex_colors_single_voxel() {
        let g = grid_with(vec![(VoxelCoord::new(1, 1, 1), gray(0.3))], 4);
        let m = shapes::cube(Vec3::repeat(0.5), 0.5);
        assert!(bake_vertex_colors(&m, &g).unwrap().iter().all(|c| *c == gray(0.3)));
    }

    #[test]
    fn texture_map_matches_direct_queries() {
        let mut e = Vec::new();
        for i in 0..8u32 {
            for j in 0..8 {
                e.push((VoxelCoord::new(i, j, 2), gray((i * 8 + j) as f32 / 64.0)));
            }
        }
        let g = grid_with(e, 8);
        // Triangle covering the lower-left half of the UV square.
        let mut tri = TriangleMesh::new(
            vec![Vec3::new(0.1, 0.1, 0.3), Vec3::new(0.9, 0.1, 0.3), Vec3::new(0.1, 0.9, 0.3)],
            vec![[0, 1, 2]],
        );
        tri.uvs = Some(vec![[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]);
        let (w, h) = (32, 32);
        let maps = bake_texture_map(&tri, &g, w, h).unwrap();
        let s = MaterialSampler::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        while checked < 100 {
            let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
            let (u, v) = ((x as f64 + 0.5) / w as f64, 1.0 - (y as f64 + 0.5) / h as f64);
            if u + v > 1.0 {
                continue;
            }
            let p = Vec3::new(0.1 + 0.8 * u, 0.1 + 0.8 * v, 0.3);
            let m = s.query(&p);
            assert!(maps.covered[y * w + x]);
            assert!((maps.metallic_roughness[y * w + x][2] - m.metallic).abs() < 1e-6);
            checked += 1;
        }
        // Dilated texels copy a covered neighbor.
        let i = (0..w * h).find(|&i| !maps.covered[i] && (i % w > 0) && maps.covered[i - 1]).unwrap();
        assert_eq!(maps.base_color[i], maps.base_color[i - 1]);
        let d = tempfile::tempdir().unwrap();
        maps.save_png(&d.path().join("bc.png"), &d.path().join("mr.png")).unwrap();
        let back = crate::material::Texture::load_png(&d.path().join("mr.png"), false).unwrap();
        assert_eq!(back.width(), w);
        assert!(bake_texture_map(&TriangleMesh::new(tri.vertices.clone(), tri.triangles.clone()), &g, 8, 8).is_err());
    }
}

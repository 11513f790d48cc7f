//! Indexed triangle meshes.

use crate::error::{Error, Result};
use crate::geom::{triangle_area, Aabb, Vec3};
use crate::grid::WorldTransform;

/// Indexed triangle soup. Need not be watertight, manifold or consistently wound.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-corner texture coordinates, one triple per triangle.
    pub uvs: Option<Vec<[[f64; 2]; 3]>>,
    /// Per-triangle index into the material list that accompanies the mesh.
    pub material_ids: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            vertices,
            triangles,
            uvs: None,
            material_ids: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks index ranges and the lengths of the optional per-triangle arrays.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if let Some((t, tri)) = self
            .triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&i| i as usize >= nv))
        {
            return Err(Error::invalid(format!(
                "triangle {t} references vertex {:?} but the mesh has {nv} vertices",
                tri
            )));
        }
        if let Some(uv) = &self.uvs {
            if uv.len() != self.triangles.len() {
                return Err(Error::invalid(format!(
                    "{} uv triples for {} triangles",
                    uv.len(),
                    self.triangles.len()
                )));
            }
        }
        if let Some(m) = &self.material_ids {
            if m.len() != self.triangles.len() {
                return Err(Error::invalid(format!(
                    "{} material ids for {} triangles",
                    m.len(),
                    self.triangles.len()
                )));
            }
        }
        if let Some(v) = self.vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite vertex {v:?}")));
        }
        Ok(())
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        triangle_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Bounding box of the vertices referenced by triangles.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for t in &self.triangles {
            for &i in t {
                b.grow(&self.vertices[i as usize]);
            }
        }
        b
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            ..self.clone()
        }
    }

    /// Appends `other`, offsetting its indices. Optional arrays are kept only if both sides have them.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        let had_tris = !self.triangles.is_empty();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
        self.uvs = match (self.uvs.take(), &other.uvs) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if !had_tris => Some(b.clone()),
            _ => None,
        };
        self.material_ids = match (self.material_ids.take(), &other.material_ids) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if !had_tris => Some(b.clone()),
            _ => None,
        };
    }
}

/// Transform fitting `bounds` into the unit cube with `margin` (unit-frame units)
/// kept free on every side of the longest axis; the box is centered at 0.5.
pub fn fit_unit_cube(bounds: &Aabb, margin: f64) -> WorldTransform {
    if bounds.is_empty() {
        return WorldTransform::IDENTITY;
    }
    let extent = bounds.extent().max();
    let scale = if extent > 0.0 {
        (1.0 - 2.0 * margin) / extent
    } else {
        1.0
    };
    let c = bounds.center();
    WorldTransform {
        scale,
        translation: [0.5 - c.x * scale, 0.5 - c.y * scale, 0.5 - c.z * scale],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_bad_indices() {
        let m = TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 3]]);
        assert!(matches!(m.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fit_unit_cube_centers_and_scales() {
        let b = Aabb::new(Vec3::new(-2.0, 0.0, 1.0), Vec3::new(2.0, 1.0, 2.0));
        let t = fit_unit_cube(&b, 0.1);
        let lo = t.to_unit(&b.min);
        let hi = t.to_unit(&b.max);
        assert!((lo.x - 0.1).abs() < 1e-12 && (hi.x - 0.9).abs() < 1e-12);
        assert!(((lo.y + hi.y) * 0.5 - 0.5).abs() < 1e-12);
        let back = t.from_unit(&lo);
        assert!((back - b.min).norm() < 1e-12);
    }
}

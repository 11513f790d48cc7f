//! Mesh and grid file formats.

mod obj;
mod ovx;
mod ply;

pub use obj::{parse_mtl, read_obj, write_obj, ObjMaterial};
pub use ovx::{decode_ovx, encode_ovx, read_ovx, write_ovx, OvxFile, OVX_MAGIC, OVX_VERSION};
pub use ply::{read_ply, write_ply};

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::MaterialFeature;
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::invalid(format!(
                "cannot infer mesh format of {} (expected .obj or .ply)",
                path.display()
            ))),
        }
    }
}

/// A mesh as read from disk, with whatever material information the file carried.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    /// Materials indexed by `mesh.material_ids` (OBJ only).
    pub materials: Vec<ObjMaterial>,
    /// Per-vertex PBR attributes (PLY only).
    pub vertex_colors: Option<Vec<MaterialFeature>>,
}

pub fn read_mesh(path: &Path) -> Result<LoadedMesh> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => read_obj(path),
        MeshFormat::Ply => read_ply(path),
    }
}

/// Writes `mesh`; vertex colors are only representable in PLY.
pub fn write_mesh(path: &Path, mesh: &TriangleMesh, colors: Option<&[MaterialFeature]>) -> Result<()> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => {
            if colors.is_some() {
                return Err(Error::invalid("OBJ output cannot carry vertex colors; use .ply"));
            }
            write_obj(path, mesh)
        }
        MeshFormat::Ply => write_ply(path, mesh, colors),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

//! Wavefront OBJ with a subset of MTL (PBR extension keywords included).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;

use super::{read_file, write_file, LoadedMesh};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

/// Material from an MTL library. Texture paths are resolved against the library's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjMaterial {
    pub name: String,
    /// `Kd` and dissolve `d`.
    pub base_color: [f32; 4],
    /// `Pm`.
    pub metallic: f32,
    /// `Pr`.
    pub roughness: f32,
    pub base_color_map: Option<PathBuf>,
    pub metallic_map: Option<PathBuf>,
    pub roughness_map: Option<PathBuf>,
}

impl ObjMaterial {
    pub fn named(name: &str) -> Self {
        ObjMaterial {
            name: name.to_string(),
            base_color: [1.0; 4],
            metallic: 0.0,
            roughness: 1.0,
            base_color_map: None,
            metallic_map: None,
            roughness_map: None,
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as u64,
        message: message.into(),
    }
}

fn floats<const K: usize>(path: &Path, line: usize, it: &mut std::str::SplitWhitespace, what: &str) -> Result<[f64; K]> {
    let mut out = [0.0; K];
    for o in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| parse_err(path, line, format!("{what}: expected {K} numbers")))?;
        *o = tok
            .parse()
            .map_err(|_| parse_err(path, line, format!("{what}: bad number {tok:?}")))?;
    }
    Ok(out)
}

/// Resolves a 1-based (or negative, relative) OBJ index against `count` elements.
fn resolve(path: &Path, line: usize, tok: &str, count: usize) -> Result<usize> {
    let i: i64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad index {tok:?}")))?;
    let r = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || r < 0 || r as usize >= count {
        return Err(parse_err(path, line, format!("index {i} out of range (have {count})")));
    }
    Ok(r as usize)
}

/// Parses an MTL library. `dir` resolves relative texture paths.
pub fn parse_mtl(text: &str, path: &Path, dir: &Path) -> Result<Vec<ObjMaterial>> {
    let mut out: Vec<ObjMaterial> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(key) = it.next() else { continue };
        if key == "newmtl" {
            let name = line[key.len()..].trim();
            out.push(ObjMaterial::named(name));
            continue;
        }
        let Some(m) = out.last_mut() else {
            return Err(parse_err(path, ln, format!("{key} before any newmtl")));
        };
        // Texture statements may carry options; the file name is the last token.
        let map = |it: std::str::SplitWhitespace| -> Result<PathBuf> {
            it.last()
                .map(|f| dir.join(f))
                .ok_or_else(|| parse_err(path, ln, format!("{key} without a file name")))
        };
        match key {
            "Kd" => {
                let [r, g, b] = floats::<3>(path, ln, &mut it, key)?;
                m.base_color[..3].copy_from_slice(&[r as f32, g as f32, b as f32]);
            }
            "d" => m.base_color[3] = floats::<1>(path, ln, &mut it, key)?[0] as f32,
            "Tr" => m.base_color[3] = 1.0 - floats::<1>(path, ln, &mut it, key)?[0] as f32,
            "Pm" => m.metallic = floats::<1>(path, ln, &mut it, key)?[0] as f32,
            "Pr" => m.roughness = floats::<1>(path, ln, &mut it, key)?[0] as f32,
            "map_Kd" => m.base_color_map = Some(map(it)?),
            "map_Pm" => m.metallic_map = Some(map(it)?),
            "map_Pr" => m.roughness_map = Some(map(it)?),
            _ => {}
        }
    }
    Ok(out)
}

/// Reads an OBJ file. Polygons are fan-triangulated; `usemtl` selects materials from
/// the referenced libraries, and faces without a known material get a default one
/// appended at the end of the material list.
pub fn read_obj(path: &Path) -> Result<LoadedMesh> {
    let bytes = read_file(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut tex: Vec<[f64; 2]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut uvs: Vec<Option<[[f64; 2]; 3]>> = Vec::new();
    let mut mat_ids: Vec<Option<u32>> = Vec::new();
    let mut materials: Vec<ObjMaterial> = Vec::new();
    let mut by_name: FxHashMap<String, u32> = FxHashMap::default();
    let mut current: Option<u32> = None;
    let mut used_mtl = false;

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(key) = it.next() else { continue };
        match key {
            "v" => {
                let [x, y, z] = floats::<3>(path, ln, &mut it, "v")?;
                vertices.push(Vec3::new(x, y, z));
            }
            "vt" => {
                let u: f64 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(path, ln, "vt: expected u"))?;
                let v: f64 = match it.next() {
                    Some(t) => t.parse().map_err(|_| parse_err(path, ln, format!("vt: bad number {t:?}")))?,
                    None => 0.0,
                };
                tex.push([u, v]);
            }
            "f" => {
                let mut corners: Vec<(u32, Option<usize>)> = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let vi = resolve(path, ln, parts.next().unwrap_or(""), vertices.len())?;
                    let ti = match parts.next() {
                        Some(t) if !t.is_empty() => Some(resolve(path, ln, t, tex.len())?),
                        _ => None,
                    };
                    corners.push((vi as u32, ti));
                }
                if corners.len() < 3 {
                    return Err(parse_err(path, ln, "face with fewer than 3 vertices"));
                }
                for k in 1..corners.len() - 1 {
                    let c = [corners[0], corners[k], corners[k + 1]];
                    triangles.push(c.map(|x| x.0));
                    uvs.push(match c.map(|x| x.1) {
                        [Some(a), Some(b), Some(d)] => Some([tex[a], tex[b], tex[d]]),
                        _ => None,
                    });
                    mat_ids.push(current);
                }
            }
            "mtllib" => {
                let name = line[key.len()..].trim();
                let lib = dir.join(name);
                let text = read_file(&lib)?;
                for m in parse_mtl(&String::from_utf8_lossy(&text), &lib, lib.parent().unwrap_or(dir))? {
                    by_name.insert(m.name.clone(), materials.len() as u32);
                    materials.push(m);
                }
            }
            "usemtl" => {
                used_mtl = true;
                current = by_name.get(line[key.len()..].trim()).copied();
            }
            _ => {}
        }
    }

    let mut mesh = TriangleMesh::new(vertices, triangles);
    if uvs.iter().any(Option::is_some) {
        mesh.uvs = Some(uvs.into_iter().map(|u| u.unwrap_or([[0.0; 2]; 3])).collect());
    }
    if used_mtl {
        let default = materials.len() as u32;
        if mat_ids.iter().any(Option::is_none) {
            materials.push(ObjMaterial::named("default"));
        }
        mesh.material_ids = Some(mat_ids.into_iter().map(|m| m.unwrap_or(default)).collect());
    }
    Ok(LoadedMesh {
        mesh,
        materials,
        vertex_colors: None,
    })
}

/// Writes positions, per-corner UVs and faces. Numbers use Rust's shortest round-trip formatting.
pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    mesh.validate()?;
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    match &mesh.uvs {
        Some(uvs) => {
            for tri in uvs {
                for uv in tri {
                    let _ = writeln!(s, "vt {} {}", uv[0], uv[1]);
                }
            }
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let b = 3 * t + 1;
                let _ = writeln!(s, "f {}/{} {}/{} {}/{}", tri[0] + 1, b, tri[1] + 1, b + 1, tri[2] + 1, b + 2);
            }
        }
        None => {
            for tri in &mesh.triangles {
                let _ = writeln!(s, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
            }
        }
    }
    write_file(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_and_quad() {
        let d = tempfile::tempdir().unwrap();
        let m = read_obj(&write(d.path(), "a.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")).unwrap().mesh;
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        let m = read_obj(&write(d.path(), "b.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 5 5 5\nf 1 2 3 4\n")).unwrap().mesh;
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.vertices.len(), 5);
        let m = read_obj(&write(d.path(), "c.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")).unwrap().mesh;
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let d = tempfile::tempdir().unwrap();
        let e = read_obj(&write(d.path(), "a.obj", "v 0 0 0\nv 1 0 0\nf 1 2 3\n")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = read_obj(&write(d.path(), "b.obj", "v 0 0\n")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(matches!(read_obj(&d.path().join("missing.obj")), Err(Error::Io { .. })));
    }

    #[test]
    fn materials_and_uvs() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "m.mtl", "newmtl red\nKd 1 0 0\nPm 0.25\nPr 0.5\nmap_Kd -bm 1 tex/red.png\n");
        let p = write(
            d.path(),
            "a.obj",
            "mtllib m.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1 2 3\nusemtl red\nf 1/1 2/2 3/3\nusemtl nope\nf 1 2 3\n",
        );
        let l = read_obj(&p).unwrap();
        assert_eq!(l.materials.len(), 2);
        assert_eq!(l.materials[0].base_color, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(l.materials[0].metallic, 0.25);
        assert_eq!(l.materials[0].base_color_map.as_deref(), Some(d.path().join("tex/red.png").as_path()));
        assert_eq!(l.mesh.material_ids, Some(vec![1, 0, 1]));
        assert_eq!(l.mesh.uvs.as_ref().unwrap()[1], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn round_trip() {
        let d = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = TriangleMesh::new(
            (0..50).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect(),
            (0..80).map(|_| [rng.random_range(0..50), rng.random_range(0..50), rng.random_range(0..50)]).collect(),
        );
        let p = d.path().join("r.obj");
        write_obj(&p, &m).unwrap();
        assert_eq!(read_obj(&p).unwrap().mesh, m);
        m.uvs = Some((0..80).map(|_| [[rng.random(), rng.random()]; 3]).collect());
        write_obj(&p, &m).unwrap();
        assert_eq!(read_obj(&p).unwrap().mesh, m);
        let empty = TriangleMesh::default();
        write_obj(&p, &empty).unwrap();
        assert_eq!(read_obj(&p).unwrap().mesh, empty);
    }
}

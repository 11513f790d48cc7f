//! Stanford PLY: ascii and binary readers, binary little-endian writer.
//!
//! Vertex colors are written as sRGB `uchar red/green/blue/alpha` plus linear
//! `float metallic/roughness` properties.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_file, write_file, LoadedMesh};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::grid::MaterialFeature;
use crate::material::{linear_to_srgb, srgb_to_linear};
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Clone, Debug)]
struct Property {
    name: String,
    ty: Scalar,
    /// Count type for list properties.
    list: Option<Scalar>,
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Le,
    Be,
}

struct Body<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
    enc: Encoding,
    line: usize,
}

impl Body<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        let line = if self.enc == Encoding::Ascii { self.line } else { self.pos };
        Error::Parse {
            path: self.path.to_path_buf(),
            line: line as u64,
            message: message.into(),
        }
    }

    fn token(&mut self) -> Result<&str> {
        let d = self.data;
        while self.pos < d.len() && d[self.pos].is_ascii_whitespace() {
            if d[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < d.len() && !d[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of data"));
        }
        std::str::from_utf8(&d[start..self.pos]).map_err(|_| self.err("non-ascii token"))
    }

    fn read(&mut self, ty: Scalar) -> Result<f64> {
        if self.enc == Encoding::Ascii {
            let t = self.token()?.to_string();
            return t.parse::<f64>().map_err(|_| self.err(format!("bad number {t:?}")));
        }
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(self.err("truncated binary data"));
        }
        let mut b = [0u8; 8];
        b[..n].copy_from_slice(&self.data[self.pos..self.pos + n]);
        if self.enc == Encoding::Be {
            b[..n].reverse();
        }
        self.pos += n;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b),
        })
    }
}

fn header(path: &Path, data: &[u8]) -> Result<(Encoding, Vec<Element>, usize, usize)> {
    let err = |line: usize, m: &str| Error::Parse {
        path: path.to_path_buf(),
        line: line as u64,
        message: m.to_string(),
    };
    let mut pos = 0;
    let mut line_no = 0;
    let mut enc = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = data[pos..]
            .iter()
            .position(|&c| c == b'\n')
            .ok_or_else(|| err(line_no + 1, "header without end_header"))?;
        let line = std::str::from_utf8(&data[pos..pos + end])
            .map_err(|_| err(line_no + 1, "non-ascii header"))?
            .trim();
        pos += end + 1;
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(err(1, "missing ply magic")),
            ["format", f, _] => {
                enc = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Le,
                    "binary_big_endian" => Encoding::Be,
                    _ => return Err(err(line_no, "unknown format")),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| err(line_no, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, ty, name] => {
                let e = elements.last_mut().ok_or_else(|| err(line_no, "property before element"))?;
                let (Some(ct), Some(ty)) = (Scalar::parse(ct), Scalar::parse(ty)) else {
                    return Err(err(line_no, "unknown property type"));
                };
                e.props.push(Property {
                    name: name.to_string(),
                    ty,
                    list: Some(ct),
                });
            }
            ["property", ty, name] => {
                let e = elements.last_mut().ok_or_else(|| err(line_no, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| err(line_no, "unknown property type"))?;
                e.props.push(Property {
                    name: name.to_string(),
                    ty,
                    list: None,
                });
            }
            ["end_header"] => break,
            _ => return Err(err(line_no, "unrecognized header line")),
        }
    }
    let enc = enc.ok_or_else(|| err(line_no, "missing format line"))?;
    Ok((enc, elements, pos, line_no + 1))
}

pub fn read_ply(path: &Path) -> Result<LoadedMesh> {
    let data = read_file(path)?;
    let (enc, elements, start, line) = header(path, &data)?;
    let mut body = Body {
        path,
        data: &data,
        pos: start,
        enc,
        line,
    };
    let mut vertices = Vec::new();
    let mut colors: Vec<MaterialFeature> = Vec::new();
    let mut has_colors = false;
    let mut triangles = Vec::new();
    for e in &elements {
        let find = |n: &str| e.props.iter().position(|p| p.name == n && p.list.is_none());
        let (xi, yi, zi) = (find("x"), find("y"), find("z"));
        let (ri, gi, bi, ai) = (find("red"), find("green"), find("blue"), find("alpha"));
        let (mi, rgi) = (find("metallic"), find("roughness"));
        let face_list = e
            .props
            .iter()
            .position(|p| p.list.is_some() && (p.name == "vertex_indices" || p.name == "vertex_index"));
        if e.name == "vertex" {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(body.err("vertex element without x, y, z"));
            }
            has_colors = ri.is_some() && gi.is_some() && bi.is_some();
        }
        let mut vals: Vec<f64> = vec![0.0; e.props.len()];
        let mut list: Vec<f64> = Vec::new();
        for _ in 0..e.count {
            for (k, p) in e.props.iter().enumerate() {
                match p.list {
                    None => vals[k] = body.read(p.ty)?,
                    Some(ct) => {
                        let n = body.read(ct)?;
                        if !(n >= 0.0) {
                            return Err(body.err("negative list length"));
                        }
                        let keep = Some(k) == face_list;
                        if keep {
                            list.clear();
                        }
                        for _ in 0..n as usize {
                            let v = body.read(p.ty)?;
                            if keep {
                                list.push(v);
                            }
                        }
                    }
                }
            }
            if e.name == "vertex" {
                vertices.push(Vec3::new(vals[xi.unwrap()], vals[yi.unwrap()], vals[zi.unwrap()]));
                if has_colors {
                    let c = |i: usize| srgb_to_linear((vals[i] / 255.0) as f32);
                    colors.push(MaterialFeature::new(
                        [c(ri.unwrap()), c(gi.unwrap()), c(bi.unwrap())],
                        mi.map_or(0.0, |i| vals[i] as f32),
                        rgi.map_or(1.0, |i| vals[i] as f32),
                        ai.map_or(1.0, |i| (vals[i] / 255.0) as f32),
                    ));
                }
            } else if e.name == "face" && face_list.is_some() {
                if list.len() < 3 {
                    return Err(body.err("face with fewer than 3 vertices"));
                }
                for &i in &list {
                    if i < 0.0 || i as usize >= vertices.len() || i.fract() != 0.0 {
                        return Err(body.err(format!("face index {i} out of range")));
                    }
                }
                for k in 1..list.len() - 1 {
                    triangles.push([list[0] as u32, list[k] as u32, list[k + 1] as u32]);
                }
            }
        }
    }
    Ok(LoadedMesh {
        mesh: TriangleMesh::new(vertices, triangles),
        materials: Vec::new(),
        vertex_colors: has_colors.then_some(colors),
    })
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh, colors: Option<&[MaterialFeature]>) -> Result<()> {
    mesh.validate()?;
    if let Some(c) = colors {
        if c.len() != mesh.vertices.len() {
            return Err(Error::invalid(format!(
                "{} vertex colors for {} vertices",
                c.len(),
                mesh.vertices.len()
            )));
        }
    }
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(h, "element vertex {}", mesh.vertices.len());
    h.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\n");
        h.push_str("property float metallic\nproperty float roughness\n");
    }
    let _ = writeln!(h, "element face {}", mesh.triangles.len());
    h.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut out = h.into_bytes();
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(cs) = colors {
            let m = &cs[i];
            for c in m.base_color {
                out.push(q(linear_to_srgb(c)));
            }
            out.push(q(m.opacity));
            out.extend_from_slice(&m.metallic.to_le_bytes());
            out.extend_from_slice(&m.roughness.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ascii_with_quads_and_extra_elements() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("a.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty uchar flag\n\
             element face 1\nproperty list uchar int vertex_indices\nelement edge 1\nproperty int a\nproperty int b\nend_header\n\
             0 0 0 1\n1 0 0 1\n1 1 0 1\n0 1 0 1\n4 0 1 2 3\n0 1\n",
        )
        .unwrap();
        let l = read_ply(&p).unwrap();
        assert_eq!(l.mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(l.vertex_colors.is_none());
    }

    #[test]
    fn errors() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("a.ply");
        std::fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0\n").unwrap();
        assert!(matches!(read_ply(&p), Err(Error::Parse { .. })));
        std::fs::write(&p, "plx\n").unwrap();
        assert!(matches!(read_ply(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn binary_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("r.ply");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = TriangleMesh::new(
            (0..40).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect(),
            (0..60).map(|_| [rng.random_range(0..40), rng.random_range(0..40), rng.random_range(0..40)]).collect(),
        );
        write_ply(&p, &m, None).unwrap();
        assert_eq!(read_ply(&p).unwrap().mesh, m);
        let colors: Vec<MaterialFeature> = (0..40)
            .map(|_| MaterialFeature::new([rng.random(), rng.random(), rng.random()], rng.random(), rng.random(), 1.0))
            .collect();
        write_ply(&p, &m, Some(&colors)).unwrap();
        let l = read_ply(&p).unwrap();
        assert_eq!(l.mesh, m);
        for (a, b) in l.vertex_colors.unwrap().iter().zip(&colors) {
            assert_eq!(a.metallic, b.metallic);
            assert_eq!(a.roughness, b.roughness);
            for k in 0..3 {
                assert!((linear_to_srgb(a.base_color[k]) - linear_to_srgb(b.base_color[k])).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
        let empty = TriangleMesh::default();
        write_ply(&p, &empty, None).unwrap();
        assert_eq!(read_ply(&p).unwrap().mesh, empty);
    }
}

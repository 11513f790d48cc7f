//! OVX container: little-endian binary sections after a 24-byte header.
//!
//! ```text
//! "OVX1" | u32 version | u32 N | u64 L | u32 flags
//! coords    L × 3 × u16                       (always)
//! shape     L × (3 × f32, u8 flags, f32 γ)    flags bit 0
//! material  L × 6 × f32                       flags bit 1
//! generic   u32 C, L × C × f32                flags bit 2
//! transform 4 × f64 (scale, tx, ty, tz)       flags bit 3
//! ```
//!
//! Coordinates are strictly increasing, so equal grids serialize to equal bytes.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::grid::{MaterialFeature, OVoxelGrid, ShapeFeature, VoxelCoord, WorldTransform, MAX_RESOLUTION};
use crate::resample::SparseFeatureGrid;

pub const OVX_MAGIC: [u8; 4] = *b"OVX1";
pub const OVX_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

const FLAG_SHAPE: u32 = 1;
const FLAG_MATERIAL: u32 = 2;
const FLAG_GENERIC: u32 = 4;
const FLAG_TRANSFORM: u32 = 8;

/// Raw file contents. Any combination of sections may be present.
#[derive(Clone, Debug, PartialEq)]
pub struct OvxFile {
    pub resolution: u32,
    pub coords: Vec<VoxelCoord>,
    pub shape: Option<Vec<ShapeFeature>>,
    pub material: Option<Vec<MaterialFeature>>,
    /// Channel width and row-major values.
    pub generic: Option<(u32, Vec<f32>)>,
    pub transform: WorldTransform,
}

impl OvxFile {
    pub fn flags(&self) -> u32 {
        let mut f = 0;
        if self.shape.is_some() {
            f |= FLAG_SHAPE;
        }
        if self.material.is_some() {
            f |= FLAG_MATERIAL;
        }
        if self.generic.is_some() {
            f |= FLAG_GENERIC;
        }
        if !self.transform.is_identity() {
            f |= FLAG_TRANSFORM;
        }
        f
    }

    pub fn from_grid(grid: &OVoxelGrid) -> Self {
        OvxFile {
            resolution: grid.resolution(),
            coords: grid.coords().to_vec(),
            shape: Some(grid.shapes().to_vec()),
            material: grid.materials().map(<[_]>::to_vec),
            generic: None,
            transform: *grid.transform(),
        }
    }

    pub fn from_features(grid: &SparseFeatureGrid) -> Self {
        OvxFile {
            resolution: grid.resolution(),
            coords: grid.coords().to_vec(),
            shape: None,
            material: None,
            generic: Some((grid.channels() as u32, grid.features().iter().map(|&v| v as f32).collect())),
            transform: WorldTransform::IDENTITY,
        }
    }

    pub fn to_grid(&self) -> Result<OVoxelGrid> {
        let shape = self.shape.clone().ok_or_else(|| Error::Format {
            section: "shape",
            message: "file has no shape section".into(),
        })?;
        OVoxelGrid::from_sorted(
            self.resolution,
            self.coords.clone(),
            shape,
            self.material.clone(),
            self.transform,
        )
        .map_err(|e| Error::Format {
            section: "shape",
            message: e.to_string(),
        })
    }

    pub fn to_features(&self) -> Result<SparseFeatureGrid> {
        let (c, vals) = self.generic.as_ref().ok_or_else(|| Error::Format {
            section: "generic",
            message: "file has no generic feature section".into(),
        })?;
        SparseFeatureGrid::from_sorted(
            self.resolution,
            *c as usize,
            self.coords.clone(),
            vals.iter().map(|&v| v as f64).collect(),
        )
        .map_err(|e| Error::Format {
            section: "generic",
            message: e.to_string(),
        })
    }

    /// Sorts entries into canonical coordinate order, permuting every section alongside.
    fn canonical(&self) -> Result<OvxFile> {
        let l = self.coords.len();
        let bad = |section, n: usize| Error::Format {
            section,
            message: format!("{n} entries for {l} coordinates"),
        };
        if let Some(s) = &self.shape {
            if s.len() != l {
                return Err(bad("shape", s.len()));
            }
        }
        if let Some(m) = &self.material {
            if m.len() != l {
                return Err(bad("material", m.len()));
            }
        }
        if let Some((c, v)) = &self.generic {
            if v.len() != l * *c as usize {
                return Err(bad("generic", v.len()));
            }
        }
        let mut perm: Vec<usize> = (0..l).collect();
        perm.sort_by_key(|&i| self.coords[i]);
        if perm.windows(2).any(|w| self.coords[w[0]] == self.coords[w[1]]) {
            return Err(Error::Format {
                section: "coordinates",
                message: "duplicate coordinates".into(),
            });
        }
        let c = self.generic.as_ref().map_or(0, |g| g.0 as usize);
        Ok(OvxFile {
            resolution: self.resolution,
            coords: perm.iter().map(|&i| self.coords[i]).collect(),
            shape: self.shape.as_ref().map(|s| perm.iter().map(|&i| s[i]).collect()),
            material: self.material.as_ref().map(|m| perm.iter().map(|&i| m[i]).collect()),
            generic: self.generic.as_ref().map(|(w, v)| {
                (*w, perm.iter().flat_map(|&i| v[i * c..(i + 1) * c].iter().copied()).collect())
            }),
            transform: self.transform,
        })
    }
}

pub fn encode_ovx(file: &OvxFile) -> Result<Vec<u8>> {
    if file.resolution == 0 || file.resolution > MAX_RESOLUTION {
        return Err(Error::invalid(format!("resolution {} outside 1..={MAX_RESOLUTION}", file.resolution)));
    }
    if let Some(c) = file.coords.iter().find(|c| !c.in_grid(file.resolution)) {
        return Err(Error::invalid(format!("voxel {c:?} outside a {}^3 grid", file.resolution)));
    }
    let f = file.canonical()?;
    let l = f.coords.len();
    let mut out = Vec::with_capacity(HEADER_LEN + l * 6);
    out.extend_from_slice(&OVX_MAGIC);
    out.extend_from_slice(&OVX_VERSION.to_le_bytes());
    out.extend_from_slice(&f.resolution.to_le_bytes());
    out.extend_from_slice(&(l as u64).to_le_bytes());
    out.extend_from_slice(&f.flags().to_le_bytes());
    for c in &f.coords {
        for x in c.0 {
            out.extend_from_slice(&(x as u16).to_le_bytes());
        }
    }
    if let Some(s) = &f.shape {
        for s in s {
            for v in s.dual_vertex {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(s.flag_bits());
            out.extend_from_slice(&s.split_weight.to_le_bytes());
        }
    }
    if let Some(m) = &f.material {
        for m in m {
            for v in m.to_array() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some((c, v)) = &f.generic {
        out.extend_from_slice(&c.to_le_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    if f.flags() & FLAG_TRANSFORM != 0 {
        let t = &f.transform;
        for x in [t.scale, t.translation[0], t.translation[1], t.translation[2]] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format {
                section,
                message: format!(
                    "truncated: need {n} bytes at offset {}, {} left",
                    self.pos,
                    self.data.len() - self.pos
                ),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn f32(&mut self, section: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn f64(&mut self, section: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
}

pub fn decode_ovx(data: &[u8]) -> Result<OvxFile> {
    let fmt = |section, message: String| Error::Format { section, message };
    let mut r = Reader { data, pos: 0 };
    let magic = r.take(4, "header")?;
    if magic != OVX_MAGIC {
        return Err(fmt("header", format!("magic mismatch: {magic:?}")));
    }
    let version = r.u32("header")?;
    if version != OVX_VERSION {
        return Err(fmt("header", format!("unsupported version {version}")));
    }
    let resolution = r.u32("header")?;
    let l = u64::from_le_bytes(r.take(8, "header")?.try_into().unwrap());
    let flags = r.u32("header")?;
    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(fmt("header", format!("resolution {resolution} outside 1..={MAX_RESOLUTION}")));
    }
    if flags & !(FLAG_SHAPE | FLAG_MATERIAL | FLAG_GENERIC | FLAG_TRANSFORM) != 0 {
        return Err(fmt("header", format!("unknown flag bits {flags:#x}")));
    }
    // Every voxel costs at least 6 bytes; reject absurd counts before allocating.
    if l > (data.len() as u64) / 6 {
        return Err(fmt("coordinates", format!("truncated: {l} voxels declared in {} bytes", data.len())));
    }
    let l = l as usize;

    let raw = r.take(l * 6, "coordinates")?;
    let coords: Vec<VoxelCoord> = raw
        .chunks_exact(6)
        .map(|c| {
            VoxelCoord::new(
                u16::from_le_bytes([c[0], c[1]]) as u32,
                u16::from_le_bytes([c[2], c[3]]) as u32,
                u16::from_le_bytes([c[4], c[5]]) as u32,
            )
        })
        .collect();
    if let Some(c) = coords.iter().find(|c| !c.in_grid(resolution)) {
        return Err(fmt("coordinates", format!("voxel {c:?} outside a {resolution}^3 grid")));
    }
    if let Some(w) = coords.windows(2).find(|w| w[0] >= w[1]) {
        return Err(fmt("coordinates", format!("not strictly sorted at {:?}", w[1])));
    }

    let shape = if flags & FLAG_SHAPE != 0 {
        let mut v = Vec::with_capacity(l);
        for _ in 0..l {
            let d = [r.f32("shape")?, r.f32("shape")?, r.f32("shape")?];
            let bits = r.take(1, "shape")?[0];
            if bits >> 6 != 0 {
                return Err(fmt("shape", format!("reserved flag bits set in {bits:#x}")));
            }
            let mut s = ShapeFeature::new(d, [false; 3], r.f32("shape")?);
            s.set_flag_bits(bits);
            s.validate().map_err(|e| fmt("shape", e.to_string()))?;
            v.push(s);
        }
        Some(v)
    } else {
        None
    };
    let material = if flags & FLAG_MATERIAL != 0 {
        let mut v = Vec::with_capacity(l);
        for _ in 0..l {
            let mut a = [0f32; 6];
            for x in a.iter_mut() {
                *x = r.f32("material")?;
            }
            let m = MaterialFeature::from_array(a);
            m.validate().map_err(|e| fmt("material", e.to_string()))?;
            v.push(m);
        }
        Some(v)
    } else {
        None
    };
    let generic = if flags & FLAG_GENERIC != 0 {
        let c = r.u32("generic")?;
        if c == 0 {
            return Err(fmt("generic", "zero channel width".into()));
        }
        let n = l
            .checked_mul(c as usize)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| fmt("generic", "section size overflows".into()))?;
        let raw = r.take(n, "generic")?;
        Some((c, raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()))
    } else {
        None
    };
    let transform = if flags & FLAG_TRANSFORM != 0 {
        let t = WorldTransform {
            scale: r.f64("transform")?,
            translation: [r.f64("transform")?, r.f64("transform")?, r.f64("transform")?],
        };
        if !(t.scale > 0.0 && t.scale.is_finite()) || !t.translation.iter().all(|x| x.is_finite()) {
            return Err(fmt("transform", format!("invalid transform {t:?}")));
        }
        t
    } else {
        WorldTransform::IDENTITY
    };
    if r.pos != data.len() {
        return Err(fmt("trailer", format!("{} unexpected trailing bytes", data.len() - r.pos)));
    }
    Ok(OvxFile {
        resolution,
        coords,
        shape,
        material,
        generic,
        transform,
    })
}

pub fn read_ovx(path: &Path) -> Result<OvxFile> {
    decode_ovx(&read_file(path)?)
}

pub fn write_ovx(path: &Path, file: &OvxFile) -> Result<()> {
    write_file(path, &encode_ovx(file)?)
}

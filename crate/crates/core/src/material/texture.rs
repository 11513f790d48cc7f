use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::MaterialFeature;
use crate::io::ObjMaterial;

use super::srgb_to_linear;

#[derive(Clone, Debug, PartialEq)]
struct Level {
    width: usize,
    height: usize,
    data: Vec<[f32; 4]>,
}

/// Linear RGBA image with a box-filtered mip chain. Addressing wraps (repeat);
/// texture row 0 is the top of the image, i.e. v = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    levels: Vec<Level>,
}

impl Texture {
    pub fn from_rgba(width: usize, height: usize, data: Vec<[f32; 4]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(format!(
                "{} texels for a {width}x{height} texture",
                data.len()
            )));
        }
        let mut levels = vec![Level { width, height, data }];
        while levels.last().is_some_and(|l| l.width > 1 || l.height > 1) {
            let prev = levels.last().unwrap();
            let (w, h) = ((prev.width / 2).max(1), (prev.height / 2).max(1));
            let mut data = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let mut acc = [0f32; 4];
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let sx = (2 * x + dx).min(prev.width - 1);
                        let sy = (2 * y + dy).min(prev.height - 1);
                        let t = prev.data[sy * prev.width + sx];
                        for c in 0..4 {
                            acc[c] += t[c];
                        }
                    }
                    data.push(acc.map(|v| v * 0.25));
                }
            }
            levels.push(Level { width: w, height: h, data });
        }
        Ok(Texture { levels })
    }

    pub fn constant(value: [f32; 4]) -> Self {
        Texture::from_rgba(1, 1, vec![value]).unwrap()
    }

    /// Loads a PNG (8 or 16 bit); `srgb` decodes the color channels to linear.
    pub fn load_png(path: &Path, srgb: bool) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image {
                    path: path.to_path_buf(),
                    message: other.to_string(),
                },
            })?
            .to_rgba32f();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img
            .pixels()
            .map(|p| {
                let mut t = p.0;
                if srgb {
                    for c in t.iter_mut().take(3) {
                        *c = srgb_to_linear(*c);
                    }
                }
                t
            })
            .collect();
        Texture::from_rgba(w, h, data)
    }

    pub fn width(&self) -> usize {
        self.levels[0].width
    }

    pub fn height(&self) -> usize {
        self.levels[0].height
    }

    /// Larger of width and height, the reference size for mip selection.
    pub fn dim(&self) -> usize {
        self.width().max(self.height())
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, level: usize) -> (usize, usize) {
        let l = &self.levels[level];
        (l.width, l.height)
    }

    pub fn texel(&self, level: usize, x: usize, y: usize) -> [f32; 4] {
        let l = &self.levels[level];
        l.data[y * l.width + x]
    }

    /// Bilinear sample of one mip level.
    pub fn sample_level(&self, level: usize, uv: [f64; 2]) -> [f64; 4] {
        let l = &self.levels[level.min(self.levels.len() - 1)];
        let x = uv[0] * l.width as f64 - 0.5;
        let y = (1.0 - uv[1]) * l.height as f64 - 0.5;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let wrap = |i: f64, n: usize| (i as i64).rem_euclid(n as i64) as usize;
        let mut out = [0f64; 4];
        for (dx, dy, w) in [
            (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
            (1.0, 0.0, fx * (1.0 - fy)),
            (0.0, 1.0, (1.0 - fx) * fy),
            (1.0, 1.0, fx * fy),
        ] {
            if w == 0.0 {
                continue;
            }
            let t = l.data[wrap(y0 + dy, l.height) * l.width + wrap(x0 + dx, l.width)];
            for c in 0..4 {
                out[c] += w * t[c] as f64;
            }
        }
        out
    }

    /// Trilinear sample: bilinear on the two mips around `lod`, blended linearly.
    pub fn sample(&self, uv: [f64; 2], lod: f64) -> [f64; 4] {
        let max = (self.levels.len() - 1) as f64;
        let lod = if lod.is_finite() { lod.clamp(0.0, max) } else { 0.0 };
        let l0 = lod.floor();
        let f = lod - l0;
        let a = self.sample_level(l0 as usize, uv);
        if f == 0.0 {
            return a;
        }
        let b = self.sample_level(l0 as usize + 1, uv);
        std::array::from_fn(|c| a[c] * (1.0 - f) + b[c] * f)
    }
}

/// glTF-style material: optional maps multiplied by constant factors. Separate
/// single-channel metallic/roughness maps (red channel) take precedence over the
/// packed map (green = roughness, blue = metallic).
#[derive(Clone, Debug, PartialEq)]
pub struct TextureSet {
    pub base_color: Option<Texture>,
    pub metallic_roughness: Option<Texture>,
    pub metallic: Option<Texture>,
    pub roughness: Option<Texture>,
    pub base_color_factor: [f32; 4],
    pub metallic_factor: f32,
    pub roughness_factor: f32,
}

impl Default for TextureSet {
    fn default() -> Self {
        TextureSet {
            base_color: None,
            metallic_roughness: None,
            metallic: None,
            roughness: None,
            base_color_factor: [1.0; 4],
            metallic_factor: 0.0,
            roughness_factor: 1.0,
        }
    }
}

impl TextureSet {
    /// Untextured material with the given attributes.
    pub fn uniform(m: &MaterialFeature) -> Self {
        TextureSet {
            base_color_factor: [m.base_color[0], m.base_color[1], m.base_color[2], m.opacity],
            metallic_factor: m.metallic,
            roughness_factor: m.roughness,
            ..Default::default()
        }
    }

    pub fn from_obj_material(m: &ObjMaterial) -> Result<Self> {
        let load = |p: &Option<std::path::PathBuf>, srgb| p.as_deref().map(|p| Texture::load_png(p, srgb)).transpose();
        let metallic = load(&m.metallic_map, false)?;
        let roughness = load(&m.roughness_map, false)?;
        Ok(TextureSet {
            base_color: load(&m.base_color_map, true)?,
            metallic_roughness: None,
            // A map replaces the scalar rather than scaling it, as MTL has no factor semantics.
            metallic_factor: if metallic.is_some() { 1.0 } else { m.metallic },
            roughness_factor: if roughness.is_some() { 1.0 } else { m.roughness },
            metallic,
            roughness,
            base_color_factor: m.base_color,
        })
    }

    pub fn is_textured(&self) -> bool {
        self.base_color.is_some() || self.metallic_roughness.is_some() || self.metallic.is_some() || self.roughness.is_some()
    }

    /// Samples all attributes at `uv`. `lod` maps a texture's reference size to a mip level.
    /// Without UVs only the factors are used. Results are clamped to `[0, 1]`.
    pub fn sample(&self, uv: Option<[f64; 2]>, lod: impl Fn(usize) -> f64) -> [f64; 6] {
        let f = self.base_color_factor;
        let mut rgba = [f[0] as f64, f[1] as f64, f[2] as f64, f[3] as f64];
        let mut metallic = self.metallic_factor as f64;
        let mut roughness = self.roughness_factor as f64;
        if let Some(uv) = uv {
            let s = |t: &Texture| t.sample(uv, lod(t.dim()));
            if let Some(t) = &self.base_color {
                let v = s(t);
                for c in 0..4 {
                    rgba[c] *= v[c];
                }
            }
            if let Some(t) = &self.metallic_roughness {
                let v = s(t);
                if self.roughness.is_none() {
                    roughness *= v[1];
                }
                if self.metallic.is_none() {
                    metallic *= v[2];
                }
            }
            if let Some(t) = &self.roughness {
                roughness *= s(t)[0];
            }
            if let Some(t) = &self.metallic {
                metallic *= s(t)[0];
            }
        }
        [rgba[0], rgba[1], rgba[2], metallic, roughness, rgba[3]].map(|v| v.clamp(0.0, 1.0))
    }
}

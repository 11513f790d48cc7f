//! Sparse voxel data model: coordinates, canonical edges and the O-Voxel container.

use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Largest supported resolution (coordinates are stored as `u16`).
pub const MAX_RESOLUTION: u32 = 65535;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    /// The two remaining axes in cyclic order, so that `u × w = self`.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

/// Integer voxel coordinate `(i, j, k)`; voxel `(i, j, k)` spans `[i/N, (i+1)/N] × …`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VoxelCoord(pub [u32; 3]);

impl VoxelCoord {
    pub const fn new(i: u32, j: u32, k: u32) -> Self {
        VoxelCoord([i, j, k])
    }

    pub fn i(&self) -> u32 {
        self.0[0]
    }
    pub fn j(&self) -> u32 {
        self.0[1]
    }
    pub fn k(&self) -> u32 {
        self.0[2]
    }

    /// 16 bits per axis; numeric order of the key equals lexicographic coordinate order.
    pub fn pack(&self) -> u64 {
        ((self.0[0] as u64) << 32) | ((self.0[1] as u64) << 16) | self.0[2] as u64
    }

    pub fn unpack(key: u64) -> Self {
        VoxelCoord([
            ((key >> 32) & 0xffff) as u32,
            ((key >> 16) & 0xffff) as u32,
            (key & 0xffff) as u32,
        ])
    }

    pub fn in_grid(&self, resolution: u32) -> bool {
        self.0.iter().all(|&c| c < resolution)
    }

    /// Signed offset, `None` if any component leaves `[0, resolution)`.
    pub fn offset(&self, d: [i64; 3], resolution: u32) -> Option<VoxelCoord> {
        let mut out = [0u32; 3];
        for a in 0..3 {
            let c = self.0[a] as i64 + d[a];
            if c < 0 || c >= resolution as i64 {
                return None;
            }
            out[a] = c as u32;
        }
        Some(VoxelCoord(out))
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.0[0] as f64, self.0[1] as f64, self.0[2] as f64)
    }
}

impl fmt::Debug for VoxelCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl From<[u32; 3]> for VoxelCoord {
    fn from(c: [u32; 3]) -> Self {
        VoxelCoord(c)
    }
}

/// A primal grid edge, identified by its minimum-corner voxel and direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridEdge {
    pub base: VoxelCoord,
    pub axis: Axis,
}

impl GridEdge {
    pub fn new(base: VoxelCoord, axis: Axis) -> Self {
        GridEdge { base, axis }
    }

    /// Sort key consistent with the derived `Ord`.
    pub fn key(&self) -> u64 {
        (self.base.pack() << 2) | self.axis as u64
    }

    pub fn from_key(key: u64) -> Self {
        GridEdge {
            base: VoxelCoord::unpack(key >> 2),
            axis: Axis::from_index((key & 3) as usize),
        }
    }

    /// World-space endpoints in the unit frame of a grid with `resolution` cells.
    pub fn endpoints(&self, resolution: u32) -> (Vec3, Vec3) {
        let n = resolution as f64;
        let a = self.base.as_vec() / n;
        (a, a + self.axis.unit() / n)
    }

    /// Voxels sharing the edge in cyclic order around it (see [`edge_neighbors`]).
    /// Entries outside the grid are `None`.
    pub fn ring(&self, resolution: u32) -> [Option<VoxelCoord>; 4] {
        let (u, w) = self.axis.others();
        let mut du = [0i64; 3];
        du[u.index()] = -1;
        let mut dw = [0i64; 3];
        dw[w.index()] = -1;
        let mut duw = [0i64; 3];
        duw[u.index()] = -1;
        duw[w.index()] = -1;
        let b = &self.base;
        [
            b.offset([0, 0, 0], resolution),
            b.offset(du, resolution),
            b.offset(duw, resolution),
            b.offset(dw, resolution),
        ]
    }
}

/// Voxels sharing `edge`; out-of-range neighbors are silently omitted.
///
/// For an X edge these are `base`, `base-(0,1,0)`, `base-(0,1,1)`, `base-(0,0,1)`,
/// with the analogous cyclic pattern for Y and Z.
pub fn edge_neighbors(edge: &GridEdge, resolution: u32) -> Vec<VoxelCoord> {
    edge.ring(resolution).into_iter().flatten().collect()
}

/// The three edges owned by a voxel: those leaving its minimum corner along +X, +Y, +Z.
pub fn canonical_edges(p: VoxelCoord) -> [GridEdge; 3] {
    Axis::ALL.map(|a| GridEdge::new(p, a))
}

/// Per-voxel geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeFeature {
    /// Dual vertex in voxel-local coordinates, each component in `[0, 1]`.
    pub dual_vertex: [f32; 3],
    /// Intersection flags for the canonical +X/+Y/+Z edges.
    pub edge_flags: [bool; 3],
    /// For each flagged canonical edge: the mean surface normal points toward
    /// the negative axis. Drives quad winding on extraction.
    pub edge_normal_neg: [bool; 3],
    pub split_weight: f32,
}

impl ShapeFeature {
    pub fn new(dual_vertex: [f32; 3], edge_flags: [bool; 3], split_weight: f32) -> Self {
        ShapeFeature {
            dual_vertex,
            edge_flags,
            edge_normal_neg: [false; 3],
            split_weight,
        }
    }

    /// Packed flag byte: bits 0..3 intersection flags, bits 3..6 normal orientation.
    pub fn flag_bits(&self) -> u8 {
        let mut b = 0u8;
        for a in 0..3 {
            b |= (self.edge_flags[a] as u8) << a;
            b |= (self.edge_normal_neg[a] as u8) << (a + 3);
        }
        b
    }

    pub fn set_flag_bits(&mut self, bits: u8) {
        for a in 0..3 {
            self.edge_flags[a] = bits & (1 << a) != 0;
            self.edge_normal_neg[a] = bits & (1 << (a + 3)) != 0;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dual_vertex.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::InvalidState(format!(
                "dual vertex {:?} outside the unit voxel",
                self.dual_vertex
            )));
        }
        if !(self.split_weight > 0.0 && self.split_weight.is_finite()) {
            return Err(Error::InvalidState(format!(
                "split weight {} must be positive",
                self.split_weight
            )));
        }
        Ok(())
    }
}

/// PBR metallic-roughness attributes of a voxel, all channels in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialFeature {
    pub base_color: [f32; 3],
    pub metallic: f32,
    pub roughness: f32,
    pub opacity: f32,
}

impl MaterialFeature {
    pub fn new(base_color: [f32; 3], metallic: f32, roughness: f32, opacity: f32) -> Self {
        MaterialFeature {
            base_color,
            metallic,
            roughness,
            opacity,
        }
    }

    pub fn to_array(&self) -> [f32; 6] {
        let c = self.base_color;
        [c[0], c[1], c[2], self.metallic, self.roughness, self.opacity]
    }

    pub fn from_array(a: [f32; 6]) -> Self {
        MaterialFeature::new([a[0], a[1], a[2]], a[3], a[4], a[5])
    }

    pub fn clamped(&self) -> Self {
        let c = |x: f32| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        MaterialFeature::from_array(self.to_array().map(c))
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|c| (0.0..=1.0).contains(c)) {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "material channel outside [0, 1]: {self:?}"
            )))
        }
    }
}

/// Uniform scale + translation taking asset coordinates into the unit frame:
/// `unit = asset * scale + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldTransform {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl Default for WorldTransform {
    fn default() -> Self {
        WorldTransform::IDENTITY
    }
}

impl WorldTransform {
    pub const IDENTITY: WorldTransform = WorldTransform {
        scale: 1.0,
        translation: [0.0; 3],
    };

    pub fn is_identity(&self) -> bool {
        *self == WorldTransform::IDENTITY
    }

    pub fn to_unit(&self, p: &Vec3) -> Vec3 {
        p * self.scale + Vec3::from(self.translation)
    }

    pub fn from_unit(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.translation)) / self.scale
    }
}

/// Sparse O-Voxel grid: active coordinates with their shape features and,
/// optionally, material features.
///
/// Entries are kept sorted by coordinate; a hash index on the packed
/// coordinate gives O(1) lookups. Immutable after construction.
#[derive(Clone, Debug)]
pub struct OVoxelGrid {
    resolution: u32,
    coords: Vec<VoxelCoord>,
    shape: Vec<ShapeFeature>,
    material: Option<Vec<MaterialFeature>>,
    transform: WorldTransform,
    index: FxHashMap<u64, u32>,
}

impl PartialEq for OVoxelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self.coords == other.coords
            && self.shape == other.shape
            && self.material == other.material
            && self.transform == other.transform
    }
}

fn check_resolution(resolution: u32) -> Result<()> {
    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(Error::invalid(format!(
            "resolution {resolution} outside 1..={MAX_RESOLUTION}"
        )));
    }
    Ok(())
}

pub(crate) fn build_index(coords: &[VoxelCoord]) -> FxHashMap<u64, u32> {
    let mut index = FxHashMap::with_capacity_and_hasher(coords.len(), Default::default());
    for (i, c) in coords.iter().enumerate() {
        index.insert(c.pack(), i as u32);
    }
    index
}

impl OVoxelGrid {
    pub fn empty(resolution: u32) -> Result<Self> {
        Self::from_entries(resolution, Vec::new(), WorldTransform::IDENTITY)
    }

    /// Builds a grid from unsorted entries. Duplicate or out-of-range coordinates are rejected.
    pub fn from_entries(
        resolution: u32,
        mut entries: Vec<(VoxelCoord, ShapeFeature)>,
        transform: WorldTransform,
    ) -> Result<Self> {
        check_resolution(resolution)?;
        entries.sort_by_key(|e| e.0);
        let (coords, shape): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self::from_sorted(resolution, coords, shape, None, transform)
    }

    /// Builds a grid from coordinate-sorted parallel arrays, validating every invariant.
    pub fn from_sorted(
        resolution: u32,
        coords: Vec<VoxelCoord>,
        shape: Vec<ShapeFeature>,
        material: Option<Vec<MaterialFeature>>,
        transform: WorldTransform,
    ) -> Result<Self> {
        check_resolution(resolution)?;
        if coords.len() != shape.len() {
            return Err(Error::InvalidState(format!(
                "{} coordinates but {} shape features",
                coords.len(),
                shape.len()
            )));
        }
        for w in coords.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidState(format!(
                    "coordinates not strictly increasing at {:?}",
                    w[1]
                )));
            }
        }
        if let Some(c) = coords.iter().find(|c| !c.in_grid(resolution)) {
            return Err(Error::InvalidState(format!(
                "coordinate {c:?} outside a {resolution}^3 grid"
            )));
        }
        for s in &shape {
            s.validate()?;
        }
        if !(transform.scale > 0.0 && transform.scale.is_finite()) {
            return Err(Error::InvalidState(format!(
                "world transform scale {} must be positive",
                transform.scale
            )));
        }
        let mut grid = OVoxelGrid {
            resolution,
            index: build_index(&coords),
            coords,
            shape,
            material: None,
            transform,
        };
        if let Some(m) = material {
            grid = grid.with_materials(m)?;
        }
        Ok(grid)
    }

    /// Attaches one material per active voxel, in coordinate order.
    pub fn with_materials(mut self, material: Vec<MaterialFeature>) -> Result<Self> {
        if material.len() != self.coords.len() {
            return Err(Error::InvalidState(format!(
                "{} materials for {} voxels",
                material.len(),
                self.coords.len()
            )));
        }
        for m in &material {
            m.validate()?;
        }
        self.material = Some(material);
        Ok(self)
    }

    pub fn without_materials(mut self) -> Self {
        self.material = None;
        self
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn voxel_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn transform(&self) -> &WorldTransform {
        &self.transform
    }

    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn shapes(&self) -> &[ShapeFeature] {
        &self.shape
    }

    pub fn materials(&self) -> Option<&[MaterialFeature]> {
        self.material.as_deref()
    }

    pub fn has_materials(&self) -> bool {
        self.material.is_some()
    }

    /// Position of `c` in the sorted entry arrays, `None` when inactive.
    pub fn index_of(&self, c: &VoxelCoord) -> Option<usize> {
        if !c.in_grid(self.resolution) {
            return None;
        }
        self.index.get(&c.pack()).map(|&i| i as usize)
    }

    pub fn is_active(&self, c: &VoxelCoord) -> bool {
        self.index_of(c).is_some()
    }

    pub fn shape(&self, c: &VoxelCoord) -> Option<&ShapeFeature> {
        self.index_of(c).map(|i| &self.shape[i])
    }

    pub fn material(&self, c: &VoxelCoord) -> Option<&MaterialFeature> {
        let m = self.material.as_ref()?;
        self.index_of(c).map(|i| &m[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (VoxelCoord, &ShapeFeature)> + '_ {
        self.coords.iter().copied().zip(self.shape.iter())
    }

    /// Dual vertex of entry `idx` in the unit frame.
    pub fn dual_vertex_unit(&self, idx: usize) -> Vec3 {
        let v = self.shape[idx].dual_vertex;
        (self.coords[idx].as_vec() + Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64))
            / self.resolution as f64
    }

    /// Inclusive min/max of active coordinates.
    pub fn bounds(&self) -> Option<(VoxelCoord, VoxelCoord)> {
        let first = *self.coords.first()?;
        let (mut lo, mut hi) = (first.0, first.0);
        for c in &self.coords {
            for a in 0..3 {
                lo[a] = lo[a].min(c.0[a]);
                hi[a] = hi[a].max(c.0[a]);
            }
        }
        Some((VoxelCoord(lo), VoxelCoord(hi)))
    }
}

/// Floor-divides active coordinates by `factor` and deduplicates.
///
/// The result is sorted; it is the coordinate set of latent tokens for a spatial
/// compression of `factor`.
pub fn downsample_coords(coords: &[VoxelCoord], resolution: u32, factor: u32) -> Result<Vec<VoxelCoord>> {
    if factor == 0 || resolution % factor != 0 {
        return Err(Error::invalid(format!(
            "downsample factor {factor} does not divide resolution {resolution}"
        )));
    }
    let mut seen = FxHashSet::default();
    let mut out: Vec<VoxelCoord> = coords
        .iter()
        .map(|c| VoxelCoord(c.0.map(|x| x / factor)))
        .filter(|c| seen.insert(c.pack()))
        .collect();
    out.sort_unstable();
    Ok(out)
}

pub fn downsample_structure(grid: &OVoxelGrid, factor: u32) -> Result<Vec<VoxelCoord>> {
    downsample_coords(grid.coords(), grid.resolution(), factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn sf() -> ShapeFeature {
        ShapeFeature::new([0.5; 3], [false; 3], 0.5)
    }

    #[test]
    fn edge_neighbors_examples() {
        let e = GridEdge::new(VoxelCoord::new(3, 3, 3), Axis::X);
        let got: BTreeSet<_> = edge_neighbors(&e, 8).into_iter().collect();
        let want: BTreeSet<_> = [(3, 3, 3), (3, 2, 3), (3, 3, 2), (3, 2, 2)]
            .into_iter()
            .map(|(i, j, k)| VoxelCoord::new(i, j, k))
            .collect();
        assert_eq!(got, want);

        let e = GridEdge::new(VoxelCoord::new(0, 0, 0), Axis::Z);
        assert_eq!(edge_neighbors(&e, 8), vec![VoxelCoord::new(0, 0, 0)]);
    }

    /// Closed voxel cube contains the segment (both endpoints); brute force over all voxels.
    fn containing_voxels(edge: &GridEdge, n: u32) -> BTreeSet<VoxelCoord> {
        let (a, b) = edge.endpoints(n);
        let nf = n as f64;
        let mut out = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lo = Vec3::new(i as f64, j as f64, k as f64) / nf;
                    let hi = lo.add_scalar(1.0 / nf);
                    let inside = |p: &Vec3| (0..3).all(|x| p[x] >= lo[x] && p[x] <= hi[x]);
                    if inside(&a) && inside(&b) {
                        out.insert(VoxelCoord::new(i, j, k));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn edge_neighbors_match_containment_oracle() {
        let e = GridEdge::new(VoxelCoord::new(1, 1, 1), Axis::Y);
        let got: BTreeSet<_> = edge_neighbors(&e, 4).into_iter().collect();
        assert_eq!(got.len(), 4);
        assert_eq!(got, containing_voxels(&e, 4));

        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    for a in Axis::ALL {
                        let e = GridEdge::new(VoxelCoord::new(x, y, z), a);
                        let got: BTreeSet<_> = edge_neighbors(&e, 4).into_iter().collect();
                        assert_eq!(got, containing_voxels(&e, 4), "{e:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_edges_examples() {
        let e = canonical_edges(VoxelCoord::new(5, 1, 2));
        assert!(e.iter().all(|e| e.base == VoxelCoord::new(5, 1, 2)));
        assert_eq!(e.map(|e| e.axis), [Axis::X, Axis::Y, Axis::Z]);
    }

    #[test]
    fn canonical_edges_cover_every_edge_once() {
        // Enumerate all lattice edges as point pairs, independently of the encoding.
        let n = 4u32;
        let mut counts: FxHashMap<([u32; 3], [u32; 3]), u32> = FxHashMap::default();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for e in canonical_edges(VoxelCoord::new(x, y, z)) {
                        let a = e.base.0;
                        let mut b = a;
                        b[e.axis.index()] += 1;
                        *counts.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
        // Every edge whose minimum corner lies inside the grid is owned exactly once.
        let mut expected = 0;
        for x in 0..=n {
            for y in 0..=n {
                for z in 0..=n {
                    for a in 0..3 {
                        let p = [x, y, z];
                        let mut q = p;
                        q[a] += 1;
                        if p.iter().all(|&c| c < n) {
                            expected += 1;
                            assert_eq!(counts.get(&(p, q)), Some(&1));
                        } else {
                            assert!(!counts.contains_key(&(p, q)));
                        }
                    }
                }
            }
        }
        assert_eq!(counts.len(), expected);
    }

    /// q ∈ edge_neighbors(e) ⇔ e is one of the 12 edges of voxel q.
    #[test]
    fn neighbors_and_incidence_agree() {
        let n = 4u32;
        let incident = |q: VoxelCoord, e: &GridEdge| {
            let (u, w) = e.axis.others();
            let b = e.base.0;
            let q = q.0;
            q[e.axis.index()] == b[e.axis.index()]
                && (b[u.index()] == q[u.index()] || b[u.index()] == q[u.index()] + 1)
                && (b[w.index()] == q[w.index()] || b[w.index()] == q[w.index()] + 1)
        };
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for a in Axis::ALL {
                        let e = GridEdge::new(VoxelCoord::new(x, y, z), a);
                        let nb = edge_neighbors(&e, n);
                        for qx in 0..n {
                            for qy in 0..n {
                                for qz in 0..n {
                                    let q = VoxelCoord::new(qx, qy, qz);
                                    assert_eq!(nb.contains(&q), incident(q, &e));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn downsample_examples() {
        let g = OVoxelGrid::from_entries(
            32,
            vec![(VoxelCoord::new(0, 0, 0), sf()), (VoxelCoord::new(15, 15, 15), sf())],
            WorldTransform::IDENTITY,
        )
        .unwrap();
        assert_eq!(downsample_structure(&g, 16).unwrap(), vec![VoxelCoord::new(0, 0, 0)]);

        let g = OVoxelGrid::from_entries(
            32,
            vec![(VoxelCoord::new(0, 0, 0), sf()), (VoxelCoord::new(16, 0, 0), sf())],
            WorldTransform::IDENTITY,
        )
        .unwrap();
        assert_eq!(
            downsample_structure(&g, 16).unwrap(),
            vec![VoxelCoord::new(0, 0, 0), VoxelCoord::new(1, 0, 0)]
        );
        assert!(matches!(downsample_structure(&g, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_rejects_bad_entries() {
        let dup = vec![(VoxelCoord::new(1, 1, 1), sf()), (VoxelCoord::new(1, 1, 1), sf())];
        assert!(OVoxelGrid::from_entries(4, dup, WorldTransform::IDENTITY).is_err());
        let out = vec![(VoxelCoord::new(4, 0, 0), sf())];
        assert!(OVoxelGrid::from_entries(4, out, WorldTransform::IDENTITY).is_err());
        let mut bad = sf();
        bad.dual_vertex[1] = 1.5;
        assert!(OVoxelGrid::from_entries(4, vec![(VoxelCoord::new(0, 0, 0), bad)], WorldTransform::IDENTITY).is_err());
        bad = sf();
        bad.split_weight = 0.0;
        assert!(OVoxelGrid::from_entries(4, vec![(VoxelCoord::new(0, 0, 0), bad)], WorldTransform::IDENTITY).is_err());
    }

    #[test]
    fn lookups_and_materials() {
        let g = OVoxelGrid::from_entries(
            8,
            vec![(VoxelCoord::new(2, 3, 4), sf()), (VoxelCoord::new(0, 7, 1), sf())],
            WorldTransform::IDENTITY,
        )
        .unwrap();
        assert_eq!(g.coords()[0], VoxelCoord::new(0, 7, 1));
        assert!(g.is_active(&VoxelCoord::new(2, 3, 4)));
        assert!(!g.is_active(&VoxelCoord::new(2, 3, 5)));
        assert!(g.material(&VoxelCoord::new(2, 3, 4)).is_none());
        let m = MaterialFeature::new([0.1, 0.2, 0.3], 0.0, 1.0, 1.0);
        assert!(g.clone().with_materials(vec![m]).is_err());
        let bad = MaterialFeature::new([1.1, 0.2, 0.3], 0.0, 1.0, 1.0);
        assert!(g.clone().with_materials(vec![m, bad]).is_err());
        let g = g.with_materials(vec![m, m]).unwrap();
        assert_eq!(g.material(&VoxelCoord::new(2, 3, 4)), Some(&m));
    }

    #[test]
    fn flag_bits_round_trip() {
        let mut s = sf();
        s.edge_flags = [true, false, true];
        s.edge_normal_neg = [false, true, true];
        let mut t = sf();
        t.set_flag_bits(s.flag_bits());
        assert_eq!(s, t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coords(n: u32) -> impl Strategy<Value = Vec<VoxelCoord>> {
            proptest::collection::vec((0..n, 0..n, 0..n), 0..200)
                .prop_map(|v| v.into_iter().map(|(i, j, k)| VoxelCoord::new(i, j, k)).collect())
        }

        proptest! {
            #[test]
            fn downsample_composes(cs in coords(64), a in prop::sample::select(vec![1u32, 2, 4]), b in prop::sample::select(vec![1u32, 2, 4, 8])) {
                let ab = downsample_coords(&cs, 64, a * b).unwrap();
                let first = downsample_coords(&cs, 64, a).unwrap();
                let two = downsample_coords(&first, 64 / a, b).unwrap();
                prop_assert_eq!(ab, two);
            }

            #[test]
            fn token_count_bounds(cs in coords(64)) {
                let mut uniq = cs.clone();
                uniq.sort();
                uniq.dedup();
                let t = downsample_coords(&uniq, 64, 16).unwrap().len();
                prop_assert!(t <= uniq.len());
                prop_assert!(t * 16 * 16 * 16 >= uniq.len());
            }

            #[test]
            fn pack_round_trip(i in 0u32..65535, j in 0u32..65535, k in 0u32..65535) {
                let c = VoxelCoord::new(i, j, k);
                prop_assert_eq!(VoxelCoord::unpack(c.pack()), c);
            }
        }
    }
}

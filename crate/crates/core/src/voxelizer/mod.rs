//! Mesh → O-Voxel shape conversion.
//!
//! Grid edges crossed by the mesh activate their (up to four) neighboring
//! voxels. Each active voxel accumulates a QEF from the Hermite planes of its
//! incident edges, from boundary lines of the mesh passing through it, and a
//! regularizing pull toward the mean crossing point; the minimizer inside the
//! voxel becomes its dual vertex. Everything is accumulated in voxel-local
//! coordinates (lattice units relative to the voxel's minimum corner).

mod hermite;
mod qef;

pub use hermite::{
    boundary_edge_indices, boundary_edges, find_edge_intersections, HermiteData, HermiteSample,
};
pub use qef::{QefAccumulator, SolveOutcome};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geom::{segment_intersects_aabb, Aabb, Vec3};
use crate::grid::{OVoxelGrid, ShapeFeature, VoxelCoord, WorldTransform, MAX_RESOLUTION};
use crate::mesh::{fit_unit_cube, TriangleMesh};

/// Free margin, in voxels, kept around a normalized mesh.
pub const NORMALIZE_MARGIN_VOXELS: f64 = 2.0;

/// Splitting weight assigned to every voxel.
pub const DEFAULT_SPLIT_WEIGHT: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelizeConfig {
    pub resolution: u32,
    pub lambda_bound: f64,
    pub lambda_reg: f64,
    /// Tie tolerance in unit-frame distance for crossings on grid planes.
    pub epsilon: f64,
    /// Fit the mesh into the unit cube (with a two-voxel margin) before voxelizing.
    /// When false the mesh must already lie inside `[0, 1]³`.
    pub normalize: bool,
}

impl VoxelizeConfig {
    pub fn new(resolution: u32) -> Self {
        VoxelizeConfig {
            resolution,
            lambda_bound: 1.0,
            lambda_reg: 1e-3,
            epsilon: 1e-9,
            normalize: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution > MAX_RESOLUTION {
            return Err(Error::invalid(format!(
                "resolution {} outside 1..={MAX_RESOLUTION}",
                self.resolution
            )));
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_reg must be positive, got {}",
                self.lambda_reg
            )));
        }
        if !(self.lambda_bound >= 0.0 && self.lambda_bound.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_bound must be nonnegative, got {}",
                self.lambda_bound
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5 / self.resolution as f64) {
            return Err(Error::invalid(format!(
                "epsilon {} must be positive and below half a voxel",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Counters describing one voxelization run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VoxelizeStats {
    pub triangles: usize,
    pub degenerate_triangles: usize,
    pub intersected_edges: usize,
    pub hermite_samples: usize,
    pub out_of_frame_crossings: usize,
    pub boundary_segments: usize,
    /// Number of (voxel, boundary segment) line terms added.
    pub line_terms: usize,
    pub interior_solves: usize,
    pub boundary_solves: usize,
    pub fallback_solves: usize,
}

/// Transform that brings `mesh` into the unit frame under `cfg`, after checking the result fits.
pub fn frame_transform(mesh: &TriangleMesh, cfg: &VoxelizeConfig) -> Result<WorldTransform> {
    let bounds = mesh.bounds();
    if cfg.normalize {
        return Ok(fit_unit_cube(
            &bounds,
            NORMALIZE_MARGIN_VOXELS / cfg.resolution as f64,
        ));
    }
    if !bounds.is_empty() {
        for a in 0..3 {
            let name = ["x", "y", "z"][a];
            if bounds.min[a] < 0.0 {
                return Err(Error::invalid(format!(
                    "mesh {name} minimum {} lies outside the unit frame [0, 1]",
                    bounds.min[a]
                )));
            }
            if bounds.max[a] > 1.0 {
                return Err(Error::invalid(format!(
                    "mesh {name} maximum {} lies outside the unit frame [0, 1]",
                    bounds.max[a]
                )));
            }
        }
    }
    Ok(WorldTransform::IDENTITY)
}

/// Voxels (closed cubes, lattice units) touched by the segment `a`–`b`, in slab order.
pub(crate) fn segment_voxels(a: &Vec3, b: &Vec3, resolution: u32, out: &mut Vec<VoxelCoord>) {
    let d = b - a;
    let m = d.iamax();
    let n = resolution as i64;
    let lo_m = a[m].min(b[m]);
    let hi_m = a[m].max(b[m]);
    let s0 = ((lo_m.ceil() as i64) - 1).max(0);
    let s1 = (hi_m.floor() as i64).min(n - 1);
    let others = [(m + 1) % 3, (m + 2) % 3];
    const SLACK: f64 = 1e-9;
    for s in s0..=s1 {
        let (t0, t1) = if d[m] == 0.0 {
            (0.0, 1.0)
        } else {
            let ta = (s as f64 - a[m]) / d[m];
            let tb = (s as f64 + 1.0 - a[m]) / d[m];
            (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
        };
        if t0 > t1 {
            continue;
        }
        let p0 = a + d * t0;
        let p1 = a + d * t1;
        let range = |ax: usize| {
            let lo = p0[ax].min(p1[ax]) - SLACK;
            let hi = p0[ax].max(p1[ax]) + SLACK;
            (((lo.ceil() as i64) - 1).max(0), (hi.floor() as i64).min(n - 1))
        };
        let (j0, j1) = range(others[0]);
        let (k0, k1) = range(others[1]);
        for j in j0..=j1 {
            for k in k0..=k1 {
                let mut c = [0u32; 3];
                c[m] = s as u32;
                c[others[0]] = j as u32;
                c[others[1]] = k as u32;
                let lo = Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64);
                if segment_intersects_aabb(a, b, &Aabb::new(lo, lo.add_scalar(1.0))) {
                    out.push(VoxelCoord(c));
                }
            }
        }
    }
}

pub fn voxelize(mesh: &TriangleMesh, cfg: &VoxelizeConfig) -> Result<OVoxelGrid> {
    voxelize_with_stats(mesh, cfg).map(|(g, _)| g)
}

pub fn voxelize_with_stats(
    mesh: &TriangleMesh,
    cfg: &VoxelizeConfig,
) -> Result<(OVoxelGrid, VoxelizeStats)> {
    cfg.validate()?;
    mesh.validate()?;
    let n = cfg.resolution;
    let nf = n as f64;
    let transform = frame_transform(mesh, cfg)?;
    let unit_mesh;
    let mesh = if transform.is_identity() {
        mesh
    } else {
        unit_mesh = mesh.transformed(|p| transform.to_unit(p));
        &unit_mesh
    };

    let mut stats = VoxelizeStats {
        triangles: mesh.triangles.len(),
        ..Default::default()
    };

    let hermite = find_edge_intersections(mesh, n, cfg.epsilon);
    stats.degenerate_triangles = hermite.degenerate_triangles;
    stats.intersected_edges = hermite.edge_count();
    stats.hermite_samples = hermite.sample_count();
    stats.out_of_frame_crossings = hermite.out_of_frame;

    // (voxel, edge) incidences; a stable sort keeps edges in key order within each voxel.
    let mut incidences: Vec<(u64, u32)> = Vec::with_capacity(hermite.edge_count() * 4);
    for (ei, e) in hermite.edges().iter().enumerate() {
        for v in e.ring(n).into_iter().flatten() {
            incidences.push((v.pack(), ei as u32));
        }
    }
    incidences.par_sort_by_key(|x| x.0);

    let mut keys: Vec<u64> = Vec::new();
    let mut edge_ranges: Vec<usize> = Vec::new();
    for (i, (k, _)) in incidences.iter().enumerate() {
        if keys.last() != Some(k) {
            keys.push(*k);
            edge_ranges.push(i);
        }
    }
    edge_ranges.push(incidences.len());
    let index: FxHashMap<u64, u32> = keys
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i as u32))
        .collect();

    // Boundary lines, in lattice units.
    let boundary = boundary_edge_indices(mesh);
    stats.boundary_segments = boundary.len();
    let mut line_hits: Vec<(u32, u32)> = boundary
        .par_iter()
        .enumerate()
        .flat_map_iter(|(si, [a, b])| {
            let pa = mesh.vertices[*a as usize] * nf;
            let pb = mesh.vertices[*b as usize] * nf;
            let mut cells = Vec::new();
            segment_voxels(&pa, &pb, n, &mut cells);
            cells
                .into_iter()
                .filter_map(|c| index.get(&c.pack()).map(|&vi| (vi, si as u32)))
                .collect::<Vec<_>>()
        })
        .collect();
    line_hits.par_sort_by_key(|x| x.0);
    stats.line_terms = line_hits.len();
    let mut line_ranges = vec![0usize; keys.len() + 1];
    for (vi, _) in &line_hits {
        line_ranges[*vi as usize + 1] += 1;
    }
    for i in 0..keys.len() {
        line_ranges[i + 1] += line_ranges[i];
    }

    let lo = Vec3::zeros();
    let hi = Vec3::repeat(1.0);
    let solved: Vec<(ShapeFeature, SolveOutcome)> = (0..keys.len())
        .into_par_iter()
        .map(|vi| {
            let coord = VoxelCoord::unpack(keys[vi]);
            let origin = coord.as_vec();
            let mut acc = QefAccumulator::new();
            let mut flags = [false; 3];
            let mut neg = [false; 3];
            for &(_, ei) in &incidences[edge_ranges[vi]..edge_ranges[vi + 1]] {
                let ei = ei as usize;
                let edge = hermite.edges()[ei];
                let samples = hermite.samples_of(ei);
                let mut nsum = Vec3::zeros();
                for s in samples {
                    acc.add_plane(&(s.point * nf - origin), &s.normal);
                    nsum += s.normal;
                }
                if edge.base == coord {
                    let a = edge.axis.index();
                    flags[a] = true;
                    neg[a] = nsum[a] < 0.0;
                }
            }
            for &(_, si) in &line_hits[line_ranges[vi]..line_ranges[vi + 1]] {
                let [a, b] = boundary[si as usize];
                let pa = mesh.vertices[a as usize] * nf;
                let pb = mesh.vertices[b as usize] * nf;
                let dir = (pb - pa).normalize();
                acc.add_line(&(pa - origin), &dir, cfg.lambda_bound);
            }
            if let Some(qbar) = acc.mean_point() {
                acc.add_point(&qbar, cfg.lambda_reg);
            }
            let (v, outcome) = acc.minimize_in_box(&lo, &hi);
            let dual = [v.x, v.y, v.z].map(|c| (c as f32).clamp(0.0, 1.0));
            let mut feature = ShapeFeature::new(dual, flags, DEFAULT_SPLIT_WEIGHT);
            feature.edge_normal_neg = neg;
            (feature, outcome)
        })
        .collect();

    let mut shapes = Vec::with_capacity(solved.len());
    for (f, o) in solved {
        match o {
            SolveOutcome::Interior => stats.interior_solves += 1,
            SolveOutcome::Boundary => stats.boundary_solves += 1,
            SolveOutcome::Fallback => stats.fallback_solves += 1,
        }
        shapes.push(f);
    }
    let coords = keys.into_iter().map(VoxelCoord::unpack).collect();
    let grid = OVoxelGrid::from_sorted(n, coords, shapes, None, transform)?;
    Ok((grid, stats))
}

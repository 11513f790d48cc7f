//! Reconstruction metrics: mesh distance, Chamfer distance and F-scores.
//!
//! All distances are squared Euclidean distances and inputs are expected to be
//! normalized into the unit cube already.

mod shell;

pub use shell::{fibonacci_directions, outer_shell_points, ShellConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::spatial::{KdTree, MeshBvh};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_VIEWS: usize = 100;
pub const TAU_MESH_DISTANCE: f64 = 1e-8;
pub const TAU_CHAMFER: f64 = 1e-6;

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    mesh.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::invalid("mesh has zero surface area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = rng.random::<f64>() * total;
        let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        if mesh.triangle_area(t) == 0.0 {
            continue;
        }
        let s = r1.sqrt();
        let [a, b, c] = mesh.corners(t);
        out.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
    }
    Ok(out)
}

/// Squared distance from each point to the mesh surface.
pub fn point_to_mesh_sq(points: &[Vec3], mesh: &MeshBvh) -> Result<Vec<f64>> {
    if mesh.is_empty() {
        return Err(Error::invalid("distance to an empty mesh"));
    }
    Ok(points
        .par_iter()
        .map(|p| mesh.closest_point(p).map_or(f64::INFINITY, |h| h.distance_sq))
        .collect())
}

/// Squared distance from each point of `from` to its nearest neighbor in `to`.
pub fn nearest_sq(from: &[Vec3], to: &KdTree) -> Result<Vec<f64>> {
    if to.is_empty() {
        return Err(Error::invalid("nearest neighbor in an empty point set"));
    }
    Ok(from
        .par_iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |h| h.0))
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Squared distances in both directions between two surfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Bidirectional {
    /// From samples of the first set to the second.
    pub forward: Vec<f64>,
    /// From samples of the second set to the first.
    pub backward: Vec<f64>,
}

impl Bidirectional {
    /// ½·mean(forward) + ½·mean(backward).
    pub fn symmetric_mean(&self) -> f64 {
        0.5 * mean(&self.forward) + 0.5 * mean(&self.backward)
    }
}

/// Point-to-surface distances between `n` samples on each mesh. Both meshes are
/// sampled with the same seed, so swapping the arguments swaps the directions exactly.
pub fn mesh_distances(x: &MeshBvh, mx: &TriangleMesh, y: &MeshBvh, my: &TriangleMesh, n: usize, seed: u64) -> Result<Bidirectional> {
    if mx.is_empty() || my.is_empty() {
        return Err(Error::invalid("mesh distance needs two nonempty meshes"));
    }
    let px = sample_surface(mx, n, seed)?;
    let py = sample_surface(my, n, seed)?;
    Ok(Bidirectional {
        forward: point_to_mesh_sq(&px, y)?,
        backward: point_to_mesh_sq(&py, x)?,
    })
}

/// Mesh distance: mean squared point-to-surface distance, averaged over both directions.
pub fn mesh_distance(x: &TriangleMesh, y: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    let (bx, by) = (MeshBvh::new(x), MeshBvh::new(y));
    Ok(mesh_distances(&bx, x, &by, y, n, seed)?.symmetric_mean())
}

/// Nearest-neighbor squared distances between two point clouds.
pub fn point_cloud_distances(x: &[Vec3], y: &[Vec3]) -> Result<Bidirectional> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("chamfer distance needs two nonempty point sets"));
    }
    let (tx, ty) = (KdTree::new(x.to_vec()), KdTree::new(y.to_vec()));
    Ok(Bidirectional {
        forward: nearest_sq(x, &ty)?,
        backward: nearest_sq(y, &tx)?,
    })
}

/// Chamfer distance with squared nearest-neighbor distances.
pub fn chamfer(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    Ok(point_cloud_distances(x, y)?.symmetric_mean())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision counts predicted points with d² < τ to the ground truth, recall the reverse.
pub fn f_score_from_distances(pred_to_gt: &[f64], gt_to_pred: &[f64], tau: f64) -> Result<FScore> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {tau}")));
    }
    if pred_to_gt.is_empty() || gt_to_pred.is_empty() {
        return Err(Error::invalid("f-score needs two nonempty sets"));
    }
    let frac = |d: &[f64]| d.iter().filter(|&&x| x < tau).count() as f64 / d.len() as f64;
    let precision = frac(pred_to_gt);
    let recall = frac(gt_to_pred);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore { precision, recall, f1 })
}

pub fn f_score_points(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<FScore> {
    let d = point_cloud_distances(pred, gt)?;
    f_score_from_distances(&d.forward, &d.backward, tau)
}

/// F-score with point-to-surface distances between samples of each mesh.
pub fn f_score_mesh(pred: &TriangleMesh, gt: &TriangleMesh, n: usize, seed: u64, tau: f64) -> Result<FScore> {
    let (bp, bg) = (MeshBvh::new(pred), MeshBvh::new(gt));
    let d = mesh_distances(&bp, pred, &bg, gt, n, seed)?;
    f_score_from_distances(&d.forward, &d.backward, tau)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsConfig {
    pub samples: usize,
    pub views: usize,
    pub ray_resolution: usize,
    pub seed: u64,
    pub tau_md: f64,
    pub tau_cd: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            samples: DEFAULT_SAMPLES,
            views: DEFAULT_VIEWS,
            ray_resolution: shell::DEFAULT_RAY_RESOLUTION,
            seed: 0,
            tau_md: TAU_MESH_DISTANCE,
            tau_cd: TAU_CHAMFER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub md: f64,
    pub md_f1: FScore,
    pub cd: f64,
    pub cd_f1: FScore,
    pub surface_samples: usize,
    pub shell_points_gt: usize,
    pub shell_points_pred: usize,
    pub config: MetricsConfig,
}

impl MetricsReport {
    /// One `key=value` pair per line.
    pub fn to_key_value(&self) -> String {
        let c = &self.config;
        let lines = [
            format!("md={:e}", self.md),
            format!("md_f1={}", self.md_f1.f1),
            format!("md_precision={}", self.md_f1.precision),
            format!("md_recall={}", self.md_f1.recall),
            format!("cd={:e}", self.cd),
            format!("cd_f1={}", self.cd_f1.f1),
            format!("cd_precision={}", self.cd_f1.precision),
            format!("cd_recall={}", self.cd_f1.recall),
            format!("tau_md={:e}", c.tau_md),
            format!("tau_cd={:e}", c.tau_cd),
            format!("surface_samples={}", self.surface_samples),
            format!("shell_points_gt={}", self.shell_points_gt),
            format!("shell_points_pred={}", self.shell_points_pred),
            format!("views={}", c.views),
            format!("seed={}", c.seed),
        ];
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

/// Full protocol: MD and its F-score on whole surfaces, CD and its F-score on
/// outer-shell points seen from `views` directions.
pub fn evaluate(gt: &TriangleMesh, pred: &TriangleMesh, cfg: &MetricsConfig) -> Result<MetricsReport> {
    let (bg, bp) = (MeshBvh::new(gt), MeshBvh::new(pred));
    let md = mesh_distances(&bp, pred, &bg, gt, cfg.samples, cfg.seed)?;
    let md_f1 = f_score_from_distances(&md.forward, &md.backward, cfg.tau_md)?;
    let shell = ShellConfig {
        views: cfg.views,
        points: cfg.samples,
        ray_resolution: cfg.ray_resolution,
        seed: cfg.seed,
    };
    let sg = outer_shell_points(&bg, &shell)?;
    let sp = outer_shell_points(&bp, &shell)?;
    let cd = point_cloud_distances(&sp, &sg)?;
    let cd_f1 = f_score_from_distances(&cd.forward, &cd.backward, cfg.tau_cd)?;
    Ok(MetricsReport {
        md: md.symmetric_mean(),
        md_f1,
        cd: cd.symmetric_mean(),
        cd_f1,
        surface_samples: cfg.samples,
        shell_points_gt: sg.len(),
        shell_points_pred: sp.len(),
        config: *cfg,
    })
}

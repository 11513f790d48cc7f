use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ovoxel::io::{self, OvxFile};
use ovoxel::material::{self, BakeConfig, TextureSet, WeightMode};
use ovoxel::mesh::fit_unit_cube;
use ovoxel::metrics::{self, MetricsConfig};
use ovoxel::resample::{self, SparseFeatureGrid};
use ovoxel::{Error, ErrorKind, VoxelizeConfig};

#[derive(Parser)]
#[command(name = "ovx", version, about = "Sparse dual-grid voxel codec for textured meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a mesh (.obj/.ply) into an O-Voxel grid.
    Voxelize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        res: u32,
        #[arg(long)]
        lambda_bound: Option<f64>,
        #[arg(long)]
        lambda_reg: Option<f64>,
        /// Also bake PBR materials from the mesh's MTL materials and textures.
        #[arg(long)]
        bake: bool,
        /// Sample weighting used when baking.
        #[arg(long, value_enum, default_value_t = Weight::Normalized)]
        weight: Weight,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a mesh from an O-Voxel grid.
    Mesh {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        colors: Option<Colors>,
        /// Mesh carrying the UV atlas to bake textures onto (map mode).
        #[arg(long)]
        uv_source: Option<PathBuf>,
        /// Texture size in map mode.
        #[arg(long, default_value_t = 1024)]
        tex_res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a predicted mesh against ground truth.
    Metrics {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = metrics::DEFAULT_VIEWS)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rays per side of each view's ray grid.
        #[arg(long, default_value_t = 256)]
        ray_res: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write the coarse structure (latent token coordinates) as text.
    Downsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        factor: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Space-to-channel (down) or channel-to-space (up) resampling of a feature grid.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Output channel width (default 2C for down, C/2 for up).
        #[arg(long)]
        cout: Option<usize>,
        /// Up mode: emit only the children active in this fine-resolution grid.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize an O-Voxel file.
    Info {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Weight {
    Normalized,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Colors {
    Vertex,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Down,
    Up,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::InvalidArgument => 2,
                ErrorKind::Io => 3,
                ErrorKind::Data => 4,
            })
        }
    }
}

/// `OVX_THREADS` bounds the worker pool; unset or 0 means one per core.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("OVX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("OVX_THREADS must be a nonnegative integer, got {v:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(cmd: Command) -> ovoxel::Result<()> {
    match cmd {
        Command::Voxelize {
            input,
            res,
            lambda_bound,
            lambda_reg,
            bake,
            weight,
            out,
        } => voxelize(&input, res, lambda_bound, lambda_reg, bake, weight, &out),
        Command::Mesh {
            input,
            colors,
            uv_source,
            tex_res,
            out,
        } => mesh(&input, colors, uv_source.as_deref(), tex_res, &out),
        Command::Metrics {
            gt,
            pred,
            samples,
            views,
            seed,
            ray_res,
            json,
        } => metrics_cmd(&gt, &pred, samples, views, seed, ray_res, json),
        Command::Downsample { input, factor, out } => downsample(&input, factor, &out),
        Command::Resample {
            input,
            mode,
            cout,
            mask,
            out,
        } => resample_cmd(&input, mode, cout, mask.as_deref(), &out),
        Command::Info { input } => info(&input),
    }
}

fn voxelize(
    input: &Path,
    res: u32,
    lambda_bound: Option<f64>,
    lambda_reg: Option<f64>,
    bake: bool,
    weight: Weight,
    out: &Path,
) -> ovoxel::Result<()> {
    let loaded = io::read_mesh(input)?;
    let mut cfg = VoxelizeConfig::new(res).normalized();
    if let Some(l) = lambda_bound {
        cfg.lambda_bound = l;
    }
    if let Some(l) = lambda_reg {
        cfg.lambda_reg = l;
    }
    let (mut grid, stats) = ovoxel::voxelize_with_stats(&loaded.mesh, &cfg)?;
    if bake {
        let sets = if loaded.materials.is_empty() {
            vec![TextureSet::default()]
        } else {
            loaded
                .materials
                .iter()
                .map(TextureSet::from_obj_material)
                .collect::<ovoxel::Result<_>>()?
        };
        let weight = match weight {
            Weight::Normalized => BakeConfig::default().weight,
            Weight::Literal => WeightMode::Literal,
        };
        let (baked, bstats) = material::bake_materials(&loaded.mesh, &sets, &grid, &BakeConfig { weight })?;
        grid = baked;
        if bstats.fallback_voxels > 0 {
            eprintln!("{} voxels took the nearest surface material", bstats.fallback_voxels);
        }
    }
    if stats.degenerate_triangles > 0 {
        eprintln!("skipped {} degenerate triangles", stats.degenerate_triangles);
    }
    io::write_ovx(out, &OvxFile::from_grid(&grid))?;
    eprintln!("{} active voxels at {}^3", grid.len(), res);
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    out.with_file_name(format!("{stem}{suffix}"))
}

fn mesh(input: &Path, colors: Option<Colors>, uv_source: Option<&Path>, tex_res: usize, out: &Path) -> ovoxel::Result<()> {
    let grid = io::read_ovx(input)?.to_grid()?;
    match colors {
        None => {
            if uv_source.is_some() {
                return Err(Error::InvalidArgument("--uv-source requires --colors map".into()));
            }
            let (m, stats) = ovoxel::extract_mesh_with_stats(&grid);
            if stats.skipped_quads > 0 {
                eprintln!("skipped {} quads with inactive neighbors", stats.skipped_quads);
            }
            io::write_mesh(out, &m, None)
        }
        Some(Colors::Vertex) => {
            let m = ovoxel::extract_mesh(&grid);
            let c = material::bake_vertex_colors(&m, &grid)?;
            io::write_mesh(out, &m, Some(&c))
        }
        Some(Colors::Map) => {
            let src = uv_source.ok_or_else(|| Error::InvalidArgument("--colors map requires --uv-source".into()))?;
            let m = io::read_mesh(src)?.mesh;
            let maps = material::bake_texture_map(&m, &grid, tex_res, tex_res)?;
            let bc = sibling(out, "_basecolor.png");
            let mr = sibling(out, "_metallic_roughness.png");
            maps.save_png(&bc, &mr)?;
            io::write_mesh(out, &m, None)?;
            if io::MeshFormat::from_path(out)? == io::MeshFormat::Obj {
                write_mtl(out, &bc, &mr)?;
            }
            Ok(())
        }
    }
}

/// Companion MTL for map mode, referenced from the OBJ by a prepended `mtllib`.
fn write_mtl(obj: &Path, bc: &Path, mr: &Path) -> ovoxel::Result<()> {
    let mtl = obj.with_extension("mtl");
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let text = format!(
        "newmtl baked\nKd 1 1 1\nPm 1\nPr 1\nmap_Kd {}\n# metallic-roughness (glTF packing): {}\n",
        name(bc),
        name(mr)
    );
    std::fs::write(&mtl, text).map_err(|e| Error::Io { path: mtl.clone(), source: e })?;
    let body = std::fs::read_to_string(obj).map_err(|e| Error::Io { path: obj.into(), source: e })?;
    let text = format!("mtllib {}\nusemtl baked\n{body}", name(&mtl));
    std::fs::write(obj, text).map_err(|e| Error::Io { path: obj.into(), source: e })
}

#[derive(Serialize)]
struct PerMetric {
    md: f64,
    cd: f64,
}

#[derive(Serialize)]
struct Counts {
    surface_samples: usize,
    shell_points_gt: usize,
    shell_points_pred: usize,
    views: usize,
    ray_resolution: usize,
}

#[derive(Serialize)]
struct Seeds {
    sampling: u64,
}

#[derive(Serialize)]
struct JsonReport {
    md: f64,
    md_f1: f64,
    cd: f64,
    cd_f1: f64,
    precision: PerMetric,
    recall: PerMetric,
    tau: PerMetric,
    counts: Counts,
    seeds: Seeds,
}

fn metrics_cmd(gt: &Path, pred: &Path, samples: usize, views: usize, seed: u64, ray_res: usize, json: bool) -> ovoxel::Result<()> {
    let g = io::read_mesh(gt)?.mesh;
    let p = io::read_mesh(pred)?.mesh;
    if g.is_empty() || p.is_empty() {
        return Err(Error::InvalidArgument("metrics need two nonempty meshes".into()));
    }
    // Both meshes share the ground truth's unit-cube normalization.
    let t = fit_unit_cube(&g.bounds(), 0.0);
    let g = g.transformed(|v| t.to_unit(v));
    let p = p.transformed(|v| t.to_unit(v));
    let cfg = MetricsConfig {
        samples,
        views,
        ray_resolution: ray_res,
        seed,
        ..Default::default()
    };
    let r = metrics::evaluate(&g, &p, &cfg)?;
    if json {
        let j = JsonReport {
            md: r.md,
            md_f1: r.md_f1.f1,
            cd: r.cd,
            cd_f1: r.cd_f1.f1,
            precision: PerMetric { md: r.md_f1.precision, cd: r.cd_f1.precision },
            recall: PerMetric { md: r.md_f1.recall, cd: r.cd_f1.recall },
            tau: PerMetric { md: cfg.tau_md, cd: cfg.tau_cd },
            counts: Counts {
                surface_samples: r.surface_samples,
                shell_points_gt: r.shell_points_gt,
                shell_points_pred: r.shell_points_pred,
                views,
                ray_resolution: ray_res,
            },
            seeds: Seeds { sampling: seed },
        };
        println!("{}", serde_json::to_string_pretty(&j).expect("report serializes"));
    } else {
        print!("{}", r.to_key_value());
    }
    Ok(())
}

fn downsample(input: &Path, factor: u32, out: &Path) -> ovoxel::Result<()> {
    let f = io::read_ovx(input)?;
    if factor == 0 {
        return Err(Error::InvalidArgument("factor must be positive".into()));
    }
    let coarse = ovoxel::downsample_coords(&f.coords, f.resolution, factor)?;
    let mut s = String::new();
    for c in &coarse {
        let _ = writeln!(s, "{} {} {}", c.i(), c.j(), c.k());
    }
    std::fs::write(out, s).map_err(|e| Error::Io { path: out.into(), source: e })?;
    eprintln!("{} tokens at {}^3", coarse.len(), f.resolution / factor);
    Ok(())
}

fn resample_cmd(input: &Path, mode: Mode, cout: Option<usize>, mask: Option<&Path>, out: &Path) -> ovoxel::Result<()> {
    let g: SparseFeatureGrid = io::read_ovx(input)?.to_features()?;
    let c = g.channels();
    let result = match mode {
        Mode::Down => {
            if mask.is_some() {
                return Err(Error::InvalidArgument("--mask applies to up mode only".into()));
            }
            resample::space_to_channel_down(&g, cout.unwrap_or(2 * c))?
        }
        Mode::Up => {
            let masks = match mask {
                Some(p) => {
                    let fine = io::read_ovx(p)?;
                    if fine.resolution as u64 != 2 * g.resolution() as u64 {
                        return Err(Error::InvalidArgument(format!(
                            "mask grid resolution {} is not twice {}",
                            fine.resolution,
                            g.resolution()
                        )));
                    }
                    Some(resample::occupancy_masks(&fine.coords, fine.resolution)?)
                }
                None => None,
            };
            resample::channel_to_space_up(&g, masks.as_deref(), cout.unwrap_or((c / 2).max(1)))?
        }
    };
    io::write_ovx(out, &OvxFile::from_features(&result))
}

fn info(input: &Path) -> ovoxel::Result<()> {
    let f = io::read_ovx(input)?;
    let mut names = Vec::new();
    if f.shape.is_some() {
        names.push("shape".to_string());
    }
    if f.material.is_some() {
        names.push("material".to_string());
    }
    if let Some((c, _)) = &f.generic {
        names.push(format!("generic({c})"));
    }
    if !f.transform.is_identity() {
        names.push("transform".to_string());
    }
    println!("resolution={}", f.resolution);
    println!("voxels={}", f.coords.len());
    println!("flags={:#x} [{}]", f.flags(), names.join(", "));
    match (f.coords.iter().map(|c| c.0).reduce(|a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])]),
           f.coords.iter().map(|c| c.0).reduce(|a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])])) {
        (Some(lo), Some(hi)) => println!("bounds={} {} {} .. {} {} {}", lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]),
        _ => println!("bounds=empty"),
    }
    let t = &f.transform;
    println!("transform=scale {} translation {} {} {}", t.scale, t.translation[0], t.translation[1], t.translation[2]);
    for factor in [4u32, 8, 16] {
        match ovoxel::downsample_coords(&f.coords, f.resolution, factor) {
            Ok(c) => println!("tokens@{factor}={}", c.len()),
            Err(_) => println!("tokens@{factor}=n/a"),
        }
    }
    Ok(())
}

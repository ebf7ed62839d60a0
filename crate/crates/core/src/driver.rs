//! Batch pipeline: config → (generate → mesh →) solve → curve CSV, field
//! VTK, and a JSON run manifest. Outputs are buffered and flushed only on
//! success, so failed runs leave nothing half-written.

use crate::config::{CohesiveCfg, MeshSource, ResolvedMaterial, RunConfig};
use crate::homogenize::{Analysis, Model, RegionMaterial, StepRecord};
use crate::layout::{generate_layout, FibreLayout, GenParams};
use crate::mesh::{parse_mesh, serialise_mesh, Mesh};
use crate::udmesh::{insert_cohesive, mesh_ud_rve};
use crate::vtk::{vtk_unstructured, Fields};
use crate::{cohesive::CohesiveParams, Error, Result};
use nalgebra::Vector6;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

fn io_ctx(ctx: &str, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{ctx}: {e}")))
}

/// CLI exit code for an error: 2 config, 3 mesh/generation, 4 solver,
/// 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Params(_) => 2,
        Error::Mesh(_) | Error::MeshParse { .. } | Error::Generate(_) | Error::Basis => 3,
        Error::Solve(_) | Error::ReturnMap { .. } => 4,
        Error::Io(_) => 1,
    }
}

pub struct Prepared {
    pub mesh: Mesh,
    pub regions: BTreeMap<u32, RegionMaterial>,
    pub cohesive: Option<CohesiveParams>,
    pub layout: Option<FibreLayout>,
    pub generate_s: f64,
    pub mesh_s: f64,
}

fn region_modulus(cfg: &RunConfig, region: u32) -> Result<f64> {
    let m = cfg
        .materials
        .iter()
        .find(|m| m.region == region)
        .ok_or_else(|| Error::Config(format!("no material bound to region {region}")))?;
    Ok(match m.material.resolve()? {
        ResolvedMaterial::Matrix(p) => p.e,
        ResolvedMaterial::Elastic(p) => p.ep,
    })
}

fn cohesive_params(cfg: &RunConfig, c: &CohesiveCfg) -> Result<CohesiveParams> {
    let em = match c.em {
        Some(e) => e,
        None => region_modulus(cfg, c.between[0])?,
    };
    let p = CohesiveParams { ft: c.ft, gf: c.gf, beta: c.beta, em, h: c.h };
    if p.ft.is_finite() {
        p.validate()?;
    }
    Ok(p)
}

/// Builds the mesh a config describes, inserting or welding the interface
/// as the cohesive block dictates.
pub fn prepare(cfg: &RunConfig, base: &Path) -> Result<Prepared> {
    let regions: BTreeMap<u32, RegionMaterial> = cfg
        .materials
        .iter()
        .map(|m| {
            let mat = match m.material.resolve()? {
                ResolvedMaterial::Matrix(p) => RegionMaterial::Matrix(p),
                ResolvedMaterial::Elastic(p) => RegionMaterial::Elastic(p),
            };
            Ok((m.region, mat))
        })
        .collect::<Result<_>>()?;
    let coh = cfg.cohesive.as_ref().map(|c| cohesive_params(cfg, c)).transpose()?;
    let tie = coh.as_ref().is_some_and(|p| !p.ft.is_finite());

    let mut layout = None;
    let mut generate_s = 0.0;
    let t0 = Instant::now();
    let mut mesh = match &cfg.mesh {
        MeshSource::File { path } => {
            let full = base.join(path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::Mesh(format!("cannot read {}: {e}", full.display())))?;
            parse_mesh(&text)?
        }
        MeshSource::Box { size, divisions, region } => crate::mesh::box_mesh(
            nalgebra::Vector3::new(size[0], size[1], size[2]),
            divisions[0],
            divisions[1],
            divisions[2],
            *region,
        ),
        MeshSource::Generate {
            radius,
            target_vf,
            min_gap,
            max_attempts,
            cell,
            lz,
            nz,
            edge,
        } => {
            let gp = GenParams {
                radius: *radius,
                target_vf: *target_vf,
                min_gap: *min_gap,
                seed: cfg.seed,
                max_attempts: *max_attempts,
            };
            let l = generate_layout(&gp, (cell[0], cell[1]))?;
            generate_s = t0.elapsed().as_secs_f64();
            let m = mesh_ud_rve(&l, *lz, *nz, *edge)?;
            layout = Some(l);
            m
        }
    };

    match (&coh, mesh.cohesive.is_empty()) {
        // finite strength on an unsplit mesh: split the interface
        (Some(p), true) if p.ft.is_finite() => {
            let c = cfg.cohesive.as_ref().unwrap();
            mesh = insert_cohesive(&mesh, (c.between[0], c.between[1]))?;
        }
        // tied interface: solve on the welded (or never-split) mesh
        (Some(p), false) if !p.ft.is_finite() => mesh = mesh.weld_cohesive(),
        _ => {}
    }
    let cohesive = coh.filter(|p| p.ft.is_finite());
    if !tie {
        // a mesh that still carries cohesive elements needs the law bound;
        // Model::new reports the converse mismatch
        if cohesive.is_none() && !mesh.cohesive.is_empty() {
            return Err(Error::Config(
                "mesh has cohesive elements but the config has no [cohesive] block".into(),
            ));
        }
    }
    mesh.validate()?;
    let mesh_s = t0.elapsed().as_secs_f64() - generate_s;
    Ok(Prepared { mesh, regions, cohesive, layout, generate_s, mesh_s })
}

const CSV_HEADER: &str = "# homogenised response; strain dimensionless, stress MPa; \
components 11,22,33,12,23,31 (engineering shear strain)\n\
step,eps11,eps22,eps33,eps12,eps23,eps31,sig11,sig22,sig33,sig12,sig23,sig31\n";

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_row(step: usize, eps: &Vector6<f64>, sig: &Vector6<f64>) -> String {
    let mut s = format!("{step}");
    for v in eps.iter().chain(sig.iter()) {
        s.push(',');
        s.push_str(&num(*v));
    }
    s.push('\n');
    s
}

pub fn curve_csv(records: &[StepRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push_str(&csv_row(0, &Vector6::zeros(), &Vector6::zeros()));
    for (i, r) in records.iter().enumerate() {
        s.push_str(&csv_row(i + 1, &r.eps_bar, &r.sigma_bar));
    }
    s
}

#[derive(Serialize)]
struct MeshStats {
    nodes: usize,
    tets: usize,
    cohesive_elements: usize,
    periodic_pairs: usize,
    volume: f64,
    region_tets: BTreeMap<u32, usize>,
}

impl MeshStats {
    fn of(mesh: &Mesh) -> Self {
        let mut region_tets = BTreeMap::new();
        for t in &mesh.tets {
            *region_tets.entry(t.region).or_insert(0) += 1;
        }
        Self {
            nodes: mesh.nodes.len(),
            tets: mesh.tets.len(),
            cohesive_elements: mesh.cohesive.len(),
            periodic_pairs: mesh.periodic.len(),
            volume: mesh.total_volume(),
            region_tets,
        }
    }
}

#[derive(Serialize)]
struct Timings {
    generate: f64,
    mesh: f64,
    solve: f64,
    total: f64,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    unix_time: u64,
    seed: u64,
    threads: usize,
    mesh: MeshStats,
    timings_s: Timings,
    records: usize,
    outputs: Vec<String>,
    /// The resolved config; writing it to a file reproduces this run.
    config_toml: String,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct RunSummary {
    pub records: Vec<StepRecord>,
    pub out_dir: PathBuf,
    pub outputs: Vec<PathBuf>,
}

fn flush(out_dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| io_ctx(&format!("create {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let p = out_dir.join(name);
        std::fs::write(&p, content).map_err(|e| io_ctx(&format!("write {}", p.display()), e))?;
        written.push(p);
    }
    Ok(written)
}

/// Runs the full pipeline for one config. `base` anchors relative paths
/// (normally the config file's directory).
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunSummary> {
    let t0 = Instant::now();
    let prep = prepare(cfg, base)?;
    let model = Model::new(prep.mesh, prep.regions, prep.cohesive)?;
    let mut analysis = match cfg.prescribed {
        Some(mask) => Analysis::with_mask(&model, cfg.bc.into(), mask)?,
        None => Analysis::new(&model, cfg.bc.into())?,
    };
    analysis.settings = (&cfg.solver).into();

    let mut records = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();
    let total_steps: usize = cfg.program.iter().map(|p| p.steps).sum();
    let mut prev = Vector6::zeros();
    let mut global = 0usize;
    let solve_t = Instant::now();
    for stage in &cfg.program {
        let target = Vector6::from_column_slice(&stage.strain);
        for k in 1..=stage.steps {
            let frac = k as f64 / stage.steps as f64;
            let eps = prev + (target - prev) * frac;
            let info = analysis.step_to(&eps)?;
            global += 1;
            // under a mask the free strain components are solved, not
            // prescribed; report their actual averages
            let eps_rec = match cfg.prescribed {
                Some(_) => analysis.average_strain()?,
                None => analysis.eps_bar,
            };
            records.push(StepRecord {
                eps_bar: eps_rec,
                sigma_bar: analysis.homogenized_stress(),
                iterations: info.iterations,
                substeps: info.substeps,
            });
            let due = cfg.output.vtk_every > 0
                && (global % cfg.output.vtk_every == 0 || global == total_steps);
            if due {
                files.push((format!("fields_{global:04}.vtk"), render_fields(&analysis)));
            }
        }
        prev = target;
    }
    let solve_s = solve_t.elapsed().as_secs_f64();

    files.push((cfg.output.curve.clone(), curve_csv(&records)));
    if let Some(l) = &prep.layout {
        files.push(("layout.csv".into(), l.to_csv()));
    }
    let out_dir = base.join(&cfg.output.dir);
    let manifest = Manifest {
        tool: "rvehom",
        version: env!("CARGO_PKG_VERSION"),
        unix_time: unix_now(),
        seed: cfg.seed,
        threads: cfg.threads,
        mesh: MeshStats::of(&model.mesh),
        timings_s: Timings {
            generate: prep.generate_s,
            mesh: prep.mesh_s,
            solve: solve_s,
            total: t0.elapsed().as_secs_f64(),
        },
        records: records.len(),
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        config_toml: cfg.to_toml()?,
    };
    files.push((
        "manifest.json".into(),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest serialise: {e}")))?,
    ));
    let outputs = flush(&out_dir, &files)?;
    Ok(RunSummary { records, out_dir, outputs })
}

fn render_fields(analysis: &Analysis) -> String {
    let model = analysis.model;
    let alpha: Vec<(f64, f64)> = (0..model.mesh.tets.len())
        .map(|e| match model.plastic_slot(e) {
            Some(k) => {
                let s = &analysis.states.plastic[k];
                (s.alpha0, s.alpha1)
            }
            None => (0.0, 0.0),
        })
        .collect();
    let omega: Option<Vec<f64>> = analysis
        .damage()
        .map(|d| d.iter().map(|w| (w[0] + w[1] + w[2]) / 3.0).collect());
    vtk_unstructured(
        &model.mesh,
        &Fields { u: &analysis.u, alpha: Some(&alpha), omega: omega.as_deref() },
    )
}

/// Generation-only pipeline: writes the layout CSV and the mesh-model file
/// without solving.
pub fn generate_only(cfg: &RunConfig, base: &Path) -> Result<RunSummary> {
    let t0 = Instant::now();
    let prep = prepare(cfg, base)?;
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(l) = &prep.layout {
        files.push(("layout.csv".into(), l.to_csv()));
    }
    files.push(("rve.mesh".into(), serialise_mesh(&prep.mesh)));
    let manifest = Manifest {
        tool: "rvehom",
        version: env!("CARGO_PKG_VERSION"),
        unix_time: unix_now(),
        seed: cfg.seed,
        threads: cfg.threads,
        mesh: MeshStats::of(&prep.mesh),
        timings_s: Timings {
            generate: prep.generate_s,
            mesh: prep.mesh_s,
            solve: 0.0,
            total: t0.elapsed().as_secs_f64(),
        },
        records: 0,
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        config_toml: cfg.to_toml()?,
    };
    files.push((
        "manifest.json".into(),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest serialise: {e}")))?,
    ));
    let out_dir = base.join(&cfg.output.dir);
    let outputs = flush(&out_dir, &files)?;
    Ok(RunSummary { records: Vec::new(), out_dir, outputs })
}

pub struct SweepVariant {
    pub value: f64,
    pub dir: PathBuf,
    pub result: std::result::Result<Vec<StepRecord>, String>,
}

pub struct SweepSummary {
    pub variants: Vec<SweepVariant>,
    pub merged_csv: PathBuf,
    /// Exit code of the first failed variant, if any.
    pub first_failure: Option<i32>,
}

/// Runs one variant per value of a swept scalar, in parallel across
/// `threads` workers, then merges the curves into one comparative CSV.
/// A failing variant is recorded and the sweep continues.
pub fn sweep(
    config_text: &str,
    base: &Path,
    axis: &str,
    values: &[f64],
    threads: usize,
    seed: Option<u64>,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let base_cfg = RunConfig::parse(config_text)?;
    // a broken axis path fails every variant identically, so it aborts the
    // sweep up front; a value that breaks one config is that variant's own
    // failure and the sweep continues
    crate::config::override_scalar(config_text, axis, values[0])?;
    let variants: Vec<(f64, Result<RunConfig>)> = values
        .iter()
        .map(|&v| {
            let cfg = crate::config::override_scalar(config_text, axis, v)
                .and_then(|text| RunConfig::parse(&text))
                .map(|mut cfg| {
                    if let Some(s) = seed {
                        cfg.seed = s;
                    }
                    // nest each variant under its own directory
                    cfg.output.dir = base_cfg
                        .output
                        .dir
                        .join(format!("{}_{}", axis.replace('.', "_"), num(v)));
                    cfg
                });
            (v, cfg)
        })
        .collect();

    let n = variants.len();
    let workers = threads.max(1).min(n);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<std::result::Result<Vec<StepRecord>, Error>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = match &variants[i].1 {
                    Ok(cfg) => run(cfg, base).map(|r| r.records),
                    Err(e) => Err(Error::Config(e.to_string())),
                };
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut merged = String::new();
    merged.push_str(&format!("# sweep over {axis}; first column is the swept value\n"));
    merged.push_str(&CSV_HEADER.replace("step,", "value,step,"));
    let mut out = Vec::with_capacity(n);
    let mut first_failure = None;
    for ((v, cfg), slot) in variants.into_iter().zip(slots) {
        let res = slot.into_inner().unwrap().expect("worker covered every variant");
        let dir = match &cfg {
            Ok(c) => base.join(&c.output.dir),
            Err(_) => base.join(&base_cfg.output.dir),
        };
        match res {
            Ok(records) => {
                merged.push_str(&format!("{},{}", num(v), csv_row(0, &Vector6::zeros(), &Vector6::zeros())));
                for (i, r) in records.iter().enumerate() {
                    merged.push_str(&format!("{},{}", num(v), csv_row(i + 1, &r.eps_bar, &r.sigma_bar)));
                }
                out.push(SweepVariant { value: v, dir, result: Ok(records) });
            }
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(exit_code(&e));
                }
                out.push(SweepVariant { value: v, dir, result: Err(e.to_string()) });
            }
        }
    }

    let out_dir = base.join(&base_cfg.output.dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| io_ctx(&format!("create {}", out_dir.display()), e))?;
    let merged_csv = out_dir.join("sweep.csv");
    std::fs::write(&merged_csv, merged)
        .map_err(|e| io_ctx(&format!("write {}", merged_csv.display()), e))?;
    #[derive(Serialize)]
    struct SweepManifest<'a> {
        axis: &'a str,
        values: &'a [f64],
        failures: Vec<String>,
    }
    let failures: Vec<String> = out
        .iter()
        .filter_map(|v| v.result.as_ref().err().map(|e| format!("{}: {e}", num(v.value))))
        .collect();
    let mj = serde_json::to_string_pretty(&SweepManifest { axis, values, failures })
        .map_err(|e| Error::Config(format!("manifest serialise: {e}")))?;
    std::fs::write(out_dir.join("sweep.json"), mj)
        .map_err(|e| io_ctx("write sweep manifest", e))?;
    Ok(SweepSummary { variants: out, merged_csv, first_failure })
}

/// Parses and validates a mesh file, returning a human-readable report.
pub fn check_mesh(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Mesh(format!("cannot read {}: {e}", path.display())))?;
    let mesh = parse_mesh(&text)?;
    mesh.validate()?;
    let stats = MeshStats::of(&mesh);
    let (lo, hi) = mesh.bbox();
    let mut s = format!(
        "nodes: {}\ntets: {}\ncohesive elements: {}\nperiodic pairs: {}\nvolume: {}\n",
        stats.nodes, stats.tets, stats.cohesive_elements, stats.periodic_pairs, num(stats.volume)
    );
    s.push_str(&format!(
        "bbox: [{}, {}, {}] to [{}, {}, {}]\n",
        num(lo.x), num(lo.y), num(lo.z), num(hi.x), num(hi.y), num(hi.z)
    ));
    for (r, c) in &stats.region_tets {
        s.push_str(&format!("region {r}: {c} tets\n"));
    }
    for w in mesh.quality_warnings() {
        s.push_str(&format!("warning: {w}\n"));
    }
    Ok(s)
}

use rvehom::config::{override_scalar, RunConfig};
use rvehom::driver;
use std::path::{Path, PathBuf};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_with_out(name: &str, out: &Path) -> (RunConfig, PathBuf) {
    let (mut cfg, base) = RunConfig::load(&fixture_dir().join(name)).unwrap();
    cfg.output.dir = out.to_path_buf();
    (cfg, base)
}

#[test]
fn calibration_tension_curve_hits_reference_points() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, base) = load_with_out("calibration_tension.toml", tmp.path());
    let s = driver::run(&cfg, &base).unwrap();
    assert_eq!(s.records.len(), 200);
    // yield onset: stress at the first step that leaves the elastic line
    // (elastic steps deviate only by solver roundoff)
    let onset = s
        .records
        .iter()
        .find(|r| (r.sigma_bar[0] - 3760.0 * r.eps_bar[0]).abs() > 1e-4 * r.sigma_bar[0].max(1.0))
        .map(|r| r.sigma_bar[0])
        .unwrap();
    assert!((onset - 29.0).abs() < 0.5, "onset {onset}");
    let end = s.records.last().unwrap();
    assert!((end.sigma_bar[0] - 95.2389).abs() < 0.01, "plateau {}", end.sigma_bar[0]);
    // uniaxial stress: free components stay traction-free
    assert!(end.sigma_bar.iter().skip(1).all(|&v| v.abs() < 1e-8));
    // lateral strain is reported, not the zero target
    assert!(end.eps_bar[1] < -0.01);

    let curve = std::fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    assert!(curve.starts_with("# homogenised response"));
    assert_eq!(curve.lines().count(), 2 + 201);
    let manifest = std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(m["records"], 200);
    // the embedded config reproduces the run configuration
    let embedded = RunConfig::parse(m["config_toml"].as_str().unwrap()).unwrap();
    assert_eq!(embedded.program[0].steps, 200);
}

#[test]
fn rerun_is_bit_identical() {
    let run_once = |dir: &Path| {
        let (cfg, base) = load_with_out("file_ingest.toml", dir);
        driver::run(&cfg, &base).unwrap();
        std::fs::read(dir.join("curve.csv")).unwrap()
    };
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    assert_eq!(run_once(t1.path()), run_once(t2.path()));
}

#[test]
fn file_ingest_softens_to_separation() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, base) = load_with_out("file_ingest.toml", tmp.path());
    let s = driver::run(&cfg, &base).unwrap();
    let sig: Vec<f64> = s.records.iter().map(|r| r.sigma_bar[2]).collect();
    let peak = sig.iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak > 20.0 && peak < 30.0, "peak {peak}");
    assert!(sig.last().unwrap().abs() < 0.5, "fully separated at the end");
    // field output was requested at the final step
    assert!(tmp.path().join("fields_0025.vtk").exists());
    let vtk = std::fs::read_to_string(tmp.path().join("fields_0025.vtk")).unwrap();
    assert!(vtk.contains("SCALARS omega double"));
    // complete decohesion shows saturated damage on some interface element
    let omega_max = vtk
        .lines()
        .skip_while(|l| !l.starts_with("SCALARS omega"))
        .skip(2)
        .filter_map(|l| l.parse::<f64>().ok())
        .fold(0.0, f64::max);
    assert!(omega_max > 0.999, "omega max {omega_max}");
}

#[test]
fn malformed_config_is_a_config_error() {
    let text = std::fs::read_to_string(fixture_dir().join("calibration_tension.toml")).unwrap();
    let bad = text.replace("steps = 200", "steps = 0");
    let err = RunConfig::parse(&bad).unwrap_err();
    assert_eq!(driver::exit_code(&err), 2);
    let bad = text.replace("e = 3760.0", "e = -1.0");
    let err = RunConfig::parse(&bad).unwrap_err();
    assert_eq!(driver::exit_code(&err), 2);
}

#[test]
fn missing_mesh_file_is_a_mesh_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut cfg, base) = load_with_out("file_ingest.toml", tmp.path());
    cfg.mesh = rvehom::config::MeshSource::File { path: "meshes/nope.mesh".into() };
    let err = driver::run(&cfg, &base).unwrap_err();
    assert_eq!(driver::exit_code(&err), 3);
    // buffered outputs: nothing was written for the failed run
    assert!(std::fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn check_mesh_reports_counts() {
    let report =
        driver::check_mesh(&fixture_dir().join("meshes/cube_two_region.mesh")).unwrap();
    assert!(report.contains("nodes: 12"));
    assert!(report.contains("tets: 12"));
    assert!(report.contains("periodic pairs: 16"));
    assert!(report.contains("region 0: 6 tets"));
}

#[test]
fn generate_only_writes_mesh_and_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut cfg, base) = load_with_out("ud_decohesion.toml", tmp.path());
    // shrink for speed: fewer fibres, coarser mesh
    if let rvehom::config::MeshSource::Generate { cell, edge, .. } = &mut cfg.mesh {
        *cell = [0.012, 0.012];
        *edge = 0.0025 / 3.0;
    }
    let s = driver::generate_only(&cfg, &base).unwrap();
    assert!(s.records.is_empty());
    let mesh_path = tmp.path().join("rve.mesh");
    let report = driver::check_mesh(&mesh_path).unwrap();
    assert!(report.contains("cohesive elements:"));
    let layout = std::fs::read_to_string(tmp.path().join("layout.csv")).unwrap();
    assert!(layout.starts_with("x,y,r\n"));
    assert_eq!(layout.lines().count(), 1 + 4, "0.6 of 0.012^2 cell is 4 whole fibres");
}

#[test]
fn sweep_merges_and_continues_past_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture_dir().join("file_ingest.toml")).unwrap();
    // point outputs into the tempdir, keep mesh path resolvable
    let text = text.replace("dir = \"../out/file_ingest\"", &format!("dir = \"{}\"", tmp.path().display()));
    let base = fixture_dir();
    // gf = -1 is invalid and must fail without sinking the sweep
    let s = driver::sweep(&text, &base, "cohesive.gf", &[0.1, -1.0, 0.15], 2, None).unwrap();
    assert_eq!(s.variants.len(), 3);
    assert!(s.variants[0].result.is_ok());
    assert!(s.variants[1].result.is_err());
    assert!(s.variants[2].result.is_ok());
    assert_eq!(s.first_failure, Some(2));
    let merged = std::fs::read_to_string(&s.merged_csv).unwrap();
    assert!(merged.contains("value,step,"));
    // two successful variants, each 1 zero row + 25 steps
    let data_rows = merged.lines().filter(|l| !l.starts_with('#') && !l.starts_with("value")).count();
    assert_eq!(data_rows, 2 * 26);
    // per-variant outputs in their own directories
    assert!(tmp.path().join("cohesive_gf_0.1/curve.csv").exists());
    assert!(tmp.path().join("cohesive_gf_0.15/manifest.json").exists());
    // stiffer-interface curve dissipates more slowly: both peak near ft
    let json = std::fs::read_to_string(tmp.path().join("sweep.json")).unwrap();
    assert!(json.contains("cohesive.gf"));

    // sweeping an axis that is not in the config is rejected up front
    assert!(override_scalar(&text, "cohesive.missing", 1.0).is_err());
}

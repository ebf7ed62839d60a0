//! Run configuration: one TOML file describing the mesh source, material
//! bindings, interface law, boundary condition, load program, and outputs.
//!
//! ```toml
//! bc = "periodic"
//! seed = 7
//!
//! [mesh]
//! kind = "generate"        # or "box" / "file"
//! radius = 0.0025
//! target_vf = 0.60
//! min_gap = 0.000175
//! cell = [0.025, 0.025]
//! lz = 0.005
//! nz = 2
//! edge = 0.0009
//!
//! [[material]]
//! region = 0
//! type = "matrix"
//! e = 3760.0
//! # ... remaining plasticity constants
//!
//! [[material]]
//! region = 1
//! type = "elastic"
//! ep = 74000.0
//! # ...
//!
//! [cohesive]
//! ft = 50.0                # `inf` ties the interface
//! gf = 0.002
//!
//! [[step]]
//! strain = [0.01, 0.0, 0.0, 0.0, 0.0, 0.0]
//! steps = 100
//! ```

use crate::homogenize::{BcKind, SolveSettings};
use crate::plasticity::MatrixParams;
use crate::yarn::TransIsoParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    #[serde(rename = "material")]
    pub materials: Vec<MaterialBinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohesive: Option<CohesiveCfg>,
    pub bc: BcCfg,
    /// Which macro-strain components are prescribed; the rest carry zero
    /// average traction (free). Defaults to all six prescribed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prescribed: Option<[bool; 6]>,
    #[serde(rename = "step")]
    pub program: Vec<ProgramStep>,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub output: OutputCfg,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for sweeps; a single run is always one solver.
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    /// Mesh-model text file; path relative to the config file.
    File { path: PathBuf },
    /// Structured box of `divisions` cells per axis, 6 tets per cell.
    Box {
        size: [f64; 3],
        divisions: [usize; 3],
        #[serde(default)]
        region: u32,
    },
    /// Random periodic fibre layout meshed as an extruded UD cross-section.
    Generate {
        /// Fibre radius (mm).
        radius: f64,
        target_vf: f64,
        /// Smallest surface-to-surface fibre distance (mm).
        min_gap: f64,
        #[serde(default = "default_attempts")]
        max_attempts: usize,
        /// In-plane cell dimensions (mm).
        cell: [f64; 2],
        /// Extrusion depth (mm) and layer count.
        lz: f64,
        nz: usize,
        /// Target in-plane element edge (mm).
        edge: f64,
    },
}

fn default_attempts() -> usize {
    500_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialBinding {
    pub region: u32,
    #[serde(flatten)]
    pub material: MaterialCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaterialCfg {
    Matrix(MatrixParams),
    Elastic(TransIsoParams),
    /// Isotropic linear elastic, expanded to the transversely isotropic
    /// form with a degenerate axis.
    Isotropic { e: f64, nu: f64 },
}

impl MaterialCfg {
    pub fn resolve(&self) -> Result<ResolvedMaterial> {
        Ok(match self {
            MaterialCfg::Matrix(p) => ResolvedMaterial::Matrix(*p),
            MaterialCfg::Elastic(p) => ResolvedMaterial::Elastic(*p),
            MaterialCfg::Isotropic { e, nu } => {
                ResolvedMaterial::Elastic(TransIsoParams::isotropic_from_fibre(*e, *nu)?)
            }
        })
    }
}

pub enum ResolvedMaterial {
    Matrix(MatrixParams),
    Elastic(TransIsoParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohesiveCfg {
    /// Region pair whose shared faces get interface elements.
    #[serde(default = "default_between")]
    pub between: [u32; 2],
    /// Interface strength (MPa); `inf` welds the interface instead.
    pub ft: f64,
    /// Fracture energy (N/mm = kJ/m^2).
    pub gf: f64,
    #[serde(default = "one_f")]
    pub beta: f64,
    /// Nominal interface thickness (mm) setting the initial stiffness.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Modulus for the initial stiffness; defaults to the E of the first
    /// `between` region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<f64>,
}

fn default_between() -> [u32; 2] {
    [0, 1]
}

fn one_f() -> f64 {
    1.0
}

fn default_h() -> f64 {
    0.001
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcCfg {
    LinearDisplacement,
    Periodic,
    UniformTraction,
}

impl From<BcCfg> for BcKind {
    fn from(b: BcCfg) -> Self {
        match b {
            BcCfg::LinearDisplacement => BcKind::LinearDisplacement,
            BcCfg::Periodic => BcKind::Periodic,
            BcCfg::UniformTraction => BcKind::UniformTraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramStep {
    /// Macro-strain target, Voigt components 11,22,33,12,23,31 with
    /// engineering shears.
    pub strain: [f64; 6],
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    pub rtol: f64,
    pub max_iter: usize,
    pub min_substep: f64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        let s = SolveSettings::default();
        Self { rtol: s.rtol, max_iter: s.max_iter, min_substep: s.min_substep }
    }
}

impl From<&SolverCfg> for SolveSettings {
    fn from(c: &SolverCfg) -> Self {
        Self { rtol: c.rtol, max_iter: c.max_iter, min_substep: c.min_substep }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    /// Output directory, relative to the config file.
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_curve")]
    pub curve: String,
    /// Write field VTK files every N program steps (0 = never).
    #[serde(default)]
    pub vtk_every: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_curve() -> String {
    "curve.csv".into()
}

impl Default for OutputCfg {
    fn default() -> Self {
        Self { dir: default_out_dir(), curve: default_curve(), vtk_every: 0 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; returns it with the directory that relative
    /// paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((Self::parse(&text)?, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::Config("no material bindings".into()));
        }
        for (i, a) in self.materials.iter().enumerate() {
            for b in &self.materials[..i] {
                if a.region == b.region {
                    return Err(Error::Config(format!(
                        "region {} bound to two materials",
                        a.region
                    )));
                }
            }
            match a.material.resolve()? {
                ResolvedMaterial::Matrix(p) => p.validate()?,
                ResolvedMaterial::Elastic(p) => p.validate()?,
            }
        }
        if self.program.is_empty() {
            return Err(Error::Config("empty load program".into()));
        }
        for s in &self.program {
            if s.steps == 0 {
                return Err(Error::Config("program step count must be at least 1".into()));
            }
            if s.strain.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("non-finite strain target {:?}", s.strain)));
            }
        }
        if let Some(c) = &self.cohesive {
            if c.between[0] == c.between[1] {
                return Err(Error::Config(
                    "cohesive interface needs two distinct regions".into(),
                ));
            }
            if !(c.gf > 0.0 && c.ft > 0.0 && c.beta >= 0.0 && c.h > 0.0) {
                return Err(Error::Config(format!(
                    "cohesive parameters out of range: ft={} gf={} beta={} h={}",
                    c.ft, c.gf, c.beta, c.h
                )));
            }
        }
        if !(self.solver.rtol > 0.0 && self.solver.max_iter >= 1 && self.solver.min_substep > 0.0)
        {
            return Err(Error::Config("solver tolerances out of range".into()));
        }
        if let Some(m) = &self.prescribed {
            if self.bc != BcCfg::UniformTraction {
                return Err(Error::Config(
                    "leaving strain components free requires bc = \"uniform_traction\"".into(),
                ));
            }
            if m.iter().all(|&b| !b) {
                return Err(Error::Config("at least one strain component must be prescribed".into()));
            }
            for s in &self.program {
                for (k, &active) in m.iter().enumerate() {
                    if !active && s.strain[k] != 0.0 {
                        return Err(Error::Config(format!(
                            "strain target component {k} is free but nonzero in {:?}",
                            s.strain
                        )));
                    }
                }
            }
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        match &self.mesh {
            MeshSource::Box { size, divisions, .. } => {
                if size.iter().any(|&s| !(s > 0.0)) || divisions.iter().any(|&d| d == 0) {
                    return Err(Error::Config("box mesh needs positive size and divisions".into()));
                }
            }
            MeshSource::Generate { .. } => {
                // geometry limits are checked by the generator; the config
                // must bind both regions the mesher emits
                for r in [crate::udmesh::MATRIX_REGION, crate::udmesh::FIBRE_REGION] {
                    if !self.materials.iter().any(|m| m.region == r) {
                        return Err(Error::Config(format!(
                            "generated meshes use regions 0 (matrix) and 1 (fibre); region {r} unbound"
                        )));
                    }
                }
            }
            MeshSource::File { .. } => {}
        }
        Ok(())
    }

    /// Serialises the resolved config; embedding this string in the run
    /// manifest makes every run reproducible from the manifest alone.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config serialise: {e}")))
    }
}

/// Overrides one scalar at a dotted path (`cohesive.ft`, `seed`,
/// `mesh.target_vf`) in the raw TOML, keeping the node's original type.
/// The path must already exist: sweeps vary a value, they never invent one.
pub fn override_scalar(text: &str, path: &str, value: f64) -> Result<String> {
    let mut root: toml::Value =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    let mut node = &mut root;
    for part in path.split('.') {
        node = match node {
            toml::Value::Table(t) => t.get_mut(part).ok_or_else(|| {
                Error::Config(format!("sweep axis `{path}`: no key `{part}` in config"))
            })?,
            _ => {
                return Err(Error::Config(format!(
                    "sweep axis `{path}`: `{part}` is not inside a table"
                )))
            }
        };
    }
    match node {
        toml::Value::Float(f) => *f = value,
        toml::Value::Integer(i) => {
            if value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "sweep axis `{path}` is an integer; value {value} is not"
                )));
            }
            *i = value as i64;
        }
        other => {
            return Err(Error::Config(format!(
                "sweep axis `{path}` is not a scalar (found {})",
                other.type_str()
            )))
        }
    }
    toml::to_string(&root).map_err(|e| Error::Config(format!("config serialise: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"
bc = "periodic"

[mesh]
kind = "box"
size = [1.0, 1.0, 1.0]
divisions = [1, 1, 1]

[[material]]
region = 0
type = "matrix"
e = 3760.0
nu = 0.39
nu_plas = 0.3
sigma_t0 = 29.0
sigma_c0 = 67.0
ht = 67.0
hc = 58.0
nt = 170.0
nc = 150.0

[[step]]
strain = [0.01, 0.0, 0.0, 0.0, 0.0, 0.0]
steps = 10
"#
        .to_string()
    }

    #[test]
    fn parses_minimal_with_defaults() {
        let cfg = RunConfig::parse(&minimal()).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.threads, 1);
        assert_eq!(cfg.solver.max_iter, 25);
        assert_eq!(cfg.output.curve, "curve.csv");
        assert!(matches!(cfg.bc, BcCfg::Periodic));
        assert!(cfg.cohesive.is_none());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = RunConfig::parse(&minimal()).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again.materials.len(), 1);
        assert_eq!(again.program[0].steps, 10);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let bad = minimal().replace("bc = \"periodic\"", "bc = \"periodic\"\nbogus = 1");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = minimal().replace("steps = 10", "steps = 0");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = minimal() + "\n[[material]]\nregion = 0\ntype = \"elastic\"\nep = 1.0\nnu_p = 0.2\nez = 1.0\nnu_pz = 0.2\ngzp = 0.4\n";
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("two materials"));
    }

    #[test]
    fn infinite_ft_parses() {
        let cfg = minimal() + "\n[cohesive]\nft = inf\ngf = 0.002\n";
        let cfg = RunConfig::parse(&cfg).unwrap();
        let c = cfg.cohesive.unwrap();
        assert!(c.ft.is_infinite());
        assert_eq!(c.between, [0, 1]);
        assert_eq!(c.h, 0.001);
    }

    #[test]
    fn override_keeps_types() {
        let text = format!("seed = 3\n{}\n[cohesive]\nft = 50.0\ngf = 0.002\n", minimal());
        let out = override_scalar(&text, "cohesive.ft", 35.0).unwrap();
        assert_eq!(RunConfig::parse(&out).unwrap().cohesive.unwrap().ft, 35.0);
        let out = override_scalar(&text, "seed", 9.0).unwrap();
        assert_eq!(RunConfig::parse(&out).unwrap().seed, 9);
        assert!(override_scalar(&text, "seed", 9.5).is_err());
        assert!(override_scalar(&text, "cohesive.nope", 1.0).is_err());
        assert!(override_scalar(&text, "bc", 1.0).is_err());
    }

    #[test]
    fn generate_requires_both_regions() {
        let text = minimal().replace(
            "kind = \"box\"\nsize = [1.0, 1.0, 1.0]\ndivisions = [1, 1, 1]",
            "kind = \"generate\"\nradius = 0.0025\ntarget_vf = 0.6\nmin_gap = 0.0002\ncell = [0.02, 0.02]\nlz = 0.004\nnz = 2\nedge = 0.0008",
        );
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("region 1 unbound"), "{err}");
    }
}

//! The RVE boundary-value problem: constraint systems for the three boundary
//! condition kinds, Newton solution of the resulting saddle-point equations,
//! and extraction of macroscopic stress and tangent stiffness.
//!
//! All three boundary conditions share one shape: the displacement field obeys
//! `C u = D eps_bar` enforced by Lagrange multipliers, the macroscopic stress
//! is `(1/V) D^T lambda`, and the macroscopic tangent comes from six unit
//! strain solves against the factorised saddle matrix.

use crate::cohesive::{cohesive_element, CohesiveParams, CohesiveState};
use crate::mesh::{tet_gradients, Mesh};
use crate::plasticity::{return_map, MatrixParams, PlasticState};
use crate::sparse::{LuSolver, TripletMatrix};
use crate::tensor::x_matrix;
use crate::yarn::TransIsoParams;
use crate::{Error, Result};
use nalgebra::{Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcKind {
    LinearDisplacement,
    Periodic,
    UniformTraction,
}

#[derive(Debug, Clone)]
pub enum RegionMaterial {
    Matrix(MatrixParams),
    /// Linear elastic (yarn or fibre); the fibre axis comes from the mesh
    /// direction field, defaulting to global z (the UD extrusion axis).
    Elastic(TransIsoParams),
}

/// Mesh plus resolved material bindings and precomputed per-element data.
pub struct Model {
    pub mesh: Mesh,
    pub cohesive: Option<CohesiveParams>,
    regions: BTreeMap<u32, RegionMaterial>,
    /// Constant stiffness for elastic tets, None for matrix tets.
    elem_c: Vec<Option<Matrix6<f64>>>,
    /// Index into the plastic state vector for matrix tets.
    plastic_index: Vec<Option<usize>>,
    pub volumes: Vec<f64>,
    pub volume: f64,
    n_plastic: usize,
}

impl Model {
    pub fn new(
        mesh: Mesh,
        regions: BTreeMap<u32, RegionMaterial>,
        cohesive: Option<CohesiveParams>,
    ) -> Result<Self> {
        for mat in regions.values() {
            match mat {
                RegionMaterial::Matrix(p) => p.validate()?,
                RegionMaterial::Elastic(p) => p.validate()?,
            }
        }
        if !mesh.cohesive.is_empty() {
            match &cohesive {
                None => {
                    return Err(Error::Config(
                        "mesh has cohesive elements but no cohesive parameters".into(),
                    ))
                }
                Some(p) => {
                    if !p.ft.is_finite() {
                        return Err(Error::Config(
                            "infinite interface strength means a tied interface: weld the mesh instead"
                                .into(),
                        ));
                    }
                    p.validate()?;
                }
            }
        }
        let mut elem_c = Vec::with_capacity(mesh.tets.len());
        let mut plastic_index = Vec::with_capacity(mesh.tets.len());
        let mut volumes = Vec::with_capacity(mesh.tets.len());
        let mut n_plastic = 0;
        for (e, t) in mesh.tets.iter().enumerate() {
            let mat = regions.get(&t.region).ok_or_else(|| {
                Error::Config(format!("no material bound to region {}", t.region))
            })?;
            match mat {
                RegionMaterial::Matrix(_) => {
                    elem_c.push(None);
                    plastic_index.push(Some(n_plastic));
                    n_plastic += 1;
                }
                RegionMaterial::Elastic(p) => {
                    let dir = mesh
                        .directions
                        .as_ref()
                        .map(|d| d[e])
                        .unwrap_or_else(Vector3::z);
                    elem_c.push(Some(p.element_stiffness_global(&dir)?));
                    plastic_index.push(None);
                }
            }
            volumes.push(crate::mesh::tet_volume(&mesh.nodes, &t.nodes));
        }
        let volume = volumes.iter().sum();
        Ok(Self {
            mesh,
            cohesive,
            regions,
            elem_c,
            plastic_index,
            volumes,
            volume,
            n_plastic,
        })
    }

    /// Index of a tet's slot in the plastic state vector, None for elastic
    /// regions.
    pub fn plastic_slot(&self, elem: usize) -> Option<usize> {
        self.plastic_index[elem]
    }

    pub fn matrix_params(&self, region: u32) -> Option<&MatrixParams> {
        match self.regions.get(&region) {
            Some(RegionMaterial::Matrix(p)) => Some(p),
            _ => None,
        }
    }

    fn any_matrix(&self) -> Option<&MatrixParams> {
        self.regions.values().find_map(|m| match m {
            RegionMaterial::Matrix(p) => Some(p),
            _ => None,
        })
    }

    /// Volume fraction of each region, by measured tet volumes.
    pub fn region_fractions(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (t, &v) in self.mesh.tets.iter().zip(&self.volumes) {
            *out.entry(t.region).or_insert(0.0) += v / self.volume;
        }
        out
    }
}

/// Internal variables for every integration point (one per matrix tet, three
/// per cohesive element).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub plastic: Vec<PlasticState>,
    pub cohesive: Vec<[CohesiveState; 3]>,
}

impl StateVector {
    fn zero(model: &Model) -> Self {
        Self {
            plastic: vec![PlasticState::default(); model.n_plastic],
            cohesive: vec![[CohesiveState::default(); 3]; model.mesh.cohesive.len()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintRow {
    /// Sparse coefficients over displacement dofs.
    pub cols: Vec<(usize, f64)>,
    /// Macro-strain coupling (row of D).
    pub d: [f64; 6],
}

pub struct ConstraintSystem {
    pub kind: BcKind,
    pub rows: Vec<ConstraintRow>,
    pub volume: f64,
}

impl ConstraintSystem {
    pub fn n_lagrange(&self) -> usize {
        self.rows.len()
    }

    pub fn apply_c(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.cols.iter().map(|&(c, v)| v * u[c]).sum())
            .collect()
    }

    pub fn apply_ct(&self, lambda: &[f64], ndof: usize) -> Vec<f64> {
        let mut out = vec![0.0; ndof];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in &row.cols {
                out[c] += v * lambda[r];
            }
        }
        out
    }

    pub fn d_times(&self, eps: &Vector6<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| (0..6).map(|k| r.d[k] * eps[k]).sum())
            .collect()
    }

    pub fn dt_times(&self, lambda: &[f64]) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        for (r, row) in self.rows.iter().enumerate() {
            for k in 0..6 {
                out[k] += row.d[k] * lambda[r];
            }
        }
        out
    }
}

/// 3-point edge-midpoint rule on a triangle: integrates quadratics exactly,
/// which covers products of linear shape functions and the affine map X.
fn face_gauss(
    nodes: &[Vector3<f64>],
    tri: &[usize; 3],
    area: f64,
) -> [(Vector3<f64>, [f64; 3]); 3] {
    let p = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    let _ = area;
    [
        ((p[0] + p[1]) / 2.0, [0.5, 0.5, 0.0]),
        ((p[1] + p[2]) / 2.0, [0.0, 0.5, 0.5]),
        ((p[0] + p[2]) / 2.0, [0.5, 0.0, 0.5]),
    ]
}

/// Builds the constraint system for one boundary-condition kind. `active`
/// masks macro-strain components and is only meaningful for uniform-traction
/// constraints, where dropping a strain row leaves that component exactly
/// traction-free (used for uniaxial-stress style programs).
pub fn build_constraints(mesh: &Mesh, kind: BcKind, active: [bool; 6]) -> Result<ConstraintSystem> {
    let volume = mesh.total_volume();
    let faces = mesh.boundary_faces()?;
    if kind != BcKind::UniformTraction && active != [true; 6] {
        return Err(Error::Config(
            "strain-component masking needs uniform-traction constraints".into(),
        ));
    }
    let mut rows = Vec::new();
    match kind {
        BcKind::LinearDisplacement => {
            let bnodes: Vec<usize> = {
                let mut s = BTreeSet::new();
                for f in &faces {
                    s.extend(f.nodes.iter().copied());
                }
                s.into_iter().collect()
            };
            let rank: BTreeMap<usize, usize> =
                bnodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
            let nb = bnodes.len();
            let mut mass: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nb];
            let mut dx: Vec<SMatrix<f64, 3, 6>> = vec![SMatrix::zeros(); nb];
            for f in &faces {
                let w = f.area / 3.0;
                for (y, shape) in face_gauss(&mesh.nodes, &f.nodes, f.area) {
                    let x = x_matrix(&y);
                    for a in 0..3 {
                        let b = rank[&f.nodes[a]];
                        dx[b] += x * (w * shape[a]);
                        for c in 0..3 {
                            *mass[b].entry(f.nodes[c]).or_insert(0.0) +=
                                w * shape[a] * shape[c];
                        }
                    }
                }
            }
            for (b, &node) in bnodes.iter().enumerate() {
                let _ = node;
                for i in 0..3 {
                    let cols = mass[b]
                        .iter()
                        .map(|(&a, &m)| (3 * a + i, m))
                        .collect();
                    let mut d = [0.0; 6];
                    for k in 0..6 {
                        d[k] = dx[b][(i, k)];
                    }
                    rows.push(ConstraintRow { cols, d });
                }
            }
        }
        BcKind::Periodic => {
            if mesh.periodic.is_empty() {
                return Err(Error::Config(
                    "periodic constraints need periodic node pairs in the mesh".into(),
                ));
            }
            // classes of nodes related by pair chains; one row per non-root
            // member avoids redundant cycles through edges and corners
            let nn = mesh.nodes.len();
            let mut parent: Vec<usize> = (0..nn).collect();
            fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
                while parent[i] != i {
                    parent[i] = parent[parent[i]];
                    i = parent[i];
                }
                i
            }
            for p in &mesh.periodic {
                let a = find(&mut parent, p.master);
                let b = find(&mut parent, p.slave);
                if a != b {
                    let (lo, hi) = (a.min(b), a.max(b));
                    parent[hi] = lo;
                }
            }
            let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for i in 0..nn {
                let r = find(&mut parent, i);
                if r != i {
                    members.entry(r).or_default().push(i);
                }
            }
            for (&root, list) in &members {
                for &m in list {
                    let dxm = x_matrix(&mesh.nodes[m]) - x_matrix(&mesh.nodes[root]);
                    for i in 0..3 {
                        let mut d = [0.0; 6];
                        for k in 0..6 {
                            d[k] = dxm[(i, k)];
                        }
                        rows.push(ConstraintRow {
                            cols: vec![(3 * m + i, 1.0), (3 * root + i, -1.0)],
                            d,
                        });
                    }
                }
            }
            // area-weighted translation pinning: the boundary average of the
            // fluctuation vanishes, and its multipliers stay zero because the
            // pair rows carry no net force
            let mut w: BTreeMap<usize, f64> = BTreeMap::new();
            let mut dx_total = SMatrix::<f64, 3, 6>::zeros();
            for f in &faces {
                let wq = f.area / 3.0;
                for (y, shape) in face_gauss(&mesh.nodes, &f.nodes, f.area) {
                    dx_total += x_matrix(&y) * wq;
                    for a in 0..3 {
                        *w.entry(f.nodes[a]).or_insert(0.0) += wq * shape[a];
                    }
                }
            }
            for i in 0..3 {
                let cols = w.iter().map(|(&n, &wn)| (3 * n + i, wn)).collect();
                let mut d = [0.0; 6];
                for k in 0..6 {
                    d[k] = dx_total[(i, k)];
                }
                rows.push(ConstraintRow { cols, d });
            }
        }
        BcKind::UniformTraction => {
            // per-node boundary integrals of N_a n_j and N_a
            let mut nint: BTreeMap<usize, Vector3<f64>> = BTreeMap::new();
            let mut wint: BTreeMap<usize, f64> = BTreeMap::new();
            for f in &faces {
                let wq = f.area / 3.0;
                for (_, shape) in face_gauss(&mesh.nodes, &f.nodes, f.area) {
                    for a in 0..3 {
                        *nint.entry(f.nodes[a]).or_insert_with(Vector3::zeros) +=
                            f.normal * (wq * shape[a]);
                        *wint.entry(f.nodes[a]).or_insert(0.0) += wq * shape[a];
                    }
                }
            }
            // strain rows: integral of u_i n_j + u_j n_i matches V * eps_bar
            // (engineering shears), so D = V I and sigma_bar = lambda
            const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)];
            for k in 0..6 {
                if !active[k] {
                    continue;
                }
                let (i, j) = PAIRS[k];
                let mut cols = Vec::with_capacity(2 * nint.len());
                for (&a, ni) in &nint {
                    if i == j {
                        cols.push((3 * a + i, ni[j]));
                    } else {
                        cols.push((3 * a + i, ni[j]));
                        cols.push((3 * a + j, ni[i]));
                    }
                }
                cols.sort_unstable_by_key(|&(c, _)| c);
                let mut d = [0.0; 6];
                d[k] = volume;
                rows.push(ConstraintRow { cols, d });
            }
            // rigid-body pinning: three translations, three rotations
            for i in 0..3 {
                let cols = wint.iter().map(|(&a, &wa)| (3 * a + i, wa)).collect();
                rows.push(ConstraintRow { cols, d: [0.0; 6] });
            }
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let mut cols = Vec::with_capacity(2 * nint.len());
                for (&a, ni) in &nint {
                    cols.push((3 * a + i, ni[j]));
                    cols.push((3 * a + j, -ni[i]));
                }
                cols.sort_unstable_by_key(|&(c, _)| c);
                rows.push(ConstraintRow { cols, d: [0.0; 6] });
            }
        }
    }
    Ok(ConstraintSystem { kind, rows, volume })
}

/// One assembly pass: tangent triplets into `trips` (displacement block only),
/// internal forces, trial state update, per-element stresses.
pub struct Assembled {
    pub f_int: Vec<f64>,
    pub states_new: StateVector,
    /// Per-tet stress.
    pub stresses: Vec<Vector6<f64>>,
    /// Per-cohesive-element damage at the three integration points.
    pub omega: Vec<[f64; 3]>,
    pub any_plastic: bool,
}

fn strain_displacement(g: &[Vector3<f64>; 4]) -> SMatrix<f64, 6, 12> {
    let mut b = SMatrix::zeros();
    for a in 0..4 {
        let (gx, gy, gz) = (g[a][0], g[a][1], g[a][2]);
        b[(0, 3 * a)] = gx;
        b[(1, 3 * a + 1)] = gy;
        b[(2, 3 * a + 2)] = gz;
        b[(3, 3 * a)] = gy;
        b[(3, 3 * a + 1)] = gx;
        b[(4, 3 * a + 1)] = gz;
        b[(4, 3 * a + 2)] = gy;
        b[(5, 3 * a)] = gz;
        b[(5, 3 * a + 2)] = gx;
    }
    b
}

const RETURN_MAP_TOL: f64 = 1e-10;

pub fn assemble(
    model: &Model,
    u: &[f64],
    states: &StateVector,
    trips: &mut TripletMatrix,
) -> Result<Assembled> {
    let mesh = &model.mesh;
    let mut f_int = vec![0.0; 3 * mesh.nodes.len()];
    let mut states_new = states.clone();
    let mut stresses = Vec::with_capacity(mesh.tets.len());
    let mut omega = Vec::with_capacity(mesh.cohesive.len());
    let mut any_plastic = false;

    for (e, t) in mesh.tets.iter().enumerate() {
        let (vol, g) = tet_gradients(&mesh.nodes, &t.nodes);
        let b = strain_displacement(&g);
        let mut ue = SMatrix::<f64, 12, 1>::zeros();
        for a in 0..4 {
            for i in 0..3 {
                ue[3 * a + i] = u[3 * t.nodes[a] + i];
            }
        }
        let eps = b * ue;
        let (sigma, tangent) = match model.plastic_index[e] {
            Some(pi) => {
                let p = model.matrix_params(t.region).unwrap();
                let resp = return_map(&eps.into(), &states.plastic[pi], p, RETURN_MAP_TOL)
                    .map_err(|err| Error::Solve(format!("element {e}: {err}")))?;
                states_new.plastic[pi] = resp.state_new;
                any_plastic |= resp.plastic;
                (resp.sigma, resp.tangent)
            }
            None => {
                let c = model.elem_c[e].as_ref().unwrap();
                (c * Vector6::from(eps), *c)
            }
        };
        let ke = b.transpose() * tangent * b * vol;
        let fe = b.transpose() * sigma * vol;
        for a in 0..4 {
            for i in 0..3 {
                let gi = 3 * t.nodes[a] + i;
                f_int[gi] += fe[3 * a + i];
                for c in 0..4 {
                    for j in 0..3 {
                        trips.add(gi, 3 * t.nodes[c] + j, ke[(3 * a + i, 3 * c + j)]);
                    }
                }
            }
        }
        stresses.push(sigma);
    }

    if !mesh.cohesive.is_empty() {
        let p = model.cohesive.as_ref().expect("checked at model build");
        for (ci, c) in mesh.cohesive.iter().enumerate() {
            let ids = [c.bottom[0], c.bottom[1], c.bottom[2], c.top[0], c.top[1], c.top[2]];
            let coords = ids.map(|n| mesh.nodes[n]);
            let mut ue = SMatrix::<f64, 18, 1>::zeros();
            for a in 0..6 {
                for i in 0..3 {
                    ue[3 * a + i] = u[3 * ids[a] + i];
                }
            }
            let el = cohesive_element(&coords, &ue, &states.cohesive[ci], p)
                .map_err(|err| Error::Solve(format!("cohesive element {ci}: {err}")))?;
            states_new.cohesive[ci] = el.states_new;
            omega.push(el.omega);
            for a in 0..6 {
                for i in 0..3 {
                    let gi = 3 * ids[a] + i;
                    f_int[gi] += el.f_int[3 * a + i];
                    for b in 0..6 {
                        for j in 0..3 {
                            trips.add(gi, 3 * ids[b] + j, el.k[(3 * a + i, 3 * b + j)]);
                        }
                    }
                }
            }
        }
    }

    Ok(Assembled { f_int, states_new, stresses, omega, any_plastic })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub rtol: f64,
    pub max_iter: usize,
    /// Smallest allowed substep, as a fraction of a program step.
    pub min_substep: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { rtol: 1e-6, max_iter: 25, min_substep: 1.0 / 1024.0 }
    }
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Newton iterations summed over substeps.
    pub iterations: usize,
    pub substeps: usize,
    /// Force-residual history of the final substep.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub eps_bar: Vector6<f64>,
    pub sigma_bar: Vector6<f64>,
    pub iterations: usize,
    pub substeps: usize,
}

/// A loaded RVE analysis: owns the displacement/multiplier vectors and the
/// internal-variable history, advancing one macro-strain target at a time.
pub struct Analysis<'m> {
    pub model: &'m Model,
    pub system: ConstraintSystem,
    pub settings: SolveSettings,
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eps_bar: Vector6<f64>,
    pub states: StateVector,
    last: Option<Assembled>,
    /// Saddle matrix of the last converged iterate (algorithmic tangent).
    last_saddle: Option<TripletMatrix>,
    force_scale: f64,
}

impl<'m> Analysis<'m> {
    pub fn new(model: &'m Model, kind: BcKind) -> Result<Self> {
        Self::with_mask(model, kind, [true; 6])
    }

    pub fn with_mask(model: &'m Model, kind: BcKind, active: [bool; 6]) -> Result<Self> {
        let system = build_constraints(&model.mesh, kind, active)?;
        let stress_scale = match model.any_matrix() {
            Some(p) => p.sigma_t0,
            None => {
                1e-3 * model
                    .elem_c
                    .iter()
                    .flatten()
                    .map(|c| c[(0, 0)])
                    .fold(1.0, f64::max)
            }
        };
        let force_scale = stress_scale * model.volume.powf(2.0 / 3.0);
        Ok(Self {
            model,
            system,
            settings: SolveSettings::default(),
            u: vec![0.0; 3 * model.mesh.nodes.len()],
            lambda: vec![0.0; 0],
            eps_bar: Vector6::zeros(),
            states: StateVector::zero(model),
            last: None,
            last_saddle: None,
            force_scale,
        }
        .init_lambda())
    }

    fn init_lambda(mut self) -> Self {
        self.lambda = vec![0.0; self.system.n_lagrange()];
        self
    }

    fn ndof(&self) -> usize {
        3 * self.model.mesh.nodes.len()
    }

    /// One Newton solve towards `target`; state committed only on success.
    fn try_solve(&mut self, target: &Vector6<f64>) -> Result<StepInfo> {
        let ndof = self.ndof();
        let nlag = self.system.n_lagrange();
        let mut u = self.u.clone();
        let mut lambda = self.lambda.clone();
        let d_eps = self.system.d_times(target);
        let con_scale = 1.0 + d_eps.iter().map(|x| x * x).sum::<f64>().sqrt();
        let atol = 1e-10 * self.force_scale;
        let mut history = Vec::new();
        let mut ref_norm: Option<f64> = None;

        for it in 0..=self.settings.max_iter {
            let mut trips = TripletMatrix::new(ndof + nlag);
            let assembled = assemble(self.model, &u, &self.states, &mut trips)?;
            for (r, row) in self.system.rows.iter().enumerate() {
                for &(c, v) in &row.cols {
                    trips.add(ndof + r, c, v);
                    trips.add(c, ndof + r, v);
                }
            }
            let ct_lambda = self.system.apply_ct(&lambda, ndof);
            let cu = self.system.apply_c(&u);
            let mut rhs = vec![0.0; ndof + nlag];
            let mut force_norm2 = 0.0;
            for i in 0..ndof {
                let r = ct_lambda[i] - assembled.f_int[i];
                rhs[i] = r;
                force_norm2 += r * r;
            }
            let mut con_norm2 = 0.0;
            for r in 0..nlag {
                let v = d_eps[r] - cu[r];
                rhs[ndof + r] = v;
                con_norm2 += v * v;
            }
            let force_norm = force_norm2.sqrt();
            let con_norm = con_norm2.sqrt();
            history.push(force_norm);
            // the first iterate of a continuation step only violates the
            // constraint block, so the force reference spans the predictor too
            if it <= 1 {
                ref_norm = Some(ref_norm.unwrap_or(0.0).max(force_norm));
            }
            let fref = ref_norm.unwrap();
            if force_norm <= self.settings.rtol * fref + atol && con_norm <= 1e-10 * con_scale {
                self.u = u;
                self.lambda = lambda;
                self.states = assembled.states_new.clone();
                self.eps_bar = *target;
                self.last = Some(assembled);
                self.last_saddle = Some(trips);
                return Ok(StepInfo {
                    iterations: it,
                    substeps: 1,
                    residual_history: history,
                });
            }
            if it == self.settings.max_iter {
                break;
            }
            let solver = LuSolver::factor(&trips.build()?)?;
            let delta = solver.solve(&rhs);
            for i in 0..ndof {
                u[i] += delta[i];
            }
            for r in 0..nlag {
                lambda[r] -= delta[ndof + r];
            }
        }
        Err(Error::Solve(format!(
            "no convergence in {} Newton iterations (residual {:.3e})",
            self.settings.max_iter,
            history.last().copied().unwrap_or(f64::NAN)
        )))
    }

    /// Advances the macro strain to `target`, bisecting the increment on
    /// divergence down to `min_substep` of the requested step.
    pub fn step_to(&mut self, target: &Vector6<f64>) -> Result<StepInfo> {
        let start = self.eps_bar;
        let full = target - start;
        let mut done = 0.0f64;
        let mut frac = 1.0f64;
        let mut total = StepInfo { iterations: 0, substeps: 0, residual_history: Vec::new() };
        while done < 1.0 - 1e-12 {
            let dt = frac.min(1.0 - done);
            let sub_target = start + full * (done + dt);
            match self.try_solve(&sub_target) {
                Ok(info) => {
                    done += dt;
                    total.iterations += info.iterations;
                    total.substeps += 1;
                    total.residual_history = info.residual_history;
                    frac = (dt * 2.0).min(1.0);
                }
                Err(_) if dt / 2.0 >= self.settings.min_substep - 1e-15 => {
                    frac = dt / 2.0;
                }
                Err(e) => {
                    return Err(Error::Solve(format!(
                        "step stalled at fraction {done:.4} even at the smallest substep: {e}"
                    )));
                }
            }
        }
        Ok(total)
    }

    /// Macroscopic stress of the current converged state: (1/V) D^T lambda.
    /// Volume-average macro strain from the boundary integral
    /// (1/V) ∫ (u_i n_j + u_j n_i) dS. Matches the prescribed target when
    /// all components are active and fills in the free (traction-free)
    /// components of masked analyses.
    pub fn average_strain(&self) -> Result<Vector6<f64>> {
        let mesh = &self.model.mesh;
        let faces = mesh.boundary_faces()?;
        let mut e = Vector6::zeros();
        for f in &faces {
            let wq = f.area / 3.0;
            for (_, shape) in face_gauss(&mesh.nodes, &f.nodes, f.area) {
                for a in 0..3 {
                    let base = 3 * f.nodes[a];
                    let u = Vector3::new(self.u[base], self.u[base + 1], self.u[base + 2])
                        * (wq * shape[a]);
                    let n = f.normal;
                    e[0] += u.x * n.x;
                    e[1] += u.y * n.y;
                    e[2] += u.z * n.z;
                    e[3] += u.x * n.y + u.y * n.x;
                    e[4] += u.y * n.z + u.z * n.y;
                    e[5] += u.z * n.x + u.x * n.z;
                }
            }
        }
        Ok(e / self.model.volume)
    }

    pub fn homogenized_stress(&self) -> Vector6<f64> {
        self.system.dt_times(&self.lambda) / self.system.volume
    }

    /// Volume average of the element stresses; must match
    /// `homogenized_stress` at every converged step.
    pub fn volume_average_stress(&self) -> Result<Vector6<f64>> {
        let last = self.last.as_ref().ok_or_else(|| {
            Error::Solve("no converged state yet".into())
        })?;
        let mut s = Vector6::zeros();
        for (sig, &v) in last.stresses.iter().zip(&self.model.volumes) {
            s += sig * v;
        }
        Ok(s / self.model.volume)
    }

    /// Per-cohesive-element damage of the last converged state.
    pub fn damage(&self) -> Option<&[[f64; 3]]> {
        self.last.as_ref().map(|a| a.omega.as_slice())
    }

    pub fn last_stresses(&self) -> Option<&[Vector6<f64>]> {
        self.last.as_ref().map(|a| a.stresses.as_slice())
    }

    /// Macroscopic algorithmic tangent: factorises the converged saddle
    /// matrix once and probes it with the six unit macro strains.
    pub fn homogenized_stiffness(&mut self) -> Result<Matrix6<f64>> {
        let ndof = self.ndof();
        let nlag = self.system.n_lagrange();
        let trips = match &self.last_saddle {
            Some(t) => t,
            None => {
                // pristine analysis: build the elastic saddle at zero state
                let mut t = TripletMatrix::new(ndof + nlag);
                assemble(self.model, &self.u, &self.states, &mut t)?;
                for (r, row) in self.system.rows.iter().enumerate() {
                    for &(c, v) in &row.cols {
                        t.add(ndof + r, c, v);
                        t.add(c, ndof + r, v);
                    }
                }
                self.last_saddle = Some(t);
                self.last_saddle.as_ref().unwrap()
            }
        };
        let solver = LuSolver::factor(&trips.build()?)?;
        let mut rhs = Vec::with_capacity(6);
        for k in 0..6 {
            let mut e = Vector6::zeros();
            e[k] = 1.0;
            let d = self.system.d_times(&e);
            let mut b = vec![0.0; ndof + nlag];
            b[ndof..].copy_from_slice(&d);
            rhs.push(b);
        }
        let sols = solver.solve_many(&rhs);
        let mut cbar = Matrix6::zeros();
        for (k, sol) in sols.iter().enumerate() {
            // the Newton update is lambda -= delta, so the multiplier
            // response to the unit strain is the negated lagrange block
            let dl: Vec<f64> = sol[ndof..].iter().map(|x| -x).collect();
            let col = self.system.dt_times(&dl) / self.system.volume;
            for i in 0..6 {
                cbar[(i, k)] = col[i];
            }
        }
        Ok(cbar)
    }

    /// Runs a strain program: each target reached in `steps` uniform
    /// increments from the previous one, recording stress after each.
    pub fn run_program(&mut self, targets: &[(Vector6<f64>, usize)]) -> Result<Vec<StepRecord>> {
        let mut out = Vec::new();
        for &(eps, steps) in targets {
            if steps == 0 {
                return Err(Error::Config("a program target needs at least one step".into()));
            }
            let from = self.eps_bar;
            for s in 1..=steps {
                let t = from + (eps - from) * (s as f64 / steps as f64);
                let info = self.step_to(&t)?;
                out.push(StepRecord {
                    eps_bar: self.eps_bar,
                    sigma_bar: self.homogenized_stress(),
                    iterations: info.iterations,
                    substeps: info.substeps,
                });
            }
        }
        Ok(out)
    }
}

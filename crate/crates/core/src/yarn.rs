//! Transversely isotropic yarn elasticity and per-element fibre directions,
//! including the potential-flow direction solver for curved yarns.

use crate::mesh::{tet_gradients, Mesh};
use crate::sparse::{LuSolver, TripletMatrix};
use crate::tensor::{rotate_stiffness, Basis3};
use crate::{Error, Result};
use nalgebra::{Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Five-constant transversely isotropic elasticity, fibre axis = local z.
/// `nu_pz` couples axial stress to transverse contraction (entry -nu_pz/Ez
/// of the compliance), which keeps the matrix symmetric as written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransIsoParams {
    /// transverse Young's modulus (MPa)
    pub ep: f64,
    /// transverse (in-plane) Poisson's ratio
    pub nu_p: f64,
    /// axial Young's modulus (MPa)
    pub ez: f64,
    /// axial Poisson's ratio
    pub nu_pz: f64,
    /// axial shear modulus (MPa)
    pub gzp: f64,
}

impl TransIsoParams {
    pub fn isotropic_from_fibre(ef: f64, nu_f: f64) -> Result<Self> {
        if !(ef > 0.0) || !(0.0..0.5).contains(&nu_f) {
            return Err(Error::Params(format!(
                "fibre constants out of range: E={ef}, nu={nu_f}"
            )));
        }
        Ok(Self {
            ep: ef,
            nu_p: nu_f,
            ez: ef,
            nu_pz: nu_f,
            gzp: ef / (2.0 * (1.0 + nu_f)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.local_stiffness().map(|_| ())
    }

    /// Stiffness in the fibre frame: compliance assembled from the five
    /// constants (in-plane shear Gp = Ep/(2(1+nu_p))) and inverted. Rejected
    /// if not positive definite.
    pub fn local_stiffness(&self) -> Result<Matrix6<f64>> {
        if !(self.ep > 0.0 && self.ez > 0.0 && self.gzp > 0.0) {
            return Err(Error::Params("yarn moduli must be positive".into()));
        }
        let gp = self.ep / (2.0 * (1.0 + self.nu_p));
        if !(gp > 0.0) {
            return Err(Error::Params("in-plane shear modulus must be positive".into()));
        }
        let mut s = Matrix6::zeros();
        s[(0, 0)] = 1.0 / self.ep;
        s[(1, 1)] = 1.0 / self.ep;
        s[(2, 2)] = 1.0 / self.ez;
        s[(0, 1)] = -self.nu_p / self.ep;
        s[(1, 0)] = -self.nu_p / self.ep;
        for k in 0..2 {
            s[(k, 2)] = -self.nu_pz / self.ez;
            s[(2, k)] = -self.nu_pz / self.ez;
        }
        s[(3, 3)] = 1.0 / gp;
        s[(4, 4)] = 1.0 / self.gzp;
        s[(5, 5)] = 1.0 / self.gzp;
        let eig = s.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::Params(format!(
                "yarn compliance is not positive definite (eigenvalue {min:.3e})"
            )));
        }
        let c = s.try_inverse().ok_or_else(|| Error::Params("singular yarn compliance".into()))?;
        Ok((c + c.transpose()) * 0.5)
    }

    /// Stiffness with the fibre axis along `dir` in global coordinates.
    pub fn element_stiffness_global(&self, dir: &Vector3<f64>) -> Result<Matrix6<f64>> {
        let basis = Basis3::from_axis(dir)?;
        Ok(rotate_stiffness(&self.local_stiffness()?, &basis))
    }
}

/// Result of the potential-flow solve on one yarn region. `residual` holds
/// the full stiffness-times-potential product per node; its partial sums are
/// the discrete fluxes through any node-partition cut.
#[derive(Debug, Clone)]
pub struct FlowField {
    /// tet id -> unit fibre direction
    pub directions: BTreeMap<usize, Vector3<f64>>,
    /// global node id -> potential
    pub phi: BTreeMap<usize, f64>,
    residual: BTreeMap<usize, f64>,
    pub inlet_flux: f64,
    pub outlet_flux: f64,
    pub warnings: Vec<String>,
}

impl FlowField {
    /// Discrete flux leaving the node set selected by `inlet_side` (which
    /// must contain the inlet and exclude the outlet): minus the sum of
    /// nodal residuals over the set.
    pub fn partition_flux<F: Fn(usize) -> bool>(&self, inlet_side: F) -> f64 {
        -self
            .residual
            .iter()
            .filter(|(&n, _)| inlet_side(n))
            .map(|(_, r)| r)
            .sum::<f64>()
    }
}

/// Solves the Laplace problem on the tets of `region` with potential 0 on the
/// inlet faces and 1 on the outlet faces, zero flux elsewhere; the per-element
/// fibre direction is the normalised potential gradient.
pub fn potential_flow_directions(
    mesh: &Mesh,
    region: u32,
    inlet_faces: &[[usize; 3]],
    outlet_faces: &[[usize; 3]],
) -> Result<FlowField> {
    let tets: Vec<usize> = mesh
        .tets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.region == region)
        .map(|(i, _)| i)
        .collect();
    if tets.is_empty() {
        return Err(Error::Mesh(format!("region {region} has no elements")));
    }
    if inlet_faces.is_empty() || outlet_faces.is_empty() {
        return Err(Error::Mesh("inlet and outlet face sets must be non-empty".into()));
    }

    // local node numbering over the region
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for &ti in &tets {
        for &n in &mesh.tets[ti].nodes {
            let next = local.len();
            local.entry(n).or_insert(next);
        }
    }
    let globals: Vec<usize> = local.keys().cloned().collect();
    let nn = globals.len();

    // face-connectivity of the region
    {
        let mut face_map: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (k, &ti) in tets.iter().enumerate() {
            let n = mesh.tets[ti].nodes;
            for f in [[n[0], n[1], n[2]], [n[0], n[1], n[3]], [n[0], n[2], n[3]], [n[1], n[2], n[3]]] {
                let mut key = f;
                key.sort_unstable();
                face_map.entry(key).or_default().push(k);
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); tets.len()];
        for owners in face_map.values() {
            if owners.len() == 2 {
                adj[owners[0]].push(owners[1]);
                adj[owners[1]].push(owners[0]);
            }
        }
        let mut seen = vec![false; tets.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(k) = stack.pop() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    reached += 1;
                    stack.push(m);
                }
            }
        }
        if reached != tets.len() {
            return Err(Error::Mesh(format!(
                "region {region} is not face-connected ({reached} of {} elements reachable)",
                tets.len()
            )));
        }
    }

    let node_set = |faces: &[[usize; 3]], label: &str| -> Result<BTreeSet<usize>> {
        let mut s = BTreeSet::new();
        for f in faces {
            for &n in f {
                if !local.contains_key(&n) {
                    return Err(Error::Mesh(format!(
                        "{label} face node {n} is not part of region {region}"
                    )));
                }
                s.insert(n);
            }
        }
        Ok(s)
    };
    let inlet_nodes = node_set(inlet_faces, "inlet")?;
    let outlet_nodes = node_set(outlet_faces, "outlet")?;
    if !inlet_nodes.is_disjoint(&outlet_nodes) {
        return Err(Error::Mesh("inlet and outlet face sets share nodes".into()));
    }

    // Dirichlet status per local node
    #[derive(Clone, Copy)]
    enum Status {
        Free(usize),
        Fixed(f64),
    }
    let mut status = vec![Status::Free(usize::MAX); nn];
    for (&g, &l) in &local {
        if inlet_nodes.contains(&g) {
            status[l] = Status::Fixed(0.0);
        } else if outlet_nodes.contains(&g) {
            status[l] = Status::Fixed(1.0);
        }
    }
    let mut nfree = 0;
    for s in &mut status {
        if let Status::Free(idx) = s {
            *idx = nfree;
            nfree += 1;
        }
    }
    if nfree == 0 {
        return Err(Error::Mesh("no free nodes between inlet and outlet".into()));
    }

    let mut a = TripletMatrix::new(nfree);
    let mut rhs = vec![0.0; nfree];
    let mut element_data: Vec<(f64, [Vector3<f64>; 4])> = Vec::with_capacity(tets.len());
    for &ti in &tets {
        let t = &mesh.tets[ti];
        let (vol, g) = tet_gradients(&mesh.nodes, &t.nodes);
        for i in 0..4 {
            let li = local[&t.nodes[i]];
            let Status::Free(fi) = status[li] else { continue };
            for j in 0..4 {
                let lj = local[&t.nodes[j]];
                let kij = vol * g[i].dot(&g[j]);
                match status[lj] {
                    Status::Free(fj) => a.add(fi, fj, kij),
                    Status::Fixed(v) => rhs[fi] -= kij * v,
                }
            }
        }
        element_data.push((vol, g));
    }
    let solver = LuSolver::factor(&a.build()?)?;
    let x = solver.solve(&rhs);

    let mut phi_local = vec![0.0; nn];
    for (l, s) in status.iter().enumerate() {
        phi_local[l] = match s {
            Status::Free(f) => x[*f],
            Status::Fixed(v) => *v,
        };
    }

    // full residual K*phi per node: nonzero only where flux enters/leaves
    let mut residual_local = vec![0.0; nn];
    let mut grads: Vec<Vector3<f64>> = Vec::with_capacity(tets.len());
    for (k, &ti) in tets.iter().enumerate() {
        let t = &mesh.tets[ti];
        let (vol, g) = element_data[k];
        let mut grad = Vector3::zeros();
        for i in 0..4 {
            grad += g[i] * phi_local[local[&t.nodes[i]]];
        }
        grads.push(grad);
        for i in 0..4 {
            let li = local[&t.nodes[i]];
            residual_local[li] += vol * g[i].dot(&grad);
        }
    }

    let inlet_flux: f64 = -inlet_nodes.iter().map(|n| residual_local[local[n]]).sum::<f64>();
    let outlet_flux: f64 = outlet_nodes.iter().map(|n| residual_local[local[n]]).sum::<f64>();

    // normalise; elements with a vanishing gradient inherit the average of
    // face-adjacent neighbours (saddle points of the potential)
    let gmax = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if gmax == 0.0 {
        return Err(Error::Mesh("potential gradient vanishes everywhere".into()));
    }
    let mut warnings = Vec::new();
    let mut dir: Vec<Option<Vector3<f64>>> = grads
        .iter()
        .map(|g| (g.norm() > 1e-10 * gmax).then(|| g.normalize()))
        .collect();
    if dir.iter().any(|d| d.is_none()) {
        let flagged = dir.iter().filter(|d| d.is_none()).count();
        warnings.push(format!(
            "{flagged} elements had a vanishing potential gradient; used neighbour averages"
        ));
        // rebuild face adjacency (region-local)
        let mut face_map: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (k, &ti) in tets.iter().enumerate() {
            let n = mesh.tets[ti].nodes;
            for f in [[n[0], n[1], n[2]], [n[0], n[1], n[3]], [n[0], n[2], n[3]], [n[1], n[2], n[3]]] {
                let mut key = f;
                key.sort_unstable();
                face_map.entry(key).or_default().push(k);
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); tets.len()];
        for owners in face_map.values() {
            if owners.len() == 2 {
                adj[owners[0]].push(owners[1]);
                adj[owners[1]].push(owners[0]);
            }
        }
        loop {
            let mut progressed = false;
            for k in 0..dir.len() {
                if dir[k].is_some() {
                    continue;
                }
                let mut sum = Vector3::zeros();
                for &m in &adj[k] {
                    if let Some(d) = dir[m] {
                        sum += d;
                    }
                }
                if sum.norm() > 1e-12 {
                    dir[k] = Some(sum.normalize());
                    progressed = true;
                }
            }
            if dir.iter().all(|d| d.is_some()) {
                break;
            }
            if !progressed {
                return Err(Error::Mesh(
                    "vanishing-gradient elements could not inherit a direction".into(),
                ));
            }
        }
    }

    let directions = tets
        .iter()
        .zip(dir)
        .map(|(&ti, d)| (ti, d.unwrap()))
        .collect();
    let phi = local.iter().map(|(&g, &l)| (g, phi_local[l])).collect();
    let residual = local.iter().map(|(&g, &l)| (g, residual_local[l])).collect();
    Ok(FlowField {
        directions,
        phi,
        residual,
        inlet_flux,
        outlet_flux,
        warnings,
    })
}

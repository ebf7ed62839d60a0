//! Helpers shared between integration-test targets: the reference material
//! parameter set, an independent scalar integrator for uniaxial stress, and
//! small mesh builders.
#![allow(dead_code)]

use nalgebra::Vector3;
use rvehom::mesh::{tet_volume, Mesh, Tet};
use rvehom::plasticity::MatrixParams;

/// Calibrated epoxy-matrix parameter set used across the test suite (MPa).
pub fn table1() -> MatrixParams {
    MatrixParams {
        e: 3760.0,
        nu: 0.39,
        nu_plas: 0.3,
        sigma_t0: 29.0,
        sigma_c0: 67.0,
        ht: 67.0,
        hc: 58.0,
        nt: 170.0,
        nc: 150.0,
    }
}

/// Piecewise-linear interpolation over a sorted (x, y) history; panics if
/// `x` falls outside the sampled range.
pub fn interp(hist: &[(f64, f64)], x: f64) -> f64 {
    let i = hist.partition_point(|&(a, _)| a < x);
    assert!(i > 0 && i < hist.len(), "interpolation point outside sampled range");
    let (x0, y0) = hist[i - 1];
    let (x1, y1) = hist[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Independent scalar integrator for uniaxial stress: three unknowns per
/// plastic step (axial stress, plastic multiplier, equivalent-plastic-strain
/// increment), finite-difference Jacobian. Shares only the constitutive
/// formulas with the library, none of the return-map code.
pub struct ScalarOracle {
    p: MatrixParams,
    ep_ax: f64,
    alpha: f64,
}

impl ScalarOracle {
    pub fn new(p: MatrixParams) -> Self {
        Self { p, ep_ax: 0.0, alpha: 0.0 }
    }

    fn strengths(&self, a: f64) -> (f64, f64) {
        (
            self.p.sigma_t0 + self.p.ht * (1.0 - (-self.p.nt * a).exp()),
            self.p.sigma_c0 + self.p.hc * (1.0 - (-self.p.nc * a).exp()),
        )
    }

    /// Residual of the implicit step at axial strain `eps`.
    fn residual(&self, eps: f64, x: [f64; 3]) -> [f64; 3] {
        let [s, dg, de] = x;
        let p = &self.p;
        let ag = (1.0 - 2.0 * p.nu_plas) / (1.0 + p.nu_plas);
        let (st, sc) = self.strengths(self.alpha + de);
        // uniaxial stress diag(s,0,0): deviator (2s/3, -s/3, -s/3)
        let m_ax = 4.0 * s + 2.0 * ag * (sc - st);
        let m_lat = -2.0 * s + 2.0 * ag * (sc - st);
        let m_norm = ((m_ax * m_ax + 2.0 * m_lat * m_lat)
            / (1.0 + 2.0 * p.nu_plas * p.nu_plas))
            .sqrt();
        [
            (s - p.e * (eps - self.ep_ax - dg * m_ax)) / p.e,
            2.0 * (s - st) * (s + sc) / (p.sigma_t0 * p.sigma_t0),
            de - dg * m_norm,
        ]
    }

    pub fn step(&mut self, eps: f64) -> f64 {
        let p = self.p;
        let s_tr = p.e * (eps - self.ep_ax);
        let (st, sc) = self.strengths(self.alpha);
        if 2.0 * (s_tr - st) * (s_tr + sc) <= 1e-12 * p.sigma_t0 * p.sigma_t0 {
            return s_tr;
        }
        let mut x = [s_tr, 0.0, 0.0];
        for _ in 0..100 {
            let r = self.residual(eps, x);
            let n0 = norm3(&r);
            if n0 < 1e-13 {
                break;
            }
            // FD Jacobian
            let mut j = [[0.0; 3]; 3];
            for c in 0..3 {
                let h = 1e-8 * x[c].abs().max(1.0);
                let mut xp = x;
                xp[c] += h;
                let rp = self.residual(eps, xp);
                for (row, jr) in j.iter_mut().enumerate() {
                    jr[c] = (rp[row] - r[row]) / h;
                }
            }
            let dx = solve3(&j, &[-r[0], -r[1], -r[2]]);
            let mut step = 1.0;
            loop {
                let xt = [x[0] + step * dx[0], x[1] + step * dx[1], x[2] + step * dx[2]];
                if norm3(&self.residual(eps, xt)) < n0 || step < 1e-8 {
                    x = xt;
                    break;
                }
                step *= 0.5;
            }
        }
        let [s, dg, de] = x;
        let ag = (1.0 - 2.0 * p.nu_plas) / (1.0 + p.nu_plas);
        let (st, sc) = self.strengths(self.alpha + de);
        self.ep_ax += dg * (4.0 * s + 2.0 * ag * (sc - st));
        self.alpha += de;
        s
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> [f64; 3] {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let v = Vector3::new(b[0], b[1], b[2]);
    let x = m.lu().solve(&v).expect("singular 3x3 oracle system");
    [x[0], x[1], x[2]]
}

/// Tet mesh over the voxels where `active(i, j, k)` holds, cell size `h`.
pub fn voxel_mesh(
    h: f64,
    n: (usize, usize, usize),
    active: impl Fn(usize, usize, usize) -> bool,
    region: u32,
) -> Mesh {
    use std::collections::BTreeMap;
    let mut ids: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut tets = Vec::new();
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    fn corner_id(
        ids: &mut std::collections::BTreeMap<(usize, usize, usize), usize>,
        nodes: &mut Vec<Vector3<f64>>,
        h: f64,
        c: (usize, usize, usize),
    ) -> usize {
        *ids.entry(c).or_insert_with(|| {
            nodes.push(Vector3::new(h * c.0 as f64, h * c.1 as f64, h * c.2 as f64));
            nodes.len() - 1
        })
    }
    for k in 0..n.2 {
        for j in 0..n.1 {
            for i in 0..n.0 {
                if !active(i, j, k) {
                    continue;
                }
                for perm in PERMS {
                    let mut corners = [[0usize; 3]; 4];
                    for step in 0..3 {
                        corners[step + 1] = corners[step];
                        corners[step + 1][perm[step]] += 1;
                    }
                    let id4 = corners.map(|c| {
                        corner_id(&mut ids, &mut nodes, h, (i + c[0], j + c[1], k + c[2]))
                    });
                    let mut t = Tet { nodes: id4, region };
                    if tet_volume(&nodes, &t.nodes) < 0.0 {
                        t.nodes.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }
    let m = Mesh { nodes, tets, ..Default::default() };
    m.validate().unwrap();
    m
}

/// Boundary faces whose nodes all satisfy `pred`, as node triples.
pub fn faces_where(m: &Mesh, pred: impl Fn(&Vector3<f64>) -> bool) -> Vec<[usize; 3]> {
    m.boundary_faces()
        .unwrap()
        .into_iter()
        .filter(|f| f.nodes.iter().all(|&n| pred(&m.nodes[n])))
        .map(|f| f.nodes)
        .collect()
}

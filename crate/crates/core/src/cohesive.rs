//! Cohesive interface law and zero-thickness 6-node interface elements.
//!
//! The traction-separation law is linear to a peak strength ft at jump
//! delta0 = ft/E0 (with E0 = Em/h a penalty-like initial stiffness), then
//! softens linearly to zero at delta_max = 2 Gf / ft, so the area under the
//! envelope is exactly the fracture energy Gf. Damage is driven by the
//! largest effective jump reached; unloading returns along the secant to the
//! origin. Interpenetration carries the undamaged normal stiffness.

use crate::{Error, Result};
use nalgebra::{Matrix3, SMatrix, Vector3};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CohesiveParams {
    /// Interface strength (MPa). `f64::INFINITY` marks a tied interface; the
    /// solver welds such interfaces instead of evaluating the law.
    pub ft: f64,
    /// Fracture energy (N/mm).
    pub gf: f64,
    /// Shear weight in the effective jump.
    pub beta: f64,
    /// Matrix Young's modulus used for the initial stiffness (MPa).
    pub em: f64,
    /// Nominal interface thickness (mm).
    pub h: f64,
}

impl CohesiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gf > 0.0 && self.em > 0.0 && self.h > 0.0 && self.beta >= 0.0 && self.ft > 0.0)
        {
            return Err(Error::Params(format!("cohesive parameters out of range: {self:?}")));
        }
        if self.ft.is_finite() && 2.0 * self.gf * self.e0() <= self.ft * self.ft {
            return Err(Error::Params(format!(
                "cohesive law snaps back within a point: 2 Gf E0 = {:.4e} <= ft^2 = {:.4e}",
                2.0 * self.gf * self.e0(),
                self.ft * self.ft
            )));
        }
        Ok(())
    }

    /// Initial (penalty) stiffness E0 = Em / h (N/mm^3).
    pub fn e0(&self) -> f64 {
        self.em / self.h
    }

    /// Jump at peak traction.
    pub fn delta0(&self) -> f64 {
        self.ft / self.e0()
    }

    /// Jump at complete decohesion.
    pub fn delta_max(&self) -> f64 {
        2.0 * self.gf / self.ft
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohesiveState {
    /// Largest effective jump reached (mm).
    pub kappa: f64,
}

impl Default for CohesiveState {
    fn default() -> Self {
        Self { kappa: 0.0 }
    }
}

/// Effective jump; interpenetration does not drive damage.
pub fn effective_jump(delta_n: f64, delta_s1: f64, delta_s2: f64, beta: f64) -> f64 {
    let dn = delta_n.max(0.0);
    (dn * dn + beta * (delta_s1 * delta_s1 + delta_s2 * delta_s2)).sqrt()
}

/// Damage as a function of the history variable. The closed form is fixed by
/// omega(delta0) = 0, omega(delta_max) = 1 and a linear traction decay, which
/// makes the dissipated envelope energy exactly Gf.
pub fn damage(kappa: f64, p: &CohesiveParams) -> f64 {
    let d0 = p.delta0();
    if kappa <= d0 {
        return 0.0;
    }
    if kappa >= p.delta_max() {
        return 1.0;
    }
    let a = 2.0 * p.gf * p.e0();
    (a * (kappa - d0) / (kappa * (a - p.ft * p.ft))).clamp(0.0, 1.0)
}

fn damage_rate(kappa: f64, p: &CohesiveParams) -> f64 {
    let d0 = p.delta0();
    if kappa <= d0 || kappa >= p.delta_max() {
        return 0.0;
    }
    let a = 2.0 * p.gf * p.e0();
    a * d0 / ((a - p.ft * p.ft) * kappa * kappa)
}

/// Local traction, updated state and consistent local tangent for a jump
/// `(delta_n, delta_s1, delta_s2)`.
pub fn traction(
    jump: Vector3<f64>,
    state: &CohesiveState,
    p: &CohesiveParams,
) -> (Vector3<f64>, CohesiveState, Matrix3<f64>) {
    let e0 = p.e0();
    let (dn, ds1, ds2) = (jump[0], jump[1], jump[2]);
    let deff = effective_jump(dn, ds1, ds2, p.beta);
    let kappa = state.kappa.max(deff);
    let omega = damage(kappa, p);

    let mut t = Vector3::new((1.0 - omega) * e0 * dn, (1.0 - omega) * e0 * ds1, (1.0 - omega) * e0 * ds2);
    let mut d = Matrix3::from_diagonal(&Vector3::new(
        (1.0 - omega) * e0,
        (1.0 - omega) * e0,
        (1.0 - omega) * e0,
    ));
    if dn < 0.0 {
        // undamaged penalty against interpenetration
        t[0] = e0 * dn;
        d[(0, 0)] = e0;
    }

    // softening contribution on the loading envelope (strict growth, so a
    // state merely touching its history limit unloads along the secant)
    let loading = deff > state.kappa;
    let drate = damage_rate(kappa, p);
    if loading && drate > 0.0 {
        let dkappa_djump = Vector3::new(dn.max(0.0), p.beta * ds1, p.beta * ds2) / deff;
        let damaged = Vector3::new(if dn >= 0.0 { dn } else { 0.0 }, ds1, ds2);
        d -= e0 * drate * damaged * dkappa_djump.transpose();
    }

    (t, CohesiveState { kappa }, d)
}

/// Degrees of freedom: bottom nodes 0..3 then top nodes 3..6, xyz each.
/// Bottom winding must give a normal pointing towards the top face.
pub struct CohesiveElement {
    pub k: SMatrix<f64, 18, 18>,
    pub f_int: SMatrix<f64, 18, 1>,
    pub states_new: [CohesiveState; 3],
    /// Damage at each integration point after the update.
    pub omega: [f64; 3],
}

const GP: [(f64, f64, f64); 3] = [
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
    (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0),
];

/// Integrates one zero-thickness interface element over its (current)
/// mid-surface with a 3-point rule. The local frame is rebuilt from the
/// deformed mid-surface so rigid rotations of the pair leave the response
/// frame-indifferent.
pub fn cohesive_element(
    coords: &[Vector3<f64>; 6],
    u: &SMatrix<f64, 18, 1>,
    states: &[CohesiveState; 3],
    p: &CohesiveParams,
) -> Result<CohesiveElement> {
    // current mid-surface triangle
    let mut mid = [Vector3::zeros(); 3];
    for a in 0..3 {
        let xb = coords[a] + Vector3::new(u[3 * a], u[3 * a + 1], u[3 * a + 2]);
        let xt = coords[a + 3]
            + Vector3::new(u[3 * (a + 3)], u[3 * (a + 3) + 1], u[3 * (a + 3) + 2]);
        mid[a] = 0.5 * (xb + xt);
    }
    let e1 = mid[1] - mid[0];
    let e2 = mid[2] - mid[0];
    let nvec = e1.cross(&e2);
    let area2 = nvec.norm();
    if area2 < 1e-14 {
        return Err(Error::Mesh("degenerate cohesive element (zero area)".into()));
    }
    let n = nvec / area2;
    let t1 = e1.normalize();
    let t2 = n.cross(&t1);
    // rows: normal, then the two tangents -> local (dn, ds1, ds2)
    let rot = Matrix3::from_rows(&[n.transpose(), t1.transpose(), t2.transpose()]);
    let area = 0.5 * area2;

    let mut k = SMatrix::<f64, 18, 18>::zeros();
    let mut f = SMatrix::<f64, 18, 1>::zeros();
    let mut states_new = *states;
    let mut omega = [0.0; 3];

    for (g, &(l1, l2, l3)) in GP.iter().enumerate() {
        let nsh = [l1, l2, l3];
        let w = area / 3.0;
        // global jump at the point
        let mut jump_g = Vector3::zeros();
        for a in 0..3 {
            for c in 0..3 {
                jump_g[c] += nsh[a] * (u[3 * (a + 3) + c] - u[3 * a + c]);
            }
        }
        let jump_l = rot * jump_g;
        let (t_loc, s_new, d_loc) = traction(jump_l, &states[g], p);
        states_new[g] = s_new;
        omega[g] = damage(s_new.kappa, p);

        let d_glob = rot.transpose() * d_loc * rot;
        let t_glob = rot.transpose() * t_loc;

        // Phi^T scatter: row block a gets -N_a I (bottom), +N_a I (top)
        for a in 0..3 {
            for c in 0..3 {
                let fa = w * nsh[a] * t_glob[c];
                f[3 * a + c] -= fa;
                f[3 * (a + 3) + c] += fa;
            }
            for b in 0..3 {
                let s = w * nsh[a] * nsh[b];
                for ci in 0..3 {
                    for cj in 0..3 {
                        let kk = s * d_glob[(ci, cj)];
                        k[(3 * a + ci, 3 * b + cj)] += kk;
                        k[(3 * (a + 3) + ci, 3 * (b + 3) + cj)] += kk;
                        k[(3 * a + ci, 3 * (b + 3) + cj)] -= kk;
                        k[(3 * (a + 3) + ci, 3 * b + cj)] -= kk;
                    }
                }
            }
        }
    }

    Ok(CohesiveElement { k, f_int: f, states_new, omega })
}

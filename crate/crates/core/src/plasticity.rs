//! Elasto-plastic constitutive driver for the polymer matrix.
//!
//! Paraboloidal yield surface f = 6 J2 + 2 I1 (sc - st) - 2 sc st with
//! distinct tensile/compressive strengths, non-associative flow from the
//! potential g (same shape, pressure term weighted by
//! alpha = (1 - 2 nu_plas)/(1 + nu_plas)), and exponential hardening of both
//! strengths. Integration is a backward-Euler return map solved by a
//! monolithic Newton iteration with an analytic Jacobian; the consistent
//! tangent comes from linearising the converged local system.
//!
//! Both internal variables are driven by the equivalent plastic strain
//! increment dEpe = sqrt(dEp : dEp / (1 + 2 nu_plas^2)). Driving them jointly
//! (rather than splitting by pressure sign) keeps the uniaxial calibration
//! limits exact in both tension and compression and keeps the volumetric flow
//! direction non-contractant for every stress state, since sc(a) > st(a)
//! holds along the whole hardening path for physically ordered inputs.

use crate::tensor::invariants;
use crate::{Error, Result};
use nalgebra::{Matrix6, SMatrix, Vector6};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MatrixParams {
    /// Young's modulus (MPa).
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
    /// Plastic Poisson's ratio controlling volumetric flow.
    pub nu_plas: f64,
    /// Initial tensile yield strength (MPa).
    pub sigma_t0: f64,
    /// Initial compressive yield strength (MPa).
    pub sigma_c0: f64,
    /// Tensile hardening amplitude (MPa).
    pub ht: f64,
    /// Compressive hardening amplitude (MPa).
    pub hc: f64,
    /// Tensile hardening rate exponent.
    pub nt: f64,
    /// Compressive hardening rate exponent.
    pub nc: f64,
}

impl MatrixParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.e > 0.0
            && (0.0..0.5).contains(&self.nu)
            && (0.0..=0.5).contains(&self.nu_plas)
            && self.sigma_t0 > 0.0
            && self.sigma_c0 > 0.0
            && self.ht >= 0.0
            && self.hc >= 0.0
            && self.nt > 0.0
            && self.nc > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Params(format!("matrix parameters out of range: {self:?}")))
        }
    }

    pub fn lame(&self) -> (f64, f64) {
        let lam = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        let mu = self.e / (2.0 * (1.0 + self.nu));
        (lam, mu)
    }

    /// Standard isotropic stiffness (engineering-shear Voigt convention).
    pub fn elastic_stiffness(&self) -> Matrix6<f64> {
        isotropic_stiffness(self.e, self.nu)
    }

    /// Pressure weight in the flow potential.
    pub fn alpha_g(&self) -> f64 {
        (1.0 - 2.0 * self.nu_plas) / (1.0 + self.nu_plas)
    }
}

pub fn isotropic_stiffness(e: f64, nu: f64) -> Matrix6<f64> {
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lam;
        }
        c[(i, i)] = lam + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Per-integration-point history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticState {
    /// Plastic strain (engineering shears).
    pub eps_p: Vector6<f64>,
    /// Internal kinematic variable driving tensile hardening.
    pub alpha0: f64,
    /// Internal kinematic variable driving compressive hardening.
    pub alpha1: f64,
}

impl Default for PlasticState {
    fn default() -> Self {
        Self { eps_p: Vector6::zeros(), alpha0: 0.0, alpha1: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct MaterialResponse {
    pub sigma: Vector6<f64>,
    pub tangent: Matrix6<f64>,
    pub state_new: PlasticState,
    pub plastic: bool,
}

/// f = 6 J2 + 2 I1 (sc - st) - 2 sc st.
pub fn yield_value(sigma: &Vector6<f64>, sigma_t: f64, sigma_c: f64) -> f64 {
    let (i1, j2, _) = invariants(sigma);
    6.0 * j2 + 2.0 * i1 * (sigma_c - sigma_t) - 2.0 * sigma_c * sigma_t
}

/// g = 6 J2 + 2 alpha I1 (sc - st) - 2 sc st with alpha from nu_plas.
pub fn potential_value(sigma: &Vector6<f64>, sigma_t: f64, sigma_c: f64, nu_plas: f64) -> f64 {
    let alpha = (1.0 - 2.0 * nu_plas) / (1.0 + nu_plas);
    let (i1, j2, _) = invariants(sigma);
    6.0 * j2 + 2.0 * alpha * i1 * (sigma_c - sigma_t) - 2.0 * sigma_c * sigma_t
}

/// Current strengths for given internal variables.
pub fn hardened_strengths(alpha0: f64, alpha1: f64, p: &MatrixParams) -> (f64, f64) {
    (
        p.sigma_t0 + p.ht * (1.0 - (-p.nt * alpha0).exp()),
        p.sigma_c0 + p.hc * (1.0 - (-p.nc * alpha1).exp()),
    )
}

fn strength_rates(alpha0: f64, alpha1: f64, p: &MatrixParams) -> (f64, f64) {
    (
        p.ht * p.nt * (-p.nt * alpha0).exp(),
        p.hc * p.nc * (-p.nc * alpha1).exp(),
    )
}

/// Flow direction m = dg/dsigma in Voigt form; the shear entries are already
/// doubled so that dEp = dgamma * m directly yields engineering shears.
fn flow_dir(sigma: &Vector6<f64>, sigma_t: f64, sigma_c: f64, alpha_g: f64) -> Vector6<f64> {
    let (_, _, eta) = invariants(sigma);
    let press = 2.0 * alpha_g * (sigma_c - sigma_t);
    Vector6::new(
        6.0 * eta[0] + press,
        6.0 * eta[1] + press,
        6.0 * eta[2] + press,
        12.0 * sigma[3],
        12.0 * sigma[4],
        12.0 * sigma[5],
    )
}

/// d m / d sigma: constant (deviatoric projector on the normal block, 12 I on
/// the shear block).
fn flow_dir_dsigma() -> Matrix6<f64> {
    let mut a = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = -2.0;
        }
        a[(i, i)] = 4.0;
        a[(i + 3, i + 3)] = 12.0;
    }
    a
}

/// Tensor self-contraction of a Voigt plastic-strain increment
/// (normals + half the squared engineering shears).
fn contract(v: &Vector6<f64>) -> f64 {
    v[0] * v[0]
        + v[1] * v[1]
        + v[2] * v[2]
        + 0.5 * (v[3] * v[3] + v[4] * v[4] + v[5] * v[5])
}

/// Backward-Euler return map. `tol` is the relative local tolerance
/// (1e-8 is the conventional choice).
pub fn return_map(
    eps_total: &Vector6<f64>,
    state: &PlasticState,
    p: &MatrixParams,
    tol: f64,
) -> Result<MaterialResponse> {
    let c_el = p.elastic_stiffness();
    let sigma_tr = c_el * (eps_total - state.eps_p);
    let (st, sc) = hardened_strengths(state.alpha0, state.alpha1, p);
    if yield_value(&sigma_tr, st, sc) <= tol * p.sigma_t0 * p.sigma_t0 {
        return Ok(MaterialResponse {
            sigma: sigma_tr,
            tangent: c_el,
            state_new: *state,
            plastic: false,
        });
    }

    let ag = p.alpha_g();
    let cc = 1.0 + 2.0 * p.nu_plas * p.nu_plas;
    let a_mat = flow_dir_dsigma();
    let f_scale = 2.0 * p.sigma_t0 * p.sigma_c0;

    // Unknowns: sigma (6), dgamma, depe. Both alphas advance by depe.
    let mut sigma = sigma_tr;
    let mut dgam = 0.0;
    let mut depe = 0.0;

    let residual = |sigma: &Vector6<f64>, dgam: f64, depe: f64| -> (SMatrix<f64, 8, 1>, f64) {
        let a0 = state.alpha0 + depe;
        let a1 = state.alpha1 + depe;
        let (st, sc) = hardened_strengths(a0, a1, p);
        let m = flow_dir(sigma, st, sc, ag);
        let big_m = (contract(&m) / cc).sqrt();
        let r_sig = sigma - sigma_tr + c_el * m * dgam;
        let r_f = yield_value(sigma, st, sc);
        let r_e = depe - dgam * big_m;
        let mut r = SMatrix::<f64, 8, 1>::zeros();
        for i in 0..6 {
            r[i] = r_sig[i];
        }
        r[6] = r_f / p.sigma_t0.powi(2);
        r[7] = r_e;
        let scaled = (r_sig.norm() / p.sigma_t0).max(r_f.abs() / f_scale).max(r_e.abs());
        (r, scaled)
    };

    let (mut r, mut err) = residual(&sigma, dgam, depe);
    let mut iters = 0;
    while err > tol {
        iters += 1;
        if iters > 50 {
            return Err(Error::ReturnMap { residual: err });
        }
        let a0 = state.alpha0 + depe;
        let a1 = state.alpha1 + depe;
        let (st, sc) = hardened_strengths(a0, a1, p);
        let (dt, dc) = strength_rates(a0, a1, p);
        let m = flow_dir(&sigma, st, sc, ag);
        let big_m = (contract(&m) / cc).sqrt();
        let (i1, _, eta) = invariants(&sigma);

        // dm/depe: only the pressure term depends on the strengths.
        let kh = 2.0 * ag * (dc - dt);
        let dm_de = Vector6::new(kh, kh, kh, 0.0, 0.0, 0.0);
        // yield gradient (true df/dsigma in the same doubled-shear layout).
        let n = Vector6::new(
            6.0 * eta[0] + 2.0 * (sc - st),
            6.0 * eta[1] + 2.0 * (sc - st),
            6.0 * eta[2] + 2.0 * (sc - st),
            12.0 * sigma[3],
            12.0 * sigma[4],
            12.0 * sigma[5],
        );
        let df_de = 2.0 * i1 * (dc - dt) - 2.0 * (dc * st + sc * dt);
        // dM/dx = (P m)^T dm/dx / (M c)
        let pm = Vector6::new(m[0], m[1], m[2], 0.5 * m[3], 0.5 * m[4], 0.5 * m[5]);
        let dm_dsig_t_pm = a_mat.transpose() * pm; // A^T P m
        let dbigm_dsig = dm_dsig_t_pm / (big_m * cc);
        let dbigm_de = pm.dot(&dm_de) / (big_m * cc);

        let mut jac = SMatrix::<f64, 8, 8>::zeros();
        let c_a = c_el * a_mat;
        for i in 0..6 {
            for j in 0..6 {
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } + dgam * c_a[(i, j)];
            }
        }
        let c_m = c_el * m;
        let c_dm = c_el * dm_de;
        for i in 0..6 {
            jac[(i, 6)] = c_m[i];
            jac[(i, 7)] = dgam * c_dm[i];
            jac[(6, i)] = n[i] / p.sigma_t0.powi(2);
            jac[(7, i)] = -dgam * dbigm_dsig[i];
        }
        jac[(6, 6)] = 0.0;
        jac[(6, 7)] = df_de / p.sigma_t0.powi(2);
        jac[(7, 6)] = -big_m;
        jac[(7, 7)] = 1.0 - dgam * dbigm_de;

        let lu = jac.lu();
        let dx = lu
            .solve(&(-r))
            .ok_or(Error::ReturnMap { residual: err })?;

        // halving line search on the scaled residual
        let mut step = 1.0;
        loop {
            let s_try = sigma + step * dx.fixed_rows::<6>(0).into_owned();
            let g_try = dgam + step * dx[6];
            let e_try = depe + step * dx[7];
            let (r_try, err_try) = residual(&s_try, g_try, e_try);
            if err_try < err || step < 1e-6 {
                sigma = s_try;
                dgam = g_try;
                depe = e_try;
                r = r_try;
                err = err_try;
                break;
            }
            step *= 0.5;
        }
        let _ = r;
    }

    let a0 = state.alpha0 + depe;
    let a1 = state.alpha1 + depe;
    let (st, sc) = hardened_strengths(a0, a1, p);
    let m = flow_dir(&sigma, st, sc, ag);
    let state_new = PlasticState {
        eps_p: state.eps_p + m * dgam,
        alpha0: a0,
        alpha1: a1,
    };

    // Consistent tangent: at the converged point, J dx = [C_el deps; 0; 0],
    // and dsigma/deps is the top 6x6 block of the solution.
    let tangent = {
        let (dt, dc) = strength_rates(a0, a1, p);
        let big_m = (contract(&m) / cc).sqrt();
        let (i1, _, eta) = invariants(&sigma);
        let kh = 2.0 * ag * (dc - dt);
        let dm_de = Vector6::new(kh, kh, kh, 0.0, 0.0, 0.0);
        let n = Vector6::new(
            6.0 * eta[0] + 2.0 * (sc - st),
            6.0 * eta[1] + 2.0 * (sc - st),
            6.0 * eta[2] + 2.0 * (sc - st),
            12.0 * sigma[3],
            12.0 * sigma[4],
            12.0 * sigma[5],
        );
        let df_de = 2.0 * i1 * (dc - dt) - 2.0 * (dc * st + sc * dt);
        let pm = Vector6::new(m[0], m[1], m[2], 0.5 * m[3], 0.5 * m[4], 0.5 * m[5]);
        let dbigm_dsig = (a_mat.transpose() * pm) / (big_m * cc);
        let dbigm_de = pm.dot(&dm_de) / (big_m * cc);

        let mut jac = SMatrix::<f64, 8, 8>::zeros();
        let c_a = c_el * a_mat;
        for i in 0..6 {
            for j in 0..6 {
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } + dgam * c_a[(i, j)];
            }
        }
        let c_m = c_el * m;
        let c_dm = c_el * dm_de;
        for i in 0..6 {
            jac[(i, 6)] = c_m[i];
            jac[(i, 7)] = dgam * c_dm[i];
            jac[(6, i)] = n[i] / p.sigma_t0.powi(2);
            jac[(7, i)] = -dgam * dbigm_dsig[i];
        }
        jac[(6, 7)] = df_de / p.sigma_t0.powi(2);
        jac[(7, 6)] = -big_m;
        jac[(7, 7)] = 1.0 - dgam * dbigm_de;

        let mut rhs = SMatrix::<f64, 8, 6>::zeros();
        for i in 0..6 {
            for j in 0..6 {
                rhs[(i, j)] = c_el[(i, j)];
            }
        }
        let lu = jac.lu();
        let x = lu
            .solve(&rhs)
            .ok_or(Error::ReturnMap { residual: err })?;
        let mut t = Matrix6::zeros();
        for i in 0..6 {
            for j in 0..6 {
                t[(i, j)] = x[(i, j)];
            }
        }
        t
    };

    Ok(MaterialResponse { sigma, tangent, state_new, plastic: true })
}

/// Material-point driver with mixed control: the listed strain components are
/// prescribed, every other component relaxes until its stress vanishes
/// (uniaxial-stress and pure-shear-stress paths at a single point).
#[derive(Debug, Clone)]
pub struct PointDriver {
    pub params: MatrixParams,
    pub state: PlasticState,
    pub eps: Vector6<f64>,
}

impl PointDriver {
    pub fn new(params: MatrixParams) -> Self {
        Self { params, state: PlasticState::default(), eps: Vector6::zeros() }
    }

    /// Advances to the prescribed `(component, value)` targets and returns
    /// `(sigma, state)` at the new equilibrium. Uses the consistent tangent
    /// for the outer Newton iteration on the free components.
    pub fn step(&mut self, prescribed: &[(usize, f64)]) -> Result<(Vector6<f64>, PlasticState)> {
        let mut eps = self.eps;
        for &(k, v) in prescribed {
            eps[k] = v;
        }
        let free: Vec<usize> =
            (0..6).filter(|i| !prescribed.iter().any(|&(k, _)| k == *i)).collect();
        let tol = 1e-10 * self.params.e;
        let mut resp = return_map(&eps, &self.state, &self.params, 1e-12)?;
        for _ in 0..60 {
            let mut worst = 0.0_f64;
            for &i in &free {
                worst = worst.max(resp.sigma[i].abs());
            }
            if worst <= tol {
                self.eps = eps;
                self.state = resp.state_new;
                return Ok((resp.sigma, resp.state_new));
            }
            let n = free.len();
            let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
            let mut b = nalgebra::DVector::<f64>::zeros(n);
            for (r, &i) in free.iter().enumerate() {
                b[r] = -resp.sigma[i];
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = resp.tangent[(i, j)];
                }
            }
            let d = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Solve("singular point-driver system".into()))?;
            for (r, &i) in free.iter().enumerate() {
                eps[i] += d[r];
            }
            resp = return_map(&eps, &self.state, &self.params, 1e-12)?;
        }
        Err(Error::Solve("point driver failed to reach stress targets".into()))
    }
}

/// Central finite-difference check of the consistent tangent at a probe
/// strain. Returns the max entry error relative to the largest FD entry.
pub fn consistent_tangent_check(
    eps_total: &Vector6<f64>,
    state: &PlasticState,
    p: &MatrixParams,
) -> Result<f64> {
    let tol = 1e-12;
    let resp = return_map(eps_total, state, p, tol)?;
    let h = 1e-7;
    let mut fd = Matrix6::zeros();
    for j in 0..6 {
        let mut ep = *eps_total;
        let mut em = *eps_total;
        ep[j] += h;
        em[j] -= h;
        let sp = return_map(&ep, state, p, tol)?.sigma;
        let sm = return_map(&em, state, p, tol)?.sigma;
        for i in 0..6 {
            fd[(i, j)] = (sp[i] - sm[i]) / (2.0 * h);
        }
    }
    let scale = fd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..6 {
        for j in 0..6 {
            worst = worst.max((resp.tangent[(i, j)] - fd[(i, j)]).abs() / scale);
        }
    }
    Ok(worst)
}

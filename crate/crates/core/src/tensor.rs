//! Voigt-6 conventions, stress invariants, and stiffness rotation.
//!
//! Component ordering is `[11, 22, 33, 12, 23, 31]` everywhere. Strain vectors
//! store engineering shears (2e12, 2e23, 2e31); stress vectors store true shear
//! components. Stiffness matrices map engineering-shear strain vectors to
//! stress vectors.

use crate::{Error, Result};
use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};

/// Index pairs (i, j) for each Voigt slot, in the fixed ordering.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)];

/// Voigt slot for a symmetric index pair.
pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) | (1, 0) => 3,
        (1, 2) | (2, 1) => 4,
        (2, 0) | (0, 2) => 5,
        _ => unreachable!("tensor indices out of range"),
    }
}

/// First invariant, second deviatoric invariant and deviator of a stress.
///
/// J2 = 1/2 eta:eta with the full tensor contraction, so off-diagonal terms
/// count twice.
pub fn invariants(sigma: &Vector6<f64>) -> (f64, f64, Vector6<f64>) {
    let i1 = sigma[0] + sigma[1] + sigma[2];
    let m = i1 / 3.0;
    let eta = Vector6::new(
        sigma[0] - m,
        sigma[1] - m,
        sigma[2] - m,
        sigma[3],
        sigma[4],
        sigma[5],
    );
    let j2 = 0.5 * (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2])
        + eta[3] * eta[3]
        + eta[4] * eta[4]
        + eta[5] * eta[5];
    (i1, j2, eta)
}

/// The 3x6 coordinate matrix X(y) with u = X(y) eps_bar for a homogeneous
/// macro-strain. Shear columns follow the [12, 23, 31] ordering: column 4
/// couples (y2 -> u1, y1 -> u2)/2, column 5 couples (y3 -> u2, y2 -> u3)/2,
/// column 6 couples (y3 -> u1, y1 -> u3)/2.
pub fn x_matrix(y: &Vector3<f64>) -> SMatrix<f64, 3, 6> {
    let (y1, y2, y3) = (y[0], y[1], y[2]);
    SMatrix::<f64, 3, 6>::from_rows(&[
        [y1, 0.0, 0.0, y2 / 2.0, 0.0, y3 / 2.0].into(),
        [0.0, y2, 0.0, y1 / 2.0, y3 / 2.0, 0.0].into(),
        [0.0, 0.0, y3, 0.0, y2 / 2.0, y1 / 2.0].into(),
    ])
}

/// Displacement of point `y` under homogeneous macro-strain `eps_bar`.
pub fn macro_displacement(eps_bar: &Vector6<f64>, y: &Vector3<f64>) -> Vector3<f64> {
    x_matrix(y) * eps_bar
}

/// Right-handed orthonormal frame; `e3` is the material axis by convention.
#[derive(Debug, Clone, Copy)]
pub struct Basis3 {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
}

impl Basis3 {
    pub fn new(e1: Vector3<f64>, e2: Vector3<f64>, e3: Vector3<f64>) -> Result<Self> {
        let tol = 1e-12;
        let ortho = (e1.norm() - 1.0).abs() < tol
            && (e2.norm() - 1.0).abs() < tol
            && (e3.norm() - 1.0).abs() < tol
            && e1.dot(&e2).abs() < tol
            && e2.dot(&e3).abs() < tol
            && e3.dot(&e1).abs() < tol;
        if !ortho || e1.cross(&e2).dot(&e3) <= 0.0 {
            return Err(Error::Basis);
        }
        Ok(Self { e1, e2, e3 })
    }

    /// Deterministic completion of a frame around a given axis (`e3 = axis`):
    /// the global axis least aligned with `axis` is orthogonalised to give
    /// `e1`, and `e2 = e3 x e1`. Any transverse pair is equivalent for a
    /// transversely isotropic material; a fixed rule keeps results reproducible.
    pub fn from_axis(axis: &Vector3<f64>) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-12 {
            return Err(Error::Basis);
        }
        let e3 = axis / n;
        let mut least = 0;
        for k in 1..3 {
            if e3[k].abs() < e3[least].abs() {
                least = k;
            }
        }
        let mut g = Vector3::zeros();
        g[least] = 1.0;
        let e1 = (g - e3 * e3.dot(&g)).normalize();
        let e2 = e3.cross(&e1);
        Basis3::new(e1, e2, e3)
    }

    /// Rotation matrix with the basis vectors as columns: maps local
    /// components to global ones.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.e1, self.e2, self.e3])
    }
}

/// Rotates a 6x6 stiffness from the local frame of `basis` to global axes via
/// the full fourth-order tensor transform. Slower than a Bond 6x6 matrix but
/// immune to shear-convention mistakes.
pub fn rotate_stiffness(c_local: &Matrix6<f64>, basis: &Basis3) -> Matrix6<f64> {
    let r = basis.rotation();
    // C_ijkl == C6[a(ij), b(kl)] under the engineering-shear convention.
    let mut out = Matrix6::zeros();
    for a in 0..6 {
        let (p, q) = VOIGT_PAIRS[a];
        for b in 0..6 {
            let (s, t) = VOIGT_PAIRS[b];
            let mut sum = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let ra = r[(p, i)] * r[(q, j)];
                    if ra == 0.0 {
                        continue;
                    }
                    for k in 0..3 {
                        for l in 0..3 {
                            sum += ra
                                * r[(s, k)]
                                * r[(t, l)]
                                * c_local[(voigt_index(i, j), voigt_index(k, l))];
                        }
                    }
                }
            }
            out[(a, b)] = sum;
        }
    }
    out
}

/// Rotates a Voigt-6 value by `r` (tensor transform `r s r^T`). `kind_strain`
/// selects the engineering-shear convention for strains.
pub fn rotate_voigt(v: &Vector6<f64>, r: &Matrix3<f64>, kind_strain: bool) -> Vector6<f64> {
    let shear = if kind_strain { 0.5 } else { 1.0 };
    let t = Matrix3::new(
        v[0],
        shear * v[3],
        shear * v[5],
        shear * v[3],
        v[1],
        shear * v[4],
        shear * v[5],
        shear * v[4],
        v[2],
    );
    let t = r * t * r.transpose();
    let back = if kind_strain { 2.0 } else { 1.0 };
    Vector6::new(
        t[(0, 0)],
        t[(1, 1)],
        t[(2, 2)],
        back * t[(0, 1)],
        back * t[(1, 2)],
        back * t[(2, 0)],
    )
}

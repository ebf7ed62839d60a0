//! Thin wrapper over the sparse direct solver: triplet assembly plus an LU
//! factorisation that can be reused for several right-hand sides (the
//! homogenised-tangent extraction solves six with one factorisation).
//!
//! The saddle-point matrices here are symmetric indefinite in structure but
//! the consistent material tangents make them mildly unsymmetric in value, so
//! a general sparse LU is used rather than an LDL^T.

use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

/// Accumulates duplicate-summed triplets for a square sparse matrix.
pub struct TripletMatrix {
    pub n: usize,
    trips: Vec<Triplet<usize, usize, f64>>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, trips: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.trips.push(Triplet::new(i, j, v));
        }
    }

    pub fn build(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.trips)
            .map_err(|e| Error::Solve(format!("sparse assembly failed: {e:?}")))
    }
}

/// Sparse LU factorisation of a square matrix.
pub struct LuSolver {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuSolver {
    pub fn factor(mat: &SparseColMat<usize, f64>) -> Result<Self> {
        let n = mat.nrows();
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::Solve(format!("symbolic LU failed: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::Solve(format!("numeric LU failed (singular?): {e:?}")))?;
        Ok(Self { lu, n })
    }

    /// Solves for one right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = faer::Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides (columns).
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = rhs.len();
        let b = faer::Mat::from_fn(self.n, k, |i, j| rhs[j][i]);
        let x = self.lu.solve(&b);
        (0..k).map(|j| (0..self.n).map(|i| x[(i, j)]).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_indefinite_system() {
        // [2 1; 1 0] saddle: x = (1, 1) for b = (3, 1)
        let mut t = TripletMatrix::new(2);
        t.add(0, 0, 2.0);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        let m = t.build().unwrap();
        let lu = LuSolver::factor(&m).unwrap();
        let x = lu.solve(&[3.0, 1.0]);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_triplets_accumulate() {
        let mut t = TripletMatrix::new(1);
        t.add(0, 0, 1.5);
        t.add(0, 0, 2.5);
        let m = t.build().unwrap();
        let lu = LuSolver::factor(&m).unwrap();
        let x = lu.solve(&[8.0]);
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multi_rhs_matches_single() {
        let mut t = TripletMatrix::new(3);
        for i in 0..3 {
            t.add(i, i, (i + 1) as f64);
        }
        t.add(0, 2, 0.5);
        let m = t.build().unwrap();
        let lu = LuSolver::factor(&m).unwrap();
        let many = lu.solve_many(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]);
        let one = lu.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            assert!((many[0][i] - one[i]).abs() < 1e-14);
        }
        assert!((many[1][1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        let mut t = TripletMatrix::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 1, 1.0);
        // row 1 empty -> structurally singular
        let m = t.build().unwrap();
        assert!(LuSolver::factor(&m).is_err());
    }
}

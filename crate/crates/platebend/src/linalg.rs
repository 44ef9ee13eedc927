//! Sparse direct solves for symmetric systems, backed by faer.
//!
//! Matrices are given in block-CSR form; since every system assembled here is
//! symmetric, the scalar CSR arrays are handed to faer as the CSC arrays of the
//! same matrix. Cholesky is tried first, LU is the fallback for indefinite
//! systems. The symbolic analysis is kept while the sparsity pattern is unchanged.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::BlockMatrix;

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Reusable factorization of a symmetric block-sparse matrix.
#[derive(Default)]
pub struct SymmetricSolver {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic_llt: Option<SymbolicLlt<usize>>,
    symbolic_lu: Option<SymbolicLu<usize>>,
    factor: Option<Factor>,
    dim: usize,
}

impl SymmetricSolver {
    pub fn new() -> SymmetricSolver {
        SymmetricSolver::default()
    }

    pub fn factor(&mut self, a: &BlockMatrix) -> Result<()> {
        let (ptr, idx, val) = a.to_csr();
        let n = a.dim();
        let unchanged = self.pattern.as_ref().is_some_and(|(p, i)| *p == ptr && *i == idx);
        if !unchanged {
            self.symbolic_llt = None;
            self.symbolic_lu = None;
            self.pattern = Some((ptr.clone(), idx.clone()));
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, ptr, None, idx);
        let mat = SparseColMat::new(symbolic, val);
        if !val_finite(&mat) {
            return Err(Error::Solver("matrix has non-finite entries".into()));
        }
        self.dim = n;
        if self.symbolic_llt.is_none() {
            self.symbolic_llt = Some(
                SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                    .map_err(|e| Error::Solver(format!("symbolic cholesky: {e:?}")))?,
            );
        }
        let sym = self.symbolic_llt.clone().unwrap();
        match Llt::try_new_with_symbolic(sym, mat.as_ref(), Side::Lower) {
            Ok(llt) => {
                self.factor = Some(Factor::Llt(llt));
                Ok(())
            }
            Err(_) => {
                if self.symbolic_lu.is_none() {
                    self.symbolic_lu =
                        Some(SymbolicLu::try_new(mat.symbolic()).map_err(|e| Error::Solver(format!("symbolic lu: {e:?}")))?);
                }
                let sym = self.symbolic_lu.clone().unwrap();
                let lu = Lu::try_new_with_symbolic(sym, mat.as_ref()).map_err(|e| Error::Solver(format!("lu: {e:?}")))?;
                self.factor = Some(Factor::Lu(lu));
                Ok(())
            }
        }
    }

    /// Whether the last factorization fell back to LU.
    pub fn is_indefinite(&self) -> bool {
        matches!(self.factor, Some(Factor::Lu(_)))
    }

    /// Solves for several right-hand sides at once.
    pub fn solve(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let factor = self.factor.as_ref().ok_or_else(|| Error::Solver("solve before factor".into()))?;
        let n = self.dim;
        let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
        let x = match factor {
            Factor::Llt(f) => f.solve(&b),
            Factor::Lu(f) => f.solve(&b),
        };
        let out: Vec<Vec<f64>> = (0..rhs.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Solver("solution has non-finite entries".into()));
        }
        Ok(out)
    }
}

fn val_finite(m: &SparseColMat<usize, f64>) -> bool {
    m.val().iter().all(|v| v.is_finite())
}

/// One-shot solve of a symmetric system.
pub fn solve_linear(a: &BlockMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut s = SymmetricSolver::new();
    s.factor(a)?;
    Ok(s.solve(&[b.to_vec()])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::BlockAssembler;

    fn laplacian(n: usize, shift: f64) -> BlockMatrix {
        let mut asm = BlockAssembler::new(n, 1);
        for i in 0..n {
            asm.block_mut(i, i)[0] = 2.0 + shift;
            if i > 0 {
                asm.block_mut(i, i - 1)[0] = -1.0;
            }
            if i + 1 < n {
                asm.block_mut(i, i + 1)[0] = -1.0;
            }
        }
        asm.finish()
    }

    #[test]
    fn spd_and_indefinite() {
        for shift in [0.1, -1.0] {
            let a = laplacian(30, shift);
            let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
            let mut s = SymmetricSolver::new();
            s.factor(&a).unwrap();
            assert_eq!(s.is_indefinite(), shift < 0.0);
            let x = s.solve(&[b.clone()]).unwrap().remove(0);
            let r = a.mul_vec(&x);
            let err = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "residual {err}");
        }
    }

    #[test]
    fn refactor_reuses_pattern() {
        let mut s = SymmetricSolver::new();
        s.factor(&laplacian(10, 1.0)).unwrap();
        s.factor(&laplacian(10, 2.0)).unwrap();
        let x = s.solve(&[vec![4.0; 10]]).unwrap().remove(0);
        let r = laplacian(10, 2.0).mul_vec(&x);
        assert!(r.iter().all(|v| (v - 4.0).abs() < 1e-12));
    }
}

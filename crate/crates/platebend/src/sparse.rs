//! Block-sparse matrices with dense square blocks, one block row per cell.

use std::collections::BTreeMap;

/// Accumulates dense blocks at `(block row, block column)`.
#[derive(Clone, Debug)]
pub struct BlockAssembler {
    bs: usize,
    rows: Vec<BTreeMap<usize, Vec<f64>>>,
}

impl BlockAssembler {
    pub fn new(n_blocks: usize, bs: usize) -> BlockAssembler {
        BlockAssembler { bs, rows: vec![BTreeMap::new(); n_blocks] }
    }

    /// Mutable access to block `(i, j)`, row-major.
    pub fn block_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let bs = self.bs;
        self.rows[i].entry(j).or_insert_with(|| vec![0.0; bs * bs])
    }

    /// Adds `scale * a^T b` for two row-major `n x (bs * len)` stencil matrices
    /// whose column blocks belong to cells `ca` and `cb`.
    pub fn add_outer(&mut self, ca: &[usize], a: &[f64], cb: &[usize], b: &[f64], n_rows: usize, scale: f64) {
        let bs = self.bs;
        let wa = bs * ca.len();
        let wb = bs * cb.len();
        for (pa, &i) in ca.iter().enumerate() {
            for (pb, &j) in cb.iter().enumerate() {
                let blk = self.block_mut(i, j);
                for r in 0..n_rows {
                    let ra = &a[r * wa + pa * bs..r * wa + (pa + 1) * bs];
                    let rb = &b[r * wb + pb * bs..r * wb + (pb + 1) * bs];
                    for (x, &av) in ra.iter().enumerate() {
                        if av == 0.0 {
                            continue;
                        }
                        let s = scale * av;
                        let row = &mut blk[x * bs..(x + 1) * bs];
                        for (y, &bv) in rb.iter().enumerate() {
                            row[y] += s * bv;
                        }
                    }
                }
            }
        }
    }

    pub fn finish(self) -> BlockMatrix {
        let bs = self.bs;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in self.rows {
            for (j, blk) in row {
                cols.push(j);
                vals.extend(blk);
            }
            row_ptr.push(cols.len());
        }
        BlockMatrix { bs, row_ptr, cols, vals }
    }
}

/// Square block-sparse matrix in block-CSR layout with row-major blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub bs: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl BlockMatrix {
    pub fn n_block_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.bs * self.n_block_rows()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let s = self.bs * self.bs;
        &self.vals[k * s..(k + 1) * s]
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].binary_search(&j).ok().map(|p| range.start + p)
    }

    pub fn same_pattern(&self, other: &BlockMatrix) -> bool {
        self.bs == other.bs && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let bs = self.bs;
        let mut y = vec![0.0; self.dim()];
        for i in 0..self.n_block_rows() {
            let yi = &mut y[i * bs..(i + 1) * bs];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let xj = &x[j * bs..(j + 1) * bs];
                let blk = self.block(k);
                for r in 0..bs {
                    let row = &blk[r * bs..(r + 1) * bs];
                    yi[r] += row.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        y
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `a * self + b * other`, on the union of both patterns.
    pub fn combine(&self, a: f64, other: &BlockMatrix, b: f64) -> BlockMatrix {
        assert_eq!(self.bs, other.bs);
        assert_eq!(self.n_block_rows(), other.n_block_rows());
        if self.same_pattern(other) {
            let vals = self.vals.iter().zip(&other.vals).map(|(x, y)| a * x + b * y).collect();
            return BlockMatrix { vals, ..self.clone() };
        }
        let mut asm = BlockAssembler::new(self.n_block_rows(), self.bs);
        for (m, s) in [(self, a), (other, b)] {
            for i in 0..m.n_block_rows() {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    let blk = asm.block_mut(i, m.cols[k]);
                    for (d, v) in blk.iter_mut().zip(m.block(k)) {
                        *d += s * v;
                    }
                }
            }
        }
        asm.finish()
    }

    /// Adds `s * other` in place; `other`'s pattern must be contained in `self`'s.
    pub fn add_assign_scaled(&mut self, s: f64, other: &BlockMatrix) {
        let bb = self.bs * self.bs;
        for i in 0..other.n_block_rows() {
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                let t = self.find(i, other.cols[k]).expect("pattern not contained");
                for (d, v) in self.vals[t * bb..(t + 1) * bb].iter_mut().zip(other.block(k)) {
                    *d += s * v;
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> BlockMatrix {
        BlockMatrix { vals: self.vals.iter().map(|v| s * v).collect(), ..self.clone() }
    }

    /// Scalar compressed rows: `(row_ptr, col_idx, values)` with sorted columns.
    pub fn to_csr(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let bs = self.bs;
        let mut ptr = Vec::with_capacity(self.dim() + 1);
        let mut idx = Vec::with_capacity(self.nnz());
        let mut val = Vec::with_capacity(self.nnz());
        ptr.push(0);
        for i in 0..self.n_block_rows() {
            for r in 0..bs {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[k];
                    let blk = self.block(k);
                    for c in 0..bs {
                        idx.push(j * bs + c);
                        val.push(blk[r * bs + c]);
                    }
                }
                ptr.push(idx.len());
            }
        }
        (ptr, idx, val)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let bs = self.bs;
        let mut d = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.n_block_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let blk = self.block(k);
                for r in 0..bs {
                    for c in 0..bs {
                        d[(i * bs + r, j * bs + c)] += blk[r * bs + c];
                    }
                }
            }
        }
        d
    }

    /// Largest entry of `A - A^T` relative to the largest entry of `A`.
    pub fn asymmetry(&self) -> f64 {
        let bs = self.bs;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n_block_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let blk = self.block(k);
                let t = self.find(j, i);
                for r in 0..bs {
                    for c in 0..bs {
                        let v = blk[r * bs + c];
                        let w = t.map_or(0.0, |t| self.block(t)[c * bs + r]);
                        worst = worst.max((v - w).abs());
                        scale = scale.max(v.abs());
                    }
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockMatrix {
        let mut asm = BlockAssembler::new(3, 2);
        asm.block_mut(0, 0).copy_from_slice(&[4.0, 1.0, 1.0, 3.0]);
        asm.block_mut(1, 1).copy_from_slice(&[5.0, 0.0, 0.0, 5.0]);
        asm.block_mut(2, 2).copy_from_slice(&[2.0, 0.5, 0.5, 2.0]);
        asm.block_mut(0, 2).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        asm.block_mut(2, 0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        asm.finish()
    }

    #[test]
    fn matches_dense() {
        let a = sample();
        let d = a.to_dense();
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let y = a.mul_vec(&x);
        let yd = &d * nalgebra::DVector::from_vec(x.clone());
        for i in 0..6 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
        assert_eq!(a.asymmetry(), 0.0);
        let (ptr, idx, val) = a.to_csr();
        assert_eq!(ptr.len(), 7);
        for r in 0..6 {
            for k in ptr[r]..ptr[r + 1] {
                assert_eq!(val[k], d[(r, idx[k])]);
            }
        }
    }

    #[test]
    fn combine_unions_patterns() {
        let a = sample();
        let mut asm = BlockAssembler::new(3, 2);
        asm.block_mut(1, 0)[0] = 7.0;
        let b = asm.finish();
        let c = a.combine(2.0, &b, -1.0);
        let dense = a.to_dense() * 2.0 - b.to_dense();
        assert_eq!(c.to_dense(), dense);
    }

    #[test]
    fn add_outer_matches_dense_product() {
        let mut asm = BlockAssembler::new(2, 1);
        // two rows, stencil cells [1, 0]
        let a = [1.0, 2.0, 3.0, 4.0];
        asm.add_outer(&[1, 0], &a, &[1, 0], &a, 2, 0.5);
        let m = asm.finish().to_dense();
        // a as 2x2 matrix over columns (cell 1, cell 0)
        let am = nalgebra::Matrix2::new(1.0, 2.0, 3.0, 4.0);
        let ata = am.transpose() * am * 0.5;
        assert_eq!(m[(1, 1)], ata[(0, 0)]);
        assert_eq!(m[(1, 0)], ata[(0, 1)]);
        assert_eq!(m[(0, 0)], ata[(1, 1)]);
    }
}

//! CSR sparse matrices with one multiplier per stored arc, used for
//! normalized-adjacency products in the encoder.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::matrix::DenseMatrix;

#[derive(Debug, Clone)]
pub struct SparseMatrix<S> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<S>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::Contract("row offsets length must be rows+1".into()));
        }
        if row_offsets.first() != Some(&0) || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::Contract("row offsets must span the arc arrays".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Contract("row offsets must be monotone".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::Contract("one value per stored arc required".into()));
        }
        if col_indices.iter().any(|&c| c >= cols) {
            return Err(Error::Contract("column index out of bounds".into()));
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_arcs(&self, r: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c, v))
    }

    /// y = A x, row by row with a fixed reduction order. Rows fan out
    /// in parallel on large inputs; each output row has one writer, so
    /// results are bit-identical at any thread count.
    pub fn mul_dense(&self, x: &DenseMatrix<S>) -> DenseMatrix<S> {
        debug_assert_eq!(self.cols, x.rows());
        let cols = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, cols);
        let row_task = |r: usize, orow: &mut [S]| {
            for (c, v) in self.row_arcs(r) {
                let xrow = x.row(c);
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o += v * xv;
                }
            }
        };
        if self.rows >= crate::tensor::matrix::PAR_ROW_THRESHOLD {
            use rayon::prelude::*;
            out.data_mut()
                .par_chunks_mut(cols.max(1))
                .enumerate()
                .for_each(|(r, orow)| row_task(r, orow));
        } else {
            for r in 0..self.rows {
                row_task(r, out.row_mut(r));
            }
        }
        out
    }

    /// y = A^T g, the adjoint used by spmm backward.
    pub fn transpose_mul_dense(&self, g: &DenseMatrix<S>) -> DenseMatrix<S> {
        debug_assert_eq!(self.rows, g.rows());
        let cols = g.cols();
        let mut out = DenseMatrix::zeros(self.cols, cols);
        for r in 0..self.rows {
            let grow = g.row(r);
            for (c, v) in self.row_arcs(r) {
                let orow = out.row_mut(c);
                for (o, &gv) in orow.iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
        out
    }

    /// Densify, for oracle comparisons in tests.
    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_arcs(r) {
                out.set(r, c, out.get(r, c) + v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::matrix::matmul;

    fn sample() -> SparseMatrix<f64> {
        // [[2, 0, 1], [0, 0, 0], [0, 3, 0]]
        SparseMatrix::new(3, 3, vec![0, 2, 2, 3], vec![0, 2, 1], vec![2.0, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn spmm_matches_dense_product() {
        let a = sample();
        let x = DenseMatrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.mul_dense(&x), matmul(&a.to_dense(), &x));
    }

    #[test]
    fn transpose_product_matches_dense_transpose() {
        let a = sample();
        let g = DenseMatrix::from_vec(3, 2, vec![1.0, -1.0, 0.5, 2.0, 3.0, 0.0]).unwrap();
        assert_eq!(a.transpose_mul_dense(&g), matmul(&a.to_dense().transpose(), &g));
    }

    #[test]
    fn rejects_out_of_bounds_column() {
        assert!(SparseMatrix::new(2, 2, vec![0, 1, 1], vec![2], vec![1.0f64]).is_err());
    }

    #[test]
    fn rejects_non_monotone_offsets() {
        assert!(SparseMatrix::new(2, 2, vec![0, 1, 0], vec![0], vec![1.0f64]).is_err());
    }
}

use crate::matrix::Matrix;

/// Compressed sparse row matrix assembled from coordinate triplets.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicate coordinates are summed; explicit zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut out = SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`, in increasing column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Dense copy with the listed row/column index removed from both axes.
    pub fn to_dense_without(&self, skip: usize) -> Matrix {
        let shift = |i: usize| if i > skip { i - 1 } else { i };
        let mut m = Matrix::zeros(self.rows - 1, self.cols - 1);
        for r in (0..self.rows).filter(|&r| r != skip) {
            for (c, v) in self.row(r).filter(|&(c, _)| c != skip) {
                m[(shift(r), shift(c))] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let s = SparseMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, 0.0), (1, 0, 1.0), (1, 0, -1.0)],
        );
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(1, 2), 1.5);
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(1, 0), 0.0);
        assert_eq!(s.row_sums(), vec![2.0, 1.5]);
    }

    #[test]
    fn dense_without_removes_index() {
        let s = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 2, 5.0), (2, 1, 7.0), (2, 0, 3.0)]);
        let d = s.to_dense_without(0);
        assert_eq!(d, nalgebra::dmatrix![0.0, 5.0; 7.0, 0.0]);
    }
}

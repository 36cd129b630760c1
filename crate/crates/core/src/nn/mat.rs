//! A dense row-major matrix just big enough for small MLPs.

use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                context: "from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(NnError::ShapeMismatch { context: "from_rows", expected: (r, c), got: (r, 0) });
        }
        Ok(Mat { rows: r, cols: c, data: rows.concat() })
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Mat { rows: 1, cols: data.len(), data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn check(&self, other: &Mat, rows: usize, cols: usize, context: &'static str) -> Result<(), NnError> {
        if other.rows != rows || other.cols != cols {
            return Err(NnError::ShapeMismatch {
                context,
                expected: (rows, cols),
                got: (other.rows, other.cols),
            });
        }
        let _ = self;
        Ok(())
    }

    /// `self @ other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat, NnError> {
        self.check(other, self.cols, other.cols, "matmul")?;
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let lhs = &other.data[k * other.cols..(k + 1) * other.cols];
                let row = out.row_mut(i);
                for (o, &b) in row.iter_mut().zip(lhs) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T @ other` (used for weight gradients: `x^T @ dz`).
    pub fn matmul_tn(&self, other: &Mat) -> Result<Mat, NnError> {
        self.check(other, self.rows, other.cols, "matmul_tn")?;
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.at(k, i);
                if a == 0.0 {
                    continue;
                }
                let lhs = other.row(k);
                let row = out.row_mut(i);
                for (o, &b) in row.iter_mut().zip(lhs) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self @ other^T` (used for input gradients: `dz @ w^T`).
    pub fn matmul_nt(&self, other: &Mat) -> Result<Mat, NnError> {
        self.check(other, other.rows, self.cols, "matmul_nt")?;
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut acc = 0.0;
                for (a, b) in self.row(i).iter().zip(other.row(j)) {
                    acc += a * b;
                }
                *out.at_mut(i, j) = acc;
            }
        }
        Ok(out)
    }

    /// Adds a `[1, cols]` row to every row of `self`.
    pub fn add_row_broadcast(&mut self, row: &Mat) -> Result<(), NnError> {
        self.check(row, 1, self.cols, "add_row_broadcast")?;
        for r in 0..self.rows {
            for (v, &b) in self.row_mut(r).iter_mut().zip(row.row(0)) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `[1, cols]` matrix (bias gradients).
    pub fn col_sums(&self) -> Mat {
        let mut out = Mat::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, &v) in out.row_mut(0).iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat, NnError> {
        self.check(other, self.rows, self.cols, "zip_map")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_agrees_with_hand_product() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn transposed_products_agree_with_plain_matmul() {
        let a = Mat::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, 1.0]]).unwrap();
        let b = Mat::from_rows(&[vec![2.0, 1.0], vec![-1.0, 0.5], vec![4.0, -3.0]]).unwrap();
        // a^T @ (a @ b) two ways.
        let ab = a.matmul(&b).unwrap();
        let tn = a.matmul_tn(&ab).unwrap();
        let mut at = Mat::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                *at.at_mut(j, i) = a.at(i, j);
            }
        }
        assert_eq!(tn, at.matmul(&ab).unwrap());
        // (a @ b) @ b^T two ways.
        let nt = ab.matmul_nt(&b).unwrap();
        let mut bt = Mat::zeros(2, 3);
        for i in 0..3 {
            for j in 0..2 {
                *bt.at_mut(j, i) = b.at(i, j);
            }
        }
        assert_eq!(nt, ab.matmul(&bt).unwrap());
    }

    #[test]
    fn shape_errors_are_reported() {
        let a = Mat::zeros(2, 3);
        let b = Mat::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(NnError::ShapeMismatch { .. })));
        assert!(Mat::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn broadcast_and_col_sums() {
        let mut a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        a.add_row_broadcast(&Mat::row_vector(vec![10.0, 20.0])).unwrap();
        assert_eq!(a.row(1), &[13.0, 24.0]);
        assert_eq!(a.col_sums().row(0), &[24.0, 46.0]);
    }
}

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

/// Explicit `m x n` matrix acting on the flattened input.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn mul_t_vec(&self, r: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (row, &ri) in self.data.chunks_exact(self.cols).zip(r) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + a * ri;
            }
        }
        out
    }

    /// `A A^T + eta I` as a row-major `m x m` matrix.
    pub fn gram(&self, eta: T) -> Vec<T> {
        let m = self.rows;
        let mut g = vec![T::zero(); m * m];
        for i in 0..m {
            let ri = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..=i {
                let rj = &self.data[j * self.cols..(j + 1) * self.cols];
                let v: T = ri.iter().zip(rj).map(|(&a, &b)| a * b).sum();
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
            g[i * m + i] = g[i * m + i] + eta;
        }
        g
    }
}

/// Solves `G u = b` for symmetric positive definite `G` (row-major, `n x n`)
/// by Cholesky factorization.
pub fn cholesky_solve<T: Real>(g: &[T], n: usize, b: &[T]) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                // relative pivot floor
                if s <= T::lit(1e-14) * g[i * n + i].abs().max(T::min_positive_value()) {
                    return Err(Error::Singular { count: 1 });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut u = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * u[k];
        }
        u[i] = s / l[i * n + i];
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct Dense<T> {
    matrix: DenseMatrix<T>,
    input: Shape,
    output: Shape,
}

impl<T: Real> Dense<T> {
    pub fn new(matrix: DenseMatrix<T>, input: Shape) -> Result<Self> {
        if input.len() != matrix.cols() {
            return Err(Error::InvalidShape(format!(
                "matrix has {} columns but input {input} has {} entries",
                matrix.cols(),
                input.len()
            )));
        }
        if matrix.rows() > matrix.cols() {
            return Err(Error::validation(format!(
                "operator must not have more rows ({}) than columns ({})",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let output = Shape::vector(matrix.rows())?;
        Ok(Self {
            matrix,
            input,
            output,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub(crate) fn apply(&self, x: &ImageTensor<T>) -> ImageTensor<T> {
        ImageTensor::from_raw(self.output, self.matrix.mul_vec(x.data()))
    }

    pub(crate) fn adjoint(&self, r: &ImageTensor<T>) -> ImageTensor<T> {
        ImageTensor::from_raw(self.input, self.matrix.mul_t_vec(r.data()))
    }

    pub(crate) fn solve_gram(&self, z: &ImageTensor<T>, eta: T) -> Result<ImageTensor<T>> {
        let m = self.matrix.rows();
        let u = cholesky_solve(&self.matrix.gram(eta), m, z.data())?;
        Ok(ImageTensor::from_raw(self.output, u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_small() {
        // [[4, 2], [2, 3]] u = [2, 1] -> u = [0.5, 0]
        let u = cholesky_solve::<f64>(&[4.0, 2.0, 2.0, 3.0], 2, &[2.0, 1.0]).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-15 && u[1].abs() < 1e-15);
    }

    #[test]
    fn cholesky_singular() {
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], 2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn more_rows_than_cols_rejected() {
        let m = DenseMatrix::new(3, 2, vec![1.0f64; 6]).unwrap();
        assert!(Dense::new(m, Shape::vector(2).unwrap()).is_err());
    }
}

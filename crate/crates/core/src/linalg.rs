//! Dense matrices and tensors with the flattening conventions used
//! throughout this crate.
//!
//! Storage is row-major everywhere. Flattening (`vec`) is column-stacking:
//! for a matrix, `vec` concatenates columns, so `vec([[1,2],[3,4]]) =
//! (1,3,2,4)`; for a tensor of order k, `vec` enumerates entries with the
//! FIRST index varying fastest. The two agree on order-2 tensors.
//!
//! Mode-m unfolding of an order-k tensor produces a `shape[m] x rest`
//! matrix whose columns enumerate the remaining indices with the first
//! remaining mode varying fastest. Under these conventions,
//! `vec(tucker(X; A_1..A_k)) = (A_k^T (x) ... (x) A_1^T) vec(X)`,
//! where each `A_m` contracts on its first index; `tucker_vec_operator`
//! builds that Kronecker chain.

use crate::error::{Error, Result};

/// Dense row-major matrix. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument {
                context: "Matrix::new".into(),
                message: format!("dimensions must be positive, got {rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{rows}x{cols} = {} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: format!("matrix entry ({}, {})", k / cols, k % cols),
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument {
                context: "Matrix::from_rows".into(),
                message: "no rows".into(),
            });
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row of length {cols}"),
                    format!("row {i} of length {}", r.len()),
                ));
            }
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0 && data.len() == rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols);
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "Matrix::matmul",
                format!("left cols == right rows ({})", self.cols),
                format!("{} rows on the right", rhs.rows),
            ));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let lhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(lhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix::from_raw(self.rows, rhs.cols, out))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(
                "Matrix::matvec",
                format!("vector of length {}", self.cols),
                format!("length {}", x.len()),
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "Matrix::add", |a, b| a + b)
    }

    /// Elementwise product; both operands must have identical shape.
    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "Matrix::hadamard", |a, b| a * b)
    }

    fn zip_with(&self, rhs: &Matrix, context: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::shape(
                context,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|v| f(*v)).collect())
    }

    /// Kronecker product; the (i,j) block of the result is `self[i][j] * rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (m, n, p, q) = (self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = vec![0.0; m * p * n * q];
        for i in 0..m {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == 0.0 {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k) * n * q + (j * q + l)] = a * rhs.data[k * q + l];
                    }
                }
            }
        }
        Matrix::from_raw(m * p, n * q, out)
    }

    /// Column-stacking flatten: columns concatenated left to right.
    pub fn vec(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Inverse of [`Matrix::vec`] for the given shape.
    pub fn unvec(rows: usize, cols: usize, v: &[f64]) -> Result<Matrix> {
        if v.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::unvec",
                format!("{} entries", rows * cols),
                format!("{}", v.len()),
            ));
        }
        let mut out = vec![0.0; v.len()];
        for j in 0..cols {
            for i in 0..rows {
                out[i * cols + j] = v[j * rows + i];
            }
        }
        Matrix::new(rows, cols, out)
    }

    /// Copy with row i zeroed wherever `keep[i]` is false.
    pub fn mask_rows(&self, keep: &[bool]) -> Result<Matrix> {
        if keep.len() != self.rows {
            return Err(Error::shape(
                "Matrix::mask_rows",
                format!("{} mask bits", self.rows),
                format!("{}", keep.len()),
            ));
        }
        let mut out = self.data.clone();
        for (i, k) in keep.iter().enumerate() {
            if !k {
                out[i * self.cols..(i + 1) * self.cols].fill(0.0);
            }
        }
        Ok(Matrix::from_raw(self.rows, self.cols, out))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn hadamard_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Copy with entry i zeroed wherever `keep[i]` is false.
pub fn mask_vec(xs: &[f64], keep: &[bool]) -> Vec<f64> {
    assert_eq!(xs.len(), keep.len());
    xs.iter().zip(keep).map(|(x, k)| if *k { *x } else { 0.0 }).collect()
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|v| v.is_finite())
}

/// Visit every multi-index of `shape` in row-major order (last index
/// fastest), passing the row-major linear position alongside.
pub(crate) fn each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for lin in 0..total {
        f(lin, &idx);
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// Strides for the first-index-fastest linearization of `shape`.
pub(crate) fn first_fastest_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for m in 1..shape.len() {
        strides[m] = strides[m - 1] * shape[m - 1];
    }
    strides
}

/// Dense row-major tensor of order >= 1. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument {
                context: "Tensor::new".into(),
                message: format!("shape must be nonempty with positive dims, got {shape:?}"),
            });
        }
        let total: usize = shape.iter().product();
        if data.len() != total {
            return Err(Error::shape(
                "Tensor::new",
                format!("{total} entries for shape {shape:?}"),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                path: format!("tensor entry at flat position {k}"),
            });
        }
        Ok(Self { shape, data })
    }

    fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        assert!(!shape.is_empty() && shape.iter().all(|&d| d > 0));
        let total = shape.iter().product();
        Self::from_raw(shape, vec![0.0; total])
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        for (m, (&i, &d)) in idx.iter().zip(&self.shape).enumerate() {
            assert!(i < d, "index {i} out of bounds for mode {m}");
            lin = lin * d + i;
        }
        self.data[lin]
    }

    pub fn from_matrix(m: &Matrix) -> Tensor {
        Tensor::from_raw(vec![m.rows(), m.cols()], m.data().to_vec())
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(Error::shape(
                "Tensor::to_matrix",
                "order-2 tensor".to_string(),
                format!("order {}", self.order()),
            ));
        }
        Matrix::new(self.shape[0], self.shape[1], self.data.clone())
    }

    /// Flatten with the first index varying fastest; on order-2 tensors
    /// this coincides with [`Matrix::vec`].
    pub fn vec(&self) -> Vec<f64> {
        let strides = first_fastest_strides(&self.shape);
        let mut out = vec![0.0; self.data.len()];
        each_index(&self.shape, |lin, idx| {
            let pos: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            out[pos] = self.data[lin];
        });
        out
    }

    /// Inverse of [`Tensor::vec`] for the given shape.
    pub fn from_vec(shape: Vec<usize>, v: &[f64]) -> Result<Tensor> {
        let total: usize = shape.iter().product();
        if shape.is_empty() || v.len() != total {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{total} entries for shape {shape:?}"),
                format!("{}", v.len()),
            ));
        }
        let strides = first_fastest_strides(&shape);
        let mut data = vec![0.0; v.len()];
        each_index(&shape, |lin, idx| {
            let pos: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            data[lin] = v[pos];
        });
        Tensor::new(shape, data)
    }

    /// Mode-m unfolding: a `shape[m] x rest` matrix whose columns run over
    /// the remaining indices, first remaining mode fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        if mode >= self.order() {
            return Err(Error::InvalidArgument {
                context: "Tensor::unfold".into(),
                message: format!("mode {mode} out of range for order {}", self.order()),
            });
        }
        let rest: usize = self.data.len() / self.shape[mode];
        let rest_strides = self.rest_strides(mode);
        let mut out = vec![0.0; self.data.len()];
        each_index(&self.shape, |lin, idx| {
            let col: usize = idx.iter().zip(&rest_strides).map(|(i, s)| i * s).sum();
            out[idx[mode] * rest + col] = self.data[lin];
        });
        Ok(Matrix::from_raw(self.shape[mode], rest, out))
    }

    /// Inverse of [`Tensor::unfold`]: rebuild a tensor of `shape` from its
    /// mode-m unfolding.
    pub fn fold(mode: usize, shape: &[usize], m: &Matrix) -> Result<Tensor> {
        if mode >= shape.len() {
            return Err(Error::InvalidArgument {
                context: "Tensor::fold".into(),
                message: format!("mode {mode} out of range for order {}", shape.len()),
            });
        }
        let total: usize = shape.iter().product();
        if m.rows() != shape[mode] || m.rows() * m.cols() != total {
            return Err(Error::shape(
                "Tensor::fold",
                format!("{}x{} unfolding of shape {shape:?}", shape[mode], total / shape[mode]),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        let tmp = Tensor::zeros(shape.to_vec());
        let rest_strides = tmp.rest_strides(mode);
        let mut data = vec![0.0; total];
        each_index(shape, |lin, idx| {
            let col: usize = idx.iter().zip(&rest_strides).map(|(i, s)| i * s).sum();
            data[lin] = m.get(idx[mode], col);
        });
        Tensor::new(shape.to_vec(), data)
    }

    fn rest_strides(&self, mode: usize) -> Vec<usize> {
        let mut strides = vec![0usize; self.order()];
        let mut acc = 1usize;
        for m in 0..self.order() {
            if m != mode {
                strides[m] = acc;
                acc *= self.shape[m];
            }
        }
        strides
    }

    /// Contract matrix `a` against mode m on its first index:
    /// `out[.., j, ..] = sum_i self[.., i, ..] * a[i, j]`.
    pub fn mode_multiply(&self, mode: usize, a: &Matrix) -> Result<Tensor> {
        if mode >= self.order() || a.rows() != self.shape[mode] {
            return Err(Error::shape(
                "Tensor::mode_multiply",
                format!("matrix with {} rows for mode {mode}", self.shape.get(mode).copied().unwrap_or(0)),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        let unfolded = self.unfold(mode)?;
        let product = a.transpose().matmul(&unfolded)?;
        let mut out_shape = self.shape.clone();
        out_shape[mode] = a.cols();
        Tensor::fold(mode, &out_shape, &product)
    }

    /// Tucker product contracting every mode at once; `mats[m]` has
    /// `shape[m]` rows and contracts on its first index. Computed by direct
    /// summation, not by unfolding.
    pub fn tucker_contract(&self, mats: &[Matrix]) -> Result<Tensor> {
        if mats.len() != self.order() {
            return Err(Error::shape(
                "Tensor::tucker_contract",
                format!("{} matrices", self.order()),
                format!("{}", mats.len()),
            ));
        }
        for (m, a) in mats.iter().enumerate() {
            if a.rows() != self.shape[m] {
                return Err(Error::shape(
                    "Tensor::tucker_contract",
                    format!("{} rows in mode-{m} matrix", self.shape[m]),
                    format!("{}", a.rows()),
                ));
            }
        }
        let out_shape: Vec<usize> = mats.iter().map(|a| a.cols()).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        each_index(&out_shape, |out_lin, jdx| {
            let mut acc = 0.0;
            each_index(&self.shape, |in_lin, idx| {
                let mut coeff = self.data[in_lin];
                for m in 0..mats.len() {
                    if coeff == 0.0 {
                        break;
                    }
                    coeff *= mats[m].get(idx[m], jdx[m]);
                }
                acc += coeff;
            });
            out[out_lin] = acc;
        });
        Ok(Tensor::from_raw(out_shape, out))
    }

    pub fn hadamard(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_with(rhs, "Tensor::hadamard", |a, b| a * b)
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.zip_with(rhs, "Tensor::add", |a, b| a + b)
    }

    fn zip_with(&self, rhs: &Tensor, context: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != rhs.shape {
            return Err(Error::shape(
                context,
                format!("{:?}", self.shape),
                format!("{:?}", rhs.shape),
            ));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Tensor::from_raw(self.shape.clone(), data))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_raw(self.shape.clone(), self.data.iter().map(|v| f(*v)).collect())
    }
}

/// Matrix applying the full Tucker product in flattened coordinates:
/// `vec(tucker(X; A_1..A_k)) = tucker_vec_operator(&[A_1..A_k]) * vec(X)`.
pub fn tucker_vec_operator(mats: &[Matrix]) -> Result<Matrix> {
    let Some(last) = mats.last() else {
        return Err(Error::InvalidArgument {
            context: "tucker_vec_operator".into(),
            message: "no matrices".into(),
        });
    };
    let mut op = last.transpose();
    for a in mats[..mats.len() - 1].iter().rev() {
        op = op.kron(&a.transpose());
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-5..=5) as f64).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn int_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let total = shape.iter().product();
        let data = (0..total).map(|_| rng.gen_range(-5..=5) as f64).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn kron_small() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let k = a.kron(&b);
        assert_eq!(k, Matrix::from_rows(&[vec![3.0, 6.0], vec![4.0, 8.0]]).unwrap());
    }

    #[test]
    fn vec_column_stacks() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.vec(), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(Matrix::unvec(2, 2, &a.vec()).unwrap(), a);
        assert_eq!(Tensor::from_matrix(&a).vec(), a.vec());
    }

    #[test]
    fn hadamard_small() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let h = a.hadamard(&b).unwrap();
        assert_eq!(h, Matrix::from_rows(&[vec![5.0, 12.0], vec![21.0, 32.0]]).unwrap());
        let c = Matrix::zeros(2, 3);
        assert!(matches!(a.hadamard(&c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0, 2.0, 3.0]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2, 0], vec![]),
            Err(Error::InvalidArgument { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2], vec![f64::INFINITY, 0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn vec_trick_on_integer_matrices() {
        // vec(A X B) = kron(B^T, A) vec(X), exactly on integer entries.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (m, n, p, q) = (
                rng.gen_range(1..5),
                rng.gen_range(1..5),
                rng.gen_range(1..5),
                rng.gen_range(1..5),
            );
            let a = int_matrix(&mut rng, m, n);
            let x = int_matrix(&mut rng, n, p);
            let b = int_matrix(&mut rng, p, q);
            let lhs = a.matmul(&x).unwrap().matmul(&b).unwrap().vec();
            let rhs = b.transpose().kron(&a).matvec(&x.vec()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn hadamard_commutes_with_vec() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = int_matrix(&mut rng, 3, 4);
        let b = int_matrix(&mut rng, 3, 4);
        assert_eq!(a.hadamard(&b).unwrap().vec(), hadamard_vec(&a.vec(), &b.vec()));
    }

    #[test]
    fn tucker_identity_and_order_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = int_tensor(&mut rng, &[2, 3, 4]);
        let eye: Vec<Matrix> = x.shape().iter().map(|&d| Matrix::identity(d)).collect();
        assert_eq!(x.tucker_contract(&eye).unwrap(), x);

        let v = int_tensor(&mut rng, &[4]);
        let a = int_matrix(&mut rng, 4, 3);
        let y = v.tucker_contract(std::slice::from_ref(&a)).unwrap();
        assert_eq!(y.data(), a.transpose().matvec(v.data()).unwrap().as_slice());
    }

    #[test]
    fn tucker_order_two_by_hand() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let a1 = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let a2 = Matrix::from_rows(&[
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let y = Tensor::from_matrix(&x)
            .tucker_contract(&[a1.clone(), a2.clone()])
            .unwrap()
            .to_matrix()
            .unwrap();
        // a1^T x a2 worked out by hand.
        let expected =
            Matrix::from_rows(&[vec![4.0, 5.0, 1.0, 2.0], vec![18.0, 21.0, 6.0, 9.0]]).unwrap();
        assert_eq!(y, expected);
        assert_eq!(y, a1.transpose().matmul(&x).unwrap().matmul(&a2).unwrap());
    }

    #[test]
    fn tucker_matches_kron_on_vec() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let shape: Vec<usize> = (0..3).map(|_| rng.gen_range(1..4)).collect();
            let x = int_tensor(&mut rng, &shape);
            let mats: Vec<Matrix> = shape
                .iter()
                .map(|&d| {
                    let cols = rng.gen_range(1..4);
                    int_matrix(&mut rng, d, cols)
                })
                .collect();
            let direct = x.tucker_contract(&mats).unwrap().vec();
            let op = tucker_vec_operator(&mats).unwrap();
            assert_eq!(direct, op.matvec(&x.vec()).unwrap());
        }
    }

    #[test]
    fn tucker_matches_sequential_mode_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let order = rng.gen_range(1..4);
            let shape: Vec<usize> = (0..order).map(|_| rng.gen_range(1..4)).collect();
            let x = int_tensor(&mut rng, &shape);
            let mats: Vec<Matrix> = shape
                .iter()
                .map(|&d| {
                    let cols = rng.gen_range(1..4);
                    int_matrix(&mut rng, d, cols)
                })
                .collect();
            let direct = x.tucker_contract(&mats).unwrap();
            let mut seq = x.clone();
            for (m, a) in mats.iter().enumerate() {
                seq = seq.mode_multiply(m, a).unwrap();
            }
            assert_eq!(direct, seq);
        }
    }

    #[test]
    fn tucker_rejects_bad_mode_shapes() {
        let x = Tensor::zeros(vec![2, 3]);
        let bad = vec![Matrix::identity(3), Matrix::identity(3)];
        assert!(matches!(x.tucker_contract(&bad), Err(Error::ShapeMismatch { .. })));
    }

    proptest! {
        #[test]
        fn unvec_inverts_vec(rows in 1usize..5, cols in 1usize..5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = int_matrix(&mut rng, rows, cols);
            prop_assert_eq!(Matrix::unvec(rows, cols, &m.vec()).unwrap(), m);
        }

        #[test]
        fn tensor_vec_roundtrip(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = rng.gen_range(1..5);
            let shape: Vec<usize> = (0..order).map(|_| rng.gen_range(1..4)).collect();
            let t = int_tensor(&mut rng, &shape);
            prop_assert_eq!(Tensor::from_vec(shape, &t.vec()).unwrap(), t);
        }

        #[test]
        fn fold_inverts_unfold(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = rng.gen_range(1..5);
            let shape: Vec<usize> = (0..order).map(|_| rng.gen_range(1..4)).collect();
            let t = int_tensor(&mut rng, &shape);
            let mode = rng.gen_range(0..order);
            let back = Tensor::fold(mode, &shape, &t.unfold(mode).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn kron_is_associative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims: Vec<(usize, usize)> =
                (0..3).map(|_| (rng.gen_range(1..3), rng.gen_range(1..3))).collect();
            let a = int_matrix(&mut rng, dims[0].0, dims[0].1);
            let b = int_matrix(&mut rng, dims[1].0, dims[1].1);
            let c = int_matrix(&mut rng, dims[2].0, dims[2].1);
            prop_assert_eq!(a.kron(&b).kron(&c), a.kron(&b.kron(&c)));
        }
    }
}

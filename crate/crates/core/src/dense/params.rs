use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform in `[-scale, scale]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = selfᵀ x` for `x` of length `rows`.
    pub fn transpose_mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
    }

    /// `out = self y` for `y` of length `cols`.
    pub fn mul(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }

    /// `self += x yᵀ`.
    pub fn add_outer(&mut self, x: &[f64], y: &[f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (w, &yj) in self.row_mut(i).iter_mut().zip(y) {
                *w += xi * yj;
            }
        }
    }

    /// Mean of the rows selected by `ids`.
    pub fn mean_rows(&self, ids: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &id in ids {
            for (o, &v) in out.iter_mut().zip(self.row(id as usize)) {
                *o += v;
            }
        }
        let n = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Backward of [`Matrix::mean_rows`]: spread `grad / n` onto each selected row.
    pub fn scatter_mean_grad(&mut self, ids: &[u32], grad: &[f64]) {
        let n = ids.len() as f64;
        for &id in ids {
            for (g, &d) in self.row_mut(id as usize).iter_mut().zip(grad) {
                *g += d / n;
            }
        }
    }
}

/// A model (or its gradient) viewed as a fixed list of flat tensors.
///
/// `tensors` and `tensors_mut` must list the same tensors in the same order;
/// gradients use the same type as parameters so the two line up.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// All parameters concatenated, in tensor order.
    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Mutable access to the `index`-th parameter of [`ParamSet::flatten`].
    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for t in self.tensors_mut() {
            if index < t.len() {
                return &mut t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

pub(crate) fn tanh_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

//! Small dense row-major matrices for the trainable components.
//!
//! The scorer MLP and the cross-attention block need ordinary dense
//! algebra at toy sizes (hundreds by hundreds at most), plus seeded
//! Xavier initialization and JSON round-tripping for checkpoints. Shapes
//! are programmer invariants here; the public module boundaries translate
//! shape problems into typed errors before calling in.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "need at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Uniform Xavier init: limit = gain * sqrt(6 / (fan_in + fan_out))
    /// with fan_in = rows and fan_out = cols for a weight applied as x·W.
    pub fn xavier_uniform<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Self {
        let limit = gain * (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// self += scale * other, the update step shape used by the trainers.
    pub fn add_scaled(&mut self, other: &Mat, scale: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&self, factor: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn hadamard(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Adds a 1×cols bias row to every row.
    pub fn add_row_broadcast(&self, bias: &Mat) -> Mat {
        assert_eq!(bias.rows, 1);
        assert_eq!(bias.cols, self.cols);
        let mut out = self.clone();
        for r in 0..out.rows {
            for (d, b) in out.row_mut(r).iter_mut().zip(&bias.data) {
                *d += b;
            }
        }
        out
    }

    /// Column sums as 1×cols, the bias-gradient reduction.
    pub fn col_sum(&self) -> Mat {
        let mut out = Mat::zeros(1, self.cols);
        for r in 0..self.rows {
            for (d, s) in out.data.iter_mut().zip(self.row(r)) {
                *d += s;
            }
        }
        out
    }

    /// Copies columns [start, start+len) into a new rows×len matrix.
    pub fn col_slice(&self, start: usize, len: usize) -> Mat {
        assert!(start + len <= self.cols);
        let mut out = Mat::zeros(self.rows, len);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..start + len]);
        }
        out
    }

    /// Writes `block` (rows×len) into columns [start, start+len).
    pub fn set_col_slice(&mut self, start: usize, block: &Mat) {
        assert_eq!(self.rows, block.rows);
        assert!(start + block.cols <= self.cols);
        for r in 0..self.rows {
            let cols = block.cols;
            self.row_mut(r)[start..start + cols].copy_from_slice(block.row(r));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = Mat::from_rows(&[vec![7.0, 8.0], vec![9.0, 10.0], vec![11.0, 12.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.rows, 2);
        assert_eq!(c.cols, 2);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn identity_is_neutral() {
        let a = Mat::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]);
        let mut eye = Mat::zeros(2, 2);
        eye.set(0, 0, 1.0);
        eye.set(1, 1, 1.0);
        assert_eq!(a.matmul(&eye), a);
        assert_eq!(eye.matmul(&a), a);
    }

    #[test]
    fn transpose_is_an_involution_and_distributes_over_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mat::xavier_uniform(3, 4, 1.0, &mut rng);
        let b = Mat::xavier_uniform(4, 2, 1.0, &mut rng);
        assert_eq!(a.transpose().transpose(), a);
        let left = a.matmul(&b).transpose();
        let right = b.transpose().matmul(&a.transpose());
        for (x, y) in left.data.iter().zip(&right.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_broadcast_adds_per_column() {
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Mat::from_rows(&[vec![10.0, 20.0]]);
        assert_eq!(x.add_row_broadcast(&b).data, vec![11.0, 22.0, 13.0, 24.0]);
    }

    #[test]
    fn col_sum_reduces_rows() {
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(x.col_sum().data, vec![9.0, 12.0]);
    }

    #[test]
    fn col_slices_round_trip() {
        let x = Mat::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]);
        let mid = x.col_slice(1, 2);
        assert_eq!(mid.data, vec![2.0, 3.0, 6.0, 7.0]);
        let mut y = Mat::zeros(2, 4);
        y.set_col_slice(1, &mid);
        assert_eq!(y.data, vec![0.0, 2.0, 3.0, 0.0, 0.0, 6.0, 7.0, 0.0]);
    }

    #[test]
    fn xavier_respects_the_gain_scaled_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Mat::xavier_uniform(64, 32, 0.1, &mut rng);
        let limit = 0.1 * (6.0 / 96.0_f64).sqrt();
        assert!(w.data.iter().all(|v| v.abs() <= limit));
        assert!(w.max_abs() > limit * 0.5, "values should fill the range");
        let mut rng2 = ChaCha8Rng::seed_from_u64(0);
        let w2 = Mat::xavier_uniform(64, 32, 0.1, &mut rng2);
        assert_eq!(w, w2, "same seed, same init");
    }

    #[test]
    fn serde_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = Mat::xavier_uniform(4, 5, 1.0, &mut rng);
        let json = serde_json::to_string(&w).unwrap();
        let back: Mat = serde_json::from_str(&json).unwrap();
        assert_eq!(w, back);
    }

    proptest! {
        #[test]
        fn matmul_is_associative_at_small_sizes(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Mat::xavier_uniform(3, 4, 1.0, &mut rng);
            let b = Mat::xavier_uniform(4, 2, 1.0, &mut rng);
            let c = Mat::xavier_uniform(2, 3, 1.0, &mut rng);
            let left = a.matmul(&b).matmul(&c);
            let right = a.matmul(&b.matmul(&c));
            for (x, y) in left.data.iter().zip(&right.data) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn scale_then_add_matches_add_scaled(seed in 0u64..500, s in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Mat::xavier_uniform(3, 3, 1.0, &mut rng);
            let b = Mat::xavier_uniform(3, 3, 1.0, &mut rng);
            let mut inplace = a.clone();
            inplace.add_scaled(&b, s);
            let functional = a.add(&b.scale(s));
            for (x, y) in inplace.data.iter().zip(&functional.data) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

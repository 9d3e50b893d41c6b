//! Minimal dense-matrix kernels, generic over f32 (training) and f64
//! (gradient checking).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + PartialOrd
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn tanh(self) -> Self {
                self.tanh()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn is_finite(self) -> bool {
                self.is_finite()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::ONE / (T::ONE + (-x).exp())
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// self += a · b, shapes (r×k)(k×c) -> r×c.
    pub fn add_matmul_nn(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.cols, b.rows);
        assert_eq!(self.rows, a.rows);
        assert_eq!(self.cols, b.cols);
        let (k, c) = (a.cols, b.cols);
        for i in 0..a.rows {
            let arow = a.row(i);
            let out = &mut self.data[i * c..(i + 1) * c];
            for (p, &av) in arow.iter().enumerate().take(k) {
                if av == T::ZERO {
                    continue;
                }
                let brow = &b.data[p * c..(p + 1) * c];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }

    /// self += a · bᵀ, shapes (r×k)(c×k) -> r×c.
    pub fn add_matmul_nt(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.cols, b.cols);
        assert_eq!(self.rows, a.rows);
        assert_eq!(self.cols, b.rows);
        let k = a.cols;
        for i in 0..a.rows {
            let arow = a.row(i);
            let out = &mut self.data[i * b.rows..(i + 1) * b.rows];
            for (j, o) in out.iter_mut().enumerate() {
                let brow = &b.data[j * k..(j + 1) * k];
                let mut acc = T::ZERO;
                for (&x, &y) in arow.iter().zip(brow) {
                    acc += x * y;
                }
                *o += acc;
            }
        }
    }

    /// self += aᵀ · b, shapes (k×r)(k×c) -> r×c.
    pub fn add_matmul_tn(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.rows, b.rows);
        assert_eq!(self.rows, a.cols);
        assert_eq!(self.cols, b.cols);
        let c = b.cols;
        for p in 0..a.rows {
            let arow = a.row(p);
            let brow = b.row(p);
            for (i, &av) in arow.iter().enumerate() {
                if av == T::ZERO {
                    continue;
                }
                let out = &mut self.data[i * c..(i + 1) * c];
                for (o, &bv) in out.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }

    /// Add a bias row vector to every row.
    pub fn add_bias(&mut self, bias: &[T]) {
        assert_eq!(bias.len(), self.cols);
        for r in 0..self.rows {
            for (x, &b) in self.row_mut(r).iter_mut().zip(bias) {
                *x += b;
            }
        }
    }
}

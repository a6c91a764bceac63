//! FFT building blocks: transforms over the detector axes and fast cosine sums.

use std::sync::Arc;

use ndarray::{Array3, ArrayViewMut2, Axis};
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::real::Real;

/// Unnormalised 2D transform over axes 0 and 1 of a 3D array.
#[derive(Clone)]
pub struct DetectorFft<T: Real> {
    n_x: usize,
    n_y: usize,
    fwd_x: Arc<dyn Fft<T>>,
    inv_x: Arc<dyn Fft<T>>,
    fwd_y: Arc<dyn Fft<T>>,
    inv_y: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for DetectorFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorFft")
            .field("n_x", &self.n_x)
            .field("n_y", &self.n_y)
            .finish()
    }
}

impl<T: Real> DetectorFft<T> {
    pub fn new(n_x: usize, n_y: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_x,
            n_y,
            fwd_x: planner.plan_fft_forward(n_x),
            inv_x: planner.plan_fft_inverse(n_x),
            fwd_y: planner.plan_fft_forward(n_y),
            inv_y: planner.plan_fft_inverse(n_y),
        }
    }

    /// Transforms every `(x, y)` slice of `arr` in place; no normalisation.
    pub fn process(&self, arr: &mut Array3<Complex<T>>, direction: FftDirection) {
        assert_eq!(arr.shape()[0], self.n_x);
        assert_eq!(arr.shape()[1], self.n_y);
        let (px, py) = match direction {
            FftDirection::Forward => (&self.fwd_x, &self.fwd_y),
            FftDirection::Inverse => (&self.inv_x, &self.inv_y),
        };
        arr.axis_iter_mut(Axis(2))
            .into_par_iter()
            .for_each(|slice| self.process_slice(slice, px.as_ref(), py.as_ref()));
    }

    fn process_slice(
        &self,
        mut slice: ArrayViewMut2<Complex<T>>,
        px: &dyn Fft<T>,
        py: &dyn Fft<T>,
    ) {
        let (n_x, n_y) = (self.n_x, self.n_y);
        let mut buf = vec![Complex::default(); n_x.max(n_y)];
        let scratch_len = px
            .get_inplace_scratch_len()
            .max(py.get_inplace_scratch_len());
        let mut scratch = vec![Complex::default(); scratch_len];
        if n_y > 1 {
            for mut row in slice.rows_mut() {
                let b = &mut buf[..n_y];
                for (d, s) in b.iter_mut().zip(row.iter()) {
                    *d = *s;
                }
                py.process_with_scratch(b, &mut scratch);
                for (d, s) in row.iter_mut().zip(b.iter()) {
                    *d = *s;
                }
            }
        }
        if n_x > 1 {
            for mut col in slice.columns_mut() {
                let b = &mut buf[..n_x];
                for (d, s) in b.iter_mut().zip(col.iter()) {
                    *d = *s;
                }
                px.process_with_scratch(b, &mut scratch);
                for (d, s) in col.iter_mut().zip(b.iter()) {
                    *d = *s;
                }
            }
        }
    }
}

/// Evaluates `out[o] = sum_i input[i] * cos(2 pi o i / len)` with one FFT of
/// size `len`. The kernel is symmetric in `(o, i)`, so the same object applies
/// a cosine matrix and its transpose.
#[derive(Clone)]
pub struct CosineSum<T: Real> {
    len: usize,
    plan: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for CosineSum<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineSum").field("len", &self.len).finish()
    }
}

/// Per-call working memory for [`CosineSum`].
pub struct CosineScratch<T> {
    buf: Vec<Complex<T>>,
    fft: Vec<Complex<T>>,
}

impl<T: Real> CosineSum<T> {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1);
        let plan = FftPlanner::new().plan_fft_inverse(len);
        Self { len, plan }
    }

    pub fn period(&self) -> usize {
        self.len
    }

    pub fn scratch(&self) -> CosineScratch<T> {
        CosineScratch {
            buf: vec![Complex::default(); self.len],
            fft: vec![Complex::default(); self.plan.get_inplace_scratch_len()],
        }
    }

    pub fn apply(&self, input: &[Complex<T>], out: &mut [Complex<T>], s: &mut CosineScratch<T>) {
        let l = self.len;
        s.buf.fill(Complex::default());
        for (i, &v) in input.iter().enumerate() {
            s.buf[i % l] += v;
        }
        self.plan.process_with_scratch(&mut s.buf, &mut s.fft);
        let half = T::of(0.5);
        for (o, dst) in out.iter_mut().enumerate() {
            let a = o % l;
            let b = (l - a) % l;
            *dst = (s.buf[a] + s.buf[b]) * half;
        }
    }
}

/// Type-I discrete cosine transform with half-weighted endpoints,
/// `y[n] = sum_l w_l x[l] cos(pi n l / (N - 1))`, `w_0 = w_{N-1} = 1/2`.
///
/// Applying it twice multiplies by `(N - 1) / 2`. [`Dct1::apply_transpose`]
/// applies the matrix transpose (weights on the output side).
#[derive(Clone, Debug)]
pub struct Dct1<T: Real> {
    n: usize,
    kernel: CosineSum<T>,
}

pub struct Dct1Scratch<T> {
    tmp: Vec<Complex<T>>,
    cos: CosineScratch<T>,
}

impl<T: Real> Dct1<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "DCT-I needs at least two points");
        Self {
            n,
            kernel: CosineSum::new(2 * (n - 1)),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn scratch(&self) -> Dct1Scratch<T> {
        Dct1Scratch {
            tmp: vec![Complex::default(); self.n],
            cos: self.kernel.scratch(),
        }
    }

    /// `input` may be shorter than `N` (implicit zero padding); `out` may be
    /// shorter than `N` (truncation).
    pub fn apply(&self, input: &[Complex<T>], out: &mut [Complex<T>], s: &mut Dct1Scratch<T>) {
        let half = T::of(0.5);
        let m = input.len().min(self.n);
        s.tmp[..m].copy_from_slice(&input[..m]);
        s.tmp[m..].fill(Complex::default());
        s.tmp[0] *= half;
        s.tmp[self.n - 1] *= half;
        self.kernel.apply(&s.tmp, out, &mut s.cos);
    }

    pub fn apply_transpose(
        &self,
        input: &[Complex<T>],
        out: &mut [Complex<T>],
        s: &mut Dct1Scratch<T>,
    ) {
        let half = T::of(0.5);
        let m = input.len().min(self.n);
        s.tmp[..m].copy_from_slice(&input[..m]);
        s.tmp[m..].fill(Complex::default());
        self.kernel.apply(&s.tmp, out, &mut s.cos);
        if let Some(first) = out.first_mut() {
            *first *= half;
        }
        if out.len() >= self.n {
            out[self.n - 1] *= half;
        }
    }
}


/// Unnormalised 3D transform of a contiguous `(n_0, n_1, n_2)` volume,
/// processed on the calling thread.
#[derive(Clone)]
pub struct VolumeFft<T: Real> {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<T>>; 3],
}

impl<T: Real> VolumeFft<T> {
    pub fn new(dims: [usize; 3], direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft(n, direction));
        Self { dims, plans }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn process(&self, arr: &mut Array3<Complex<T>>) {
        assert_eq!(arr.shape(), self.dims);
        let scratch_len = self
            .plans
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let mut scratch = vec![Complex::default(); scratch_len];
        let mut buf = vec![Complex::default(); *self.dims.iter().max().unwrap()];
        for axis in 0..3 {
            let n = self.dims[axis];
            if n == 1 {
                continue;
            }
            let plan = &self.plans[axis];
            for mut lane in arr.lanes_mut(Axis(axis)) {
                if let Some(s) = lane.as_slice_mut() {
                    plan.process_with_scratch(s, &mut scratch);
                    continue;
                }
                let b = &mut buf[..n];
                for (d, s) in b.iter_mut().zip(lane.iter()) {
                    *d = *s;
                }
                plan.process_with_scratch(b, &mut scratch);
                for (d, s) in lane.iter_mut().zip(b.iter()) {
                    *d = *s;
                }
            }
        }
    }
}

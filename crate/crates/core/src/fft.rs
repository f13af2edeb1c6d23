//! Multi-dimensional complex FFTs on row-major arrays, one axis at a time.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

pub struct FftN {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scratch: Mutex<(Vec<Complex64>, Vec<Complex64>)>,
}

impl FftN {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims: dims.to_vec(),
            forward: dims.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
            scratch: Mutex::new((Vec::new(), Vec::new())),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward, None);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse, None);
    }

    /// Forward transform of a 2D array that only computes the rows
    /// (first-axis indices) flagged in `rows`; the others are left unspecified.
    pub fn forward_rows(&self, data: &mut [Complex64], rows: &[bool]) {
        assert_eq!(self.dims.len(), 2);
        self.run(data, &self.forward, Some(rows));
    }

    /// Inverse transform of a 2D array whose rows outside `rows` are zero.
    pub fn inverse_rows(&self, data: &mut [Complex64], rows: &[bool]) {
        assert_eq!(self.dims.len(), 2);
        let mut guard = self.scratch.lock().unwrap_or_else(|e| e.into_inner());
        let (lines, work) = &mut *guard;
        let m = self.dims[1];
        Self::rows_pass(data, m, &self.inverse[1], rows, work);
        Self::strided_pass(data, self.dims[0], m, &self.inverse[0], lines, work);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>], rows: Option<&[bool]>) {
        assert_eq!(data.len(), self.len());
        let mut guard = self.scratch.lock().unwrap_or_else(|e| e.into_inner());
        let (lines, work) = &mut *guard;
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.dims[axis];
            let stride: usize = self.dims[axis + 1..].iter().product();
            match (stride, rows) {
                (1, Some(r)) => Self::rows_pass(data, n, plan, r, work),
                (1, None) => {
                    ensure(work, plan.get_inplace_scratch_len());
                    plan.process_with_scratch(data, work);
                }
                _ => Self::strided_pass(data, n, stride, plan, lines, work),
            }
        }
    }

    /// Transforms the contiguous rows of length `m` flagged in `rows`.
    fn rows_pass(
        data: &mut [Complex64],
        m: usize,
        plan: &Arc<dyn Fft<f64>>,
        rows: &[bool],
        work: &mut Vec<Complex64>,
    ) {
        ensure(work, plan.get_inplace_scratch_len());
        let mut r = 0;
        while r < rows.len() {
            if !rows[r] {
                r += 1;
                continue;
            }
            let start = r;
            while r < rows.len() && rows[r] {
                r += 1;
            }
            plan.process_with_scratch(&mut data[start * m..r * m], work);
        }
    }

    fn strided_pass(
        data: &mut [Complex64],
        n: usize,
        stride: usize,
        plan: &Arc<dyn Fft<f64>>,
        lines: &mut Vec<Complex64>,
        work: &mut Vec<Complex64>,
    ) {
        ensure(work, plan.get_inplace_scratch_len());
        // gather every line along this axis into one contiguous batch
        let outer = data.len() / (n * stride);
        lines.resize(data.len(), Complex64::new(0.0, 0.0));
        for o in 0..outer {
            let base = o * n * stride;
            for i in 0..n {
                let row = &data[base + i * stride..base + (i + 1) * stride];
                for (s, v) in row.iter().enumerate() {
                    lines[(o * stride + s) * n + i] = *v;
                }
            }
        }
        plan.process_with_scratch(lines, work);
        for o in 0..outer {
            let base = o * n * stride;
            for i in 0..n {
                let row = &mut data[base + i * stride..base + (i + 1) * stride];
                for (s, v) in row.iter_mut().enumerate() {
                    *v = lines[(o * stride + s) * n + i];
                }
            }
        }
    }
}

fn ensure(work: &mut Vec<Complex64>, len: usize) {
    if work.len() != len {
        work.resize(len, Complex64::new(0.0, 0.0));
    }
}

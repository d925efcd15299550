//! Two-dimensional FFT on row-major buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Cached row/column plans for a fixed `width`×`height` transform.
pub struct Fft2 {
    width: usize,
    height: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
    column: Vec<Complex<f64>>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
        } else {
            (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
        };
        let scratch_len = row.get_inplace_scratch_len().max(col.get_inplace_scratch_len());
        Fft2 {
            width,
            height,
            row,
            col,
            scratch: vec![Complex::default(); scratch_len],
            column: vec![Complex::default(); height],
        }
    }

    /// Unnormalized transform in place.
    pub fn process(&mut self, data: &mut [Complex<f64>]) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match plan");
        for r in data.chunks_exact_mut(w) {
            self.row.process_with_scratch(r, &mut self.scratch);
        }
        for x in 0..w {
            for y in 0..h {
                self.column[y] = data[y * w + x];
            }
            self.col.process_with_scratch(&mut self.column, &mut self.scratch);
            for y in 0..h {
                data[y * w + x] = self.column[y];
            }
        }
    }

    /// |F| of a real input, rearranged so the zero frequency sits at
    /// `(height / 2, width / 2)`.
    pub fn magnitude_shifted(&mut self, input: &[f64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut buf: Vec<Complex<f64>> = input.iter().map(|v| Complex::new(*v, 0.0)).collect();
        self.process(&mut buf);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let sy = (y + h / 2) % h;
            for x in 0..w {
                let sx = (x + w / 2) % w;
                out[sy * w + sx] = buf[y * w + x].norm();
            }
        }
        out
    }
}

/// Signed frequency index of unshifted FFT bin `i` of an `n`-point transform.
pub fn signed_freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

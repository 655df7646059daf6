//! In-place 3D complex FFT over an `x`-fastest, then `y`, then `t` layout.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::stackgen::Dims;

pub struct Fft3 {
    dims: Dims,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::new();
        let lens = [dims.nx, dims.ny, dims.nt];
        let forward = lens.map(|n| planner.plan_fft_forward(n));
        let inverse = lens.map(|n| planner.plan_fft_inverse(n));
        Self {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform scaled by `1/N` so that `inverse(forward(x)) = x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let Dims { nx, ny, nt } = self.dims;
        assert_eq!(
            data.len(),
            nx * ny * nt,
            "buffer does not match transform dims"
        );

        let scratch_len = plans
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let mut scratch = vec![Complex64::default(); scratch_len];

        // x lines are contiguous
        plans[0].process_with_scratch(data, &mut scratch);

        let mut line = vec![Complex64::default(); ny.max(nt)];
        let plane = nx * ny;
        for t in 0..nt {
            for x in 0..nx {
                let base = t * plane + x;
                for y in 0..ny {
                    line[y] = data[base + y * nx];
                }
                plans[1].process_with_scratch(&mut line[..ny], &mut scratch);
                for y in 0..ny {
                    data[base + y * nx] = line[y];
                }
            }
        }
        for y in 0..ny {
            for x in 0..nx {
                let base = y * nx + x;
                for t in 0..nt {
                    line[t] = data[base + t * plane];
                }
                plans[2].process_with_scratch(&mut line[..nt], &mut scratch);
                for t in 0..nt {
                    data[base + t * plane] = line[t];
                }
            }
        }
    }
}

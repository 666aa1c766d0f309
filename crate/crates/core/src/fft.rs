//! Multi-dimensional FFTs on row-major buffers, built from rustfft 1-D plans.

use std::sync::Arc;

use ndarray::{ArrayViewMut, Axis, Dimension};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Unnormalized 3-D transform over a row-major `[n0, n1, n2]` buffer.
pub(crate) struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub(crate) fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let plan = |planner: &mut FftPlanner<f64>, dir| {
            [
                planner.plan_fft(dims[0], dir),
                planner.plan_fft(dims[1], dir),
                planner.plan_fft(dims[2], dir),
            ]
        };
        let forward = plan(&mut planner, FftDirection::Forward);
        let inverse = plan(&mut planner, FftDirection::Inverse);
        Self { dims, forward, inverse }
    }

    pub(crate) fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse; divide by `len()` to undo `forward`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [n0, n1, n2] = self.dims;
        debug_assert_eq!(data.len(), n0 * n1 * n2);
        // Last axis is contiguous.
        plans[2].process(data);
        let mut lane = Vec::new();
        for (axis, stride, n) in [(1usize, n2, n1), (0usize, n1 * n2, n0)] {
            let outer = if axis == 1 { n0 } else { 1 };
            let inner = if axis == 1 { n2 } else { n1 * n2 };
            let block = n * stride;
            lane.resize(n * inner, Complex64::default());
            for o in 0..outer {
                let base = o * block;
                // Gather all lanes of this block as contiguous rows.
                for i in 0..inner {
                    for t in 0..n {
                        lane[i * n + t] = data[base + t * stride + i];
                    }
                }
                plans[axis].process(&mut lane);
                for i in 0..inner {
                    for t in 0..n {
                        data[base + t * stride + i] = lane[i * n + t];
                    }
                }
            }
        }
    }
}

/// In-place unnormalized DFT along one axis of an n-d array.
pub(crate) fn fft_axis<D: Dimension>(arr: &mut ArrayViewMut<'_, Complex64, D>, axis: usize, direction: FftDirection) {
    let n = arr.len_of(Axis(axis));
    if n <= 1 {
        return;
    }
    let plan = FftPlanner::new().plan_fft(n, direction);
    let mut buf = vec![Complex64::default(); n];
    for mut lane in arr.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        plan.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(&buf) {
            *v = *b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft3(data: &[Complex64], dims: [usize; 3]) -> Vec<Complex64> {
        let [a, b, c] = dims;
        let mut out = vec![Complex64::default(); data.len()];
        for (u, v, w) in itertools(a, b, c) {
            let mut acc = Complex64::default();
            for (x, y, z) in itertools(a, b, c) {
                let ph = -2.0 * std::f64::consts::PI
                    * ((u * x) as f64 / a as f64 + (v * y) as f64 / b as f64 + (w * z) as f64 / c as f64);
                acc += data[(x * b + y) * c + z] * Complex64::from_polar(1.0, ph);
            }
            out[(u * b + v) * c + w] = acc;
        }
        out
    }

    fn itertools(a: usize, b: usize, c: usize) -> impl Iterator<Item = (usize, usize, usize)> {
        (0..a).flat_map(move |x| (0..b).flat_map(move |y| (0..c).map(move |z| (x, y, z))))
    }

    #[test]
    fn matches_direct_dft_and_inverts() {
        let dims = [3, 4, 5];
        let data: Vec<Complex64> = (0..60).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let plan = Fft3::new(dims);
        let mut x = data.clone();
        plan.forward(&mut x);
        let reference = dft3(&data, dims);
        for (a, b) in x.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-11);
        }
        plan.inverse(&mut x);
        for (a, b) in x.iter().zip(&data) {
            assert!((a / plan.len() as f64 - b).norm() < 1e-13);
        }
    }
}

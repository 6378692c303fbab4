//! Two-dimensional transforms over time-major buffers (`M` rows of `N`).

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// Columns gathered per batch when transforming along the time axis.
const COLUMN_BLOCK: usize = 32;

/// Unnormalized 2D FFT in place. `buf[m * n + j]` holds row `m`, column `j`.
pub(crate) fn transform_2d(buf: &mut [Complex64], n: usize, m: usize, direction: FftDirection) {
    assert_eq!(buf.len(), n * m);
    let mut planner = FftPlanner::new();

    let rows = planner.plan_fft(n, direction);
    rows.process(buf);

    let cols = planner.plan_fft(m, direction);
    let block = COLUMN_BLOCK.min(n);
    let mut scratch = vec![Complex64::default(); block * m];
    for start in (0..n).step_by(block) {
        let width = block.min(n - start);
        for c in 0..width {
            let column = &mut scratch[c * m..(c + 1) * m];
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = buf[r * n + start + c];
            }
        }
        cols.process(&mut scratch[..width * m]);
        for c in 0..width {
            for r in 0..m {
                buf[r * n + start + c] = scratch[c * m + r];
            }
        }
    }
}

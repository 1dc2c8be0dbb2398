//! Shared fixtures for the criterion benches. The crate ships no runtime
//! code; build it only to run `cargo bench`.

use num_complex::Complex64;

/// Interior spot away from every degeneracy, so benched pipelines exercise
/// all four branches with nontrivial weak-measurement filtering.
pub const SPOT: (f64, f64, f64) = (0.37, 0.6, 0.25);

/// Real amplitude pair for `x = |alpha|^2`.
pub fn amplitudes(x: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(x.sqrt(), 0.0),
        Complex64::new((1.0 - x).sqrt(), 0.0),
    )
}

/// Dense Hermitian test matrix with full off-diagonal structure and known
/// extent, sized for the register dimensions the pipelines produce.
pub fn hermitian(n: usize) -> tpsim_core::ComplexMatrix {
    tpsim_core::ComplexMatrix::from_fn(n, n, |i, j| {
        let (i, j) = (i as f64, j as f64);
        Complex64::new(
            1.0 / (1.0 + i + j),
            if i < j { 0.1 * (j - i) } else { -0.1 * (i - j) },
        )
    })
    .expect("square dimensions")
}

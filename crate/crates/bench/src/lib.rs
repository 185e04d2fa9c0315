//! Shared fixtures for the benchmark targets.

use mucogarch_core::levy::{CompoundPoissonSpec, JumpLaw};
use mucogarch_core::matcore::{PsdMatrix, SymMatrix};
use mucogarch_core::process::ModelParams;
use nalgebra::DMatrix;

pub fn bench_params(d: usize) -> ModelParams {
    let mut a = DMatrix::identity(d, d) * 0.4;
    let mut b = DMatrix::identity(d, d) * -1.0;
    for i in 1..d {
        a[(0, i)] = 0.1;
        b[(0, i)] = 0.3;
        // distinct eigenvalues keep B diagonalizable
        b[(i, i)] = -1.0 - 0.4 * i as f64;
    }
    ModelParams::new(a, b, SymMatrix::identity(d)).unwrap()
}

pub fn bench_spec(d: usize, rate: f64) -> CompoundPoissonSpec {
    CompoundPoissonSpec::new(rate, d, JumpLaw::IsotropicGaussian { sigma: 0.8 }).unwrap()
}

pub fn bench_y0(d: usize) -> PsdMatrix {
    PsdMatrix::scaled_identity(d, 0.5).unwrap()
}

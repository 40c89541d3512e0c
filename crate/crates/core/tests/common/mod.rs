#![allow(dead_code)]

use shsa_core::jlss::{build_reduced_model, JlssModel, Reduction};
use shsa_core::DMatrix;

/// The six-dimensional jump linear system used throughout the experiments.
pub fn six_state_system() -> JlssModel {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        -1.0, -10.0, 0.0, 0.0, 0.0, 0.0,
        10.0, -1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -2.0, -20.0, 0.0, 0.0,
        0.0, 0.0, 20.0, -1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -2.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, -2.5,
    ]);
    #[rustfmt::skip]
    let f = DMatrix::from_row_slice(6, 6, &[
        1.0, 0.0, 0.0, 0.0, 1.0, 1.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 1.0, 1.0,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0, 1.0, 0.0,
    ]) * 0.5;
    let r = DMatrix::identity(6, 6) * 0.7;
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 6, &[
        0.84, -1.03, 1.07, -0.88, 0.5, 0.0,
        -0.6, -1.35, -0.26, -0.27, 0.0, -0.5,
    ]);
    JlssModel::new(a, f, r, c, 0.5).unwrap()
}

pub fn truncated(k: usize) -> JlssModel {
    build_reduced_model(&six_state_system(), Reduction::Truncate(k)).unwrap()
}

/// The three reduced models: truncation to four states, the full system
/// without diffusion, and the full system without jumps.
pub fn reduced_models() -> [JlssModel; 3] {
    let sys = six_state_system();
    let m1 = truncated(4);
    let m2 = build_reduced_model(&sys, Reduction::NoDiffusion).unwrap();
    let m3 = build_reduced_model(&sys, Reduction::NoJump).unwrap();
    [m1, m2, m3]
}

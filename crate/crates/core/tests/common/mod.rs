//! Shared test fixtures: an independently coded scalar reference
//! recursion and random model instances.

#![allow(dead_code)]

use mucogarch_core::levy::JumpTrain;
use mucogarch_core::matcore::{PsdMatrix, SymMatrix};
use mucogarch_core::process::ModelParams;
use mucogarch_core::seeding::rng_for;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Scalar volatility recursion coded directly from the one-dimensional
/// dynamics: exponential decay `y <- y e^{2 b dt}` between jumps and
/// `y <- y + a^2 (c + y) x^2` at a jump. Kept free of any matrix code so
/// it is an independent oracle for the d = 1 simulator.
pub struct ScalarRecursion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub struct ScalarEvent {
    pub t: f64,
    /// "grid", "pre_jump" or "post_jump", matching the simulator log.
    pub kind: &'static str,
    pub y: f64,
}

impl ScalarRecursion {
    pub fn evolve(&self, y0: f64, train: &JumpTrain, grid: &[f64]) -> Vec<ScalarEvent> {
        let mut grid: Vec<f64> = grid.to_vec();
        grid.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut events: Vec<(f64, u8, f64)> = Vec::new(); // (t, kind rank, mark)
        for (t, m) in train.times.iter().zip(&train.marks) {
            events.push((*t, 0, m[0]));
        }
        for &t in &grid {
            events.push((t, 1, 0.0));
        }
        events.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.cmp(&q.1)));

        let mut out = Vec::new();
        let mut t_cur = 0.0;
        let mut y = y0;
        for (t, kind, mark) in events {
            if t > t_cur {
                y *= (2.0 * self.b * (t - t_cur)).exp();
                t_cur = t;
            }
            if kind == 0 {
                out.push(ScalarEvent {
                    t,
                    kind: "pre_jump",
                    y,
                });
                y += self.a * self.a * (self.c + y) * mark * mark;
                out.push(ScalarEvent {
                    t,
                    kind: "post_jump",
                    y,
                });
            } else {
                out.push(ScalarEvent { t, kind: "grid", y });
            }
        }
        out
    }
}

/// Random instance of dimension `d`: generic `A`, stable not-necessarily-
/// normal `B`, Wishart-plus-ridge `C`.
pub fn random_params(d: usize, seed: u64) -> ModelParams {
    let mut rng = rng_for(seed, "instance", d as u64);
    let a = DMatrix::from_fn(d, d, |_, _| 0.8 * rng.sample::<f64, _>(StandardNormal));
    let mut b = DMatrix::from_fn(d, d, |_, _| 0.4 * rng.sample::<f64, _>(StandardNormal));
    for i in 0..d {
        b[(i, i)] -= 1.0 + rng.random::<f64>();
    }
    let c = random_psd(d, 0.3, &mut rng);
    ModelParams::new(a, b, SymMatrix::symmetrized(c.matrix()).unwrap()).unwrap()
}

/// Random symmetric stable `B` with eigenvalues in `[-hi, -lo]`.
pub fn random_stable_symmetric(
    d: usize,
    lo: f64,
    hi: f64,
    rng: &mut impl Rng,
) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let mut diag = DMatrix::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = -(lo + (hi - lo) * rng.random::<f64>());
    }
    let m = &q * diag * q.transpose();
    DMatrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Wishart sample plus `ridge * I`, guaranteed positive definite.
pub fn random_psd(d: usize, ridge: f64, rng: &mut impl Rng) -> PsdMatrix {
    let mut w = DMatrix::<f64>::zeros(d, d);
    for _ in 0..d {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        w += &g * g.transpose();
    }
    w += DMatrix::identity(d, d) * ridge;
    PsdMatrix::try_new(SymMatrix::symmetrized(&w).unwrap()).unwrap()
}

/// Isotropic point-mass law atoms: `+- s e_i` with equal weights, whose
/// second-moment matrix is exactly `(s^2 / d) I`.
pub fn isotropic_atoms(d: usize, s: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut weights = Vec::new();
    let mut points = Vec::new();
    for i in 0..d {
        for sign in [-1.0f64, 1.0] {
            let mut x = vec![0.0; d];
            x[i] = sign * s;
            weights.push(1.0 / (2 * d) as f64);
            points.push(x);
        }
    }
    (weights, points)
}

//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p mucogarch-core --test acceptance --
//! --nocapture` to see the lines.

mod common;

use std::time::Instant;

use common::{isotropic_atoms, random_params, random_psd, random_stable_symmetric, ScalarRecursion};
use mucogarch_core::conditions::{
    check_first_order, check_geom_ergodicity, check_geom_ergodicity_small_p,
    check_log_stationarity, check_moment_k, Verdict,
};
use mucogarch_core::ergolab::{
    coupling_experiment, irreducibility_rank_probe, multi_start_convergence, ExperimentConfig,
};
use mucogarch_core::generator::{dynkin_check, foster_lyapunov_scan, gronwall_check};
use mucogarch_core::levy::{sample_jump_train, CompoundPoissonSpec, JumpLaw};
use mucogarch_core::matcore::{mat_exp, BsNormContext, PsdMatrix, SymMatrix};
use mucogarch_core::process::{reconstruct_path, simulate_with_train, ModelParams};
use mucogarch_core::seeding::rng_for;
use nalgebra::{dmatrix, DMatrix};
use rayon::prelude::*;

fn criterion(n: u32, name: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n:>2} {name}: {status} [{detail}]");
    assert!(pass, "acceptance criterion {n} ({name}) failed: {detail}");
}

fn lin_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

fn ensemble_law(idx: u64, d: usize) -> JumpLaw {
    match idx % 4 {
        0 => JumpLaw::IsotropicGaussian { sigma: 0.7 },
        1 => JumpLaw::BallUniform { radius: 1.2 },
        2 => JumpLaw::TruncatedGaussian {
            sigma: 1.0,
            radius: 2.0,
        },
        _ => {
            let (weights, points) = isotropic_atoms(d, 0.8);
            JumpLaw::PointMasses { weights, points }
        }
    }
}

/// Criterion 1: the integral-representation oracle reproduces the
/// simulator within 1e-10 (1 + max |Y|_F) on 1000 seeded runs.
#[test]
fn acceptance_01_reconstruction_exactness() {
    let start = Instant::now();
    let horizon = 2.0;
    let grid = lin_grid(0.0, horizon, 5);

    let results: Vec<(f64, f64, usize)> = (0..1000u64)
        .into_par_iter()
        .map(|run| {
            let d = 1 + (run % 3) as usize;
            let params = random_params(d, 10_000 + run);
            let spec = CompoundPoissonSpec::new(4.0, d, ensemble_law(run, d)).unwrap();
            let mut rng = rng_for(run, "accept1-y0", 0);
            let y0 = random_psd(d, 0.0, &mut rng);
            let train = sample_jump_train(&spec, horizon, run).unwrap();
            let rec = simulate_with_train(&params, &train, &y0, &grid, false).unwrap();
            let err = reconstruct_path(&rec).unwrap();
            (err, rec.max_frobenius(), train.len())
        })
        .collect();

    let max_jumps = results.iter().map(|r| r.2).max().unwrap();
    let worst_rel = results
        .iter()
        .map(|(err, scale, _)| err / (1e-10 * (1.0 + scale)))
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        1,
        "reconstruction exactness (1000 runs)",
        worst_rel <= 1.0 && max_jumps <= 50 && elapsed <= 120.0,
        format!(
            "worst err / tol = {worst_rel:.3e}, max jumps = {max_jumps}, {elapsed:.1}s"
        ),
    );
}

/// Criterion 2: zero violations of PSD preservation and of the flow
/// lower bound across the same 1000 runs.
#[test]
fn acceptance_02_cone_invariants() {
    let horizon = 2.0;
    let grid = lin_grid(0.0, horizon, 5);

    let violations: usize = (0..1000u64)
        .into_par_iter()
        .map(|run| {
            let d = 1 + (run % 3) as usize;
            let params = random_params(d, 10_000 + run);
            let spec = CompoundPoissonSpec::new(4.0, d, ensemble_law(run, d)).unwrap();
            let mut rng = rng_for(run, "accept1-y0", 0);
            let y0 = random_psd(d, 0.0, &mut rng);
            let train = sample_jump_train(&spec, horizon, run).unwrap();
            let rec = simulate_with_train(&params, &train, &y0, &grid, false).unwrap();

            let mut bad = 0usize;
            for pt in &rec.skeleton {
                let sym = SymMatrix::symmetrized(&pt.y).unwrap();
                if sym.min_eigenvalue() < -1e-10 * (1.0 + sym.spectral_norm()) {
                    bad += 1;
                }
            }
            for pt in rec.grid_points() {
                let e = mat_exp(params.b(), pt.t).unwrap();
                let floor = &e * y0.matrix() * e.transpose();
                let gap = SymMatrix::symmetrized(&(&pt.y - floor)).unwrap();
                let scale = SymMatrix::symmetrized(&pt.y).unwrap().spectral_norm();
                if gap.min_eigenvalue() < -1e-10 * (1.0 + scale) {
                    bad += 1;
                }
            }
            bad
        })
        .sum();

    criterion(
        2,
        "cone invariants (1000 runs)",
        violations == 0,
        format!("{violations} violations"),
    );
}

/// Criterion 3: the d = 1 simulator matches the independent scalar
/// recursion to 1e-12 at every event on 100 seeds.
#[test]
fn acceptance_03_scalar_reduction() {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = rng_for(seed, "accept3", 0);
        use rand::Rng;
        let a = 0.2 + 1.3 * rng.random::<f64>();
        let b = -(0.3 + 1.2 * rng.random::<f64>());
        let c = 0.2 + rng.random::<f64>();
        let y0 = 1.5 * rng.random::<f64>();
        let params = ModelParams::new(
            dmatrix![a],
            dmatrix![b],
            SymMatrix::from_row_major(1, &[c]).unwrap(),
        )
        .unwrap();
        let spec =
            CompoundPoissonSpec::new(4.0, 1, JumpLaw::IsotropicGaussian { sigma: 0.8 }).unwrap();
        let train = sample_jump_train(&spec, 2.0, 700 + seed).unwrap();
        let grid = lin_grid(0.0, 2.0, 8);
        let y0m = PsdMatrix::try_new(SymMatrix::from_row_major(1, &[y0]).unwrap()).unwrap();
        let rec = simulate_with_train(&params, &train, &y0m, &grid, false).unwrap();
        let expected = ScalarRecursion { a, b, c }.evolve(y0, &train, &grid);
        assert_eq!(rec.skeleton.len(), expected.len());
        let scale = expected.iter().map(|e| e.y.abs()).fold(1.0, f64::max);
        for (got, want) in rec.skeleton.iter().zip(&expected) {
            worst = worst.max((got.y[(0, 0)] - want.y).abs() / (1e-12 * scale));
        }
    }
    criterion(
        3,
        "scalar reduction (100 seeds)",
        worst <= 1.0,
        format!("worst err / tol = {worst:.3e}"),
    );
}

/// Criterion 4: the Dynkin difference quotient converges to the
/// generator at rate O(h) with a stable constant over h in
/// {0.1, 0.05, 0.025}, on a closed-form d = 1 configuration and a d = 2
/// Gaussian one.
#[test]
fn acceptance_04_dynkin_quotient() {
    let start = Instant::now();
    let hs = [0.1, 0.05, 0.025];
    let n_paths = 20_000usize;

    let configs: Vec<(&str, ModelParams, CompoundPoissonSpec, PsdMatrix)> = vec![
        (
            "d1-point-mass",
            ModelParams::new(
                dmatrix![0.8],
                dmatrix![-1.0],
                SymMatrix::from_row_major(1, &[1.0]).unwrap(),
            )
            .unwrap(),
            CompoundPoissonSpec::new(
                1.2,
                1,
                JumpLaw::PointMasses {
                    weights: vec![1.0],
                    points: vec![vec![0.7]],
                },
            )
            .unwrap(),
            PsdMatrix::scaled_identity(1, 0.9).unwrap(),
        ),
        (
            "d2-gaussian",
            ModelParams::new(
                DMatrix::identity(2, 2) * 0.5,
                DMatrix::identity(2, 2) * -1.0,
                SymMatrix::identity(2),
            )
            .unwrap(),
            CompoundPoissonSpec::new(1.0, 2, JumpLaw::IsotropicGaussian { sigma: 0.6 }).unwrap(),
            PsdMatrix::scaled_identity(2, 0.5).unwrap(),
        ),
    ];

    let mut detail = String::new();
    let mut all_ok = true;
    for (name, params, spec, y0) in &configs {
        let mut cs = Vec::new();
        let mut reps = Vec::new();
        for (i, &h) in hs.iter().enumerate() {
            let rep = dynkin_check(params, spec, y0, 1.0, h, n_paths, 40 + i as u64).unwrap();
            let c_h = (rep.discrepancy - 3.0 * rep.discrepancy_stderr).max(0.0) / h;
            cs.push(c_h);
            reps.push(rep);
        }
        // the fitted constant from the coarsest step must cover the finer
        // ones: O(h) decay, no blow-up as h shrinks
        let c_ref = cs[0].max(0.02);
        for (rep, &c_h) in reps.iter().zip(&cs) {
            let bound = 2.5 * c_ref * rep.h + 3.0 * rep.discrepancy_stderr;
            if rep.discrepancy > bound || c_h > 2.5 * c_ref {
                all_ok = false;
            }
        }
        detail.push_str(&format!(
            "{name}: C_h = [{:.3}, {:.3}, {:.3}]; ",
            cs[0], cs[1], cs[2]
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    detail.push_str(&format!("{elapsed:.1}s"));
    criterion(
        4,
        "Dynkin difference quotient",
        all_ok && elapsed <= 300.0,
        detail,
    );
}

/// Criterion 5: verdict flips of the four closed-form conditions sit
/// within one grid step of the analytic thresholds for the point-mass
/// family.
#[test]
fn acceptance_05_closed_form_thresholds() {
    let d = 2;
    let params = ModelParams::new(
        DMatrix::identity(d, d),
        DMatrix::identity(d, d) * -1.0,
        SymMatrix::identity(d),
    )
    .unwrap();
    let ctx = BsNormContext::new(params.b(), params.a()).unwrap();
    let spec_at = |rate: f64| {
        CompoundPoissonSpec::new(
            rate,
            d,
            JumpLaw::PointMasses {
                weights: vec![1.0],
                points: vec![vec![1.0, 0.0]],
            },
        )
        .unwrap()
    };

    // offset grid avoids exact threshold hits so verdicts stay binary
    let step = 0.05;
    let rates: Vec<f64> = (0..40).map(|i| 1.5 + step * (0.5 + i as f64)).collect();

    let mut all_ok = true;
    let mut detail = String::new();
    let cases: Vec<(&str, f64, Box<dyn Fn(f64) -> Verdict>)> = vec![
        (
            "log",
            2.0 / 2.0f64.ln(),
            Box::new(|r| {
                check_log_stationarity(&params, &spec_at(r), &ctx, 1, 0)
                    .unwrap()
                    .satisfied
            }),
        ),
        (
            "moment-k1",
            2.0,
            Box::new(|r| {
                check_moment_k(&params, &spec_at(r), &ctx, 1, 1, 0)
                    .unwrap()
                    .satisfied
            }),
        ),
        (
            "geom-p1",
            2.0,
            Box::new(|r| {
                check_geom_ergodicity(&params, &spec_at(r), 1.0, 1, 0)
                    .unwrap()
                    .satisfied
            }),
        ),
        (
            "small-p-half",
            1.0 / (2.0f64.sqrt() - 1.0),
            Box::new(|r| {
                check_geom_ergodicity_small_p(&params, &spec_at(r), 0.5, 1, 0)
                    .unwrap()
                    .satisfied
            }),
        ),
    ];

    for (name, threshold, eval) in &cases {
        let verdicts: Vec<Verdict> = rates.iter().map(|&r| eval(r)).collect();
        let flips = verdicts.windows(2).filter(|w| w[0] != w[1]).count();
        let last_yes = rates
            .iter()
            .zip(&verdicts)
            .filter(|(_, v)| **v == Verdict::Yes)
            .map(|(r, _)| *r)
            .fold(f64::NEG_INFINITY, f64::max);
        let first_no = rates
            .iter()
            .zip(&verdicts)
            .filter(|(_, v)| **v == Verdict::No)
            .map(|(r, _)| *r)
            .fold(f64::INFINITY, f64::min);
        let ok = flips == 1
            && last_yes < *threshold
            && *threshold < first_no
            && (first_no - last_yes) <= step + 1e-12;
        if !ok {
            all_ok = false;
        }
        detail.push_str(&format!(
            "{name}: flip in ({last_yes:.3}, {first_no:.3}) vs {threshold:.4}; "
        ));
    }
    criterion(5, "closed-form condition thresholds", all_ok, detail);
}

/// Criterion 6: over 200 random symmetric-B isotropic-law instances the
/// drift condition at p = 1 implies the first-order spectral condition,
/// and the moment condition at k = 2 implies it at k = 1.
#[test]
fn acceptance_06_implication_properties() {
    use rand::Rng;
    let mut geom_yes = 0usize;
    let mut k2_yes = 0usize;
    let mut contradictions = 0usize;
    for inst in 0..200u64 {
        let mut rng = rng_for(inst, "accept6", 0);
        let d = 2 + (inst % 2) as usize;
        let b = random_stable_symmetric(d, 0.2, 2.5, &mut rng);
        let a = DMatrix::from_fn(d, d, |_, _| {
            0.8 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let params = ModelParams::new(a, b, SymMatrix::identity(d)).unwrap();
        let (weights, points) = isotropic_atoms(d, 0.3 + rng.random::<f64>());
        let rate = 0.05 + 2.95 * rng.random::<f64>();
        let spec =
            CompoundPoissonSpec::new(rate, d, JumpLaw::PointMasses { weights, points }).unwrap();

        let geom = check_geom_ergodicity(&params, &spec, 1.0, 1, 0).unwrap();
        let first = check_first_order(&params, &spec, 1, 0).unwrap();
        if geom.satisfied == Verdict::Yes {
            geom_yes += 1;
            if first.satisfied == Verdict::No {
                contradictions += 1;
            }
        }

        let ctx = BsNormContext::new(params.b(), params.a()).unwrap();
        let m2 = check_moment_k(&params, &spec, &ctx, 2, 1, 0).unwrap();
        if m2.satisfied == Verdict::Yes {
            k2_yes += 1;
            let m1 = check_moment_k(&params, &spec, &ctx, 1, 1, 0).unwrap();
            if m1.satisfied != Verdict::Yes {
                contradictions += 1;
            }
        }
    }
    criterion(
        6,
        "implication properties (200 instances)",
        contradictions == 0 && geom_yes > 20 && k2_yes > 10,
        format!("{contradictions} contradictions, {geom_yes} drift-yes, {k2_yes} k2-yes"),
    );
}

/// Criterion 7: the drift-inequality scan finds a positive decay
/// constant with zero violations on closed-form configurations
/// satisfying the drift condition, and reports violations twice past
/// the threshold.
#[test]
fn acceptance_07_drift_inequality_scan() {
    let d = 2;
    let params = ModelParams::new(
        DMatrix::identity(d, d),
        DMatrix::identity(d, d) * -1.0,
        SymMatrix::identity(d),
    )
    .unwrap();
    let spec_at = |rate: f64| {
        CompoundPoissonSpec::new(
            rate,
            d,
            JumpLaw::PointMasses {
                weights: vec![1.0],
                points: vec![vec![1.0, 0.0]],
            },
        )
        .unwrap()
    };

    let mut all_ok = true;
    let mut detail = String::new();
    let mut last_c1 = f64::INFINITY;
    for rate in [0.4, 0.9, 1.4, 1.9] {
        let verdict = check_geom_ergodicity(&params, &spec_at(rate), 1.0, 1, 0)
            .unwrap()
            .satisfied;
        assert_eq!(verdict, Verdict::Yes);
        let (fit, _) =
            foster_lyapunov_scan(&params, &spec_at(rate), 1.0, 1e3, 10_000, 1, 5, true).unwrap();
        if fit.c1 <= 0.0 || fit.violations != 0 {
            all_ok = false;
        }
        // decay constant shrinks towards the threshold
        if fit.c1 > last_c1 + 1e-9 {
            all_ok = false;
        }
        last_c1 = fit.c1;
        detail.push_str(&format!("r={rate}: c1={:.3} e={:.2} k={}; ", fit.c1, fit.e, fit.k));
    }
    // twice past the threshold r* = 2
    let (fit, _) = foster_lyapunov_scan(&params, &spec_at(4.0), 1.0, 1e3, 10_000, 1, 5, false)
        .unwrap();
    if fit.violations == 0 || fit.c1 != 0.0 {
        all_ok = false;
    }
    detail.push_str(&format!("r=4: violations={}", fit.violations));
    criterion(7, "drift inequality scan", all_ok, detail);
}

/// Criterion 8: empirical E u(Y_t) stays below u(x) e^{c2 t} within the
/// Monte Carlo band on t in [0, 5] for the d = 2 Gaussian configuration.
#[test]
fn acceptance_08_exponential_moment_bound() {
    let params = ModelParams::new(
        DMatrix::identity(2, 2) * 0.4,
        DMatrix::identity(2, 2) * -1.0,
        SymMatrix::identity(2),
    )
    .unwrap();
    let spec =
        CompoundPoissonSpec::new(1.0, 2, JumpLaw::IsotropicGaussian { sigma: 0.5 }).unwrap();
    let y0 = PsdMatrix::identity(2);
    let t_grid = lin_grid(0.5, 5.0, 9);
    let rep = gronwall_check(&params, &spec, &y0, 1.0, &t_grid, 10_000, 3).unwrap();
    criterion(
        8,
        "exponential moment bound",
        rep.within_bound,
        format!("max ratio = {:.4}, c2 = {:.3}", rep.max_ratio, rep.bound_constants.c2),
    );
}

/// Criterion 9: rank-probe frequencies: 0 below the dimension, 1.0 at
/// the dimension with an invertible A and Gaussian jumps, 0 for a
/// rank-deficient A.
#[test]
fn acceptance_09_rank_probe() {
    let mut all_ok = true;
    let mut detail = String::new();
    for d in [2usize, 3] {
        let params = ModelParams::new(
            DMatrix::identity(d, d),
            DMatrix::identity(d, d) * -1.0,
            SymMatrix::identity(d),
        )
        .unwrap();
        let spec =
            CompoundPoissonSpec::new(1.0, d, JumpLaw::IsotropicGaussian { sigma: 1.0 }).unwrap();
        let y0 = PsdMatrix::zeros(d);
        for l in 1..d {
            let rep = irreducibility_rank_probe(&params, &spec, &y0, l, 10_000, 0, true).unwrap();
            if rep.frequency != 0.0 {
                all_ok = false;
            }
            detail.push_str(&format!("d{d} l{l}: {}; ", rep.frequency));
        }
        let rep = irreducibility_rank_probe(&params, &spec, &y0, d, 10_000, 0, true).unwrap();
        if rep.frequency != 1.0 {
            all_ok = false;
        }
        detail.push_str(&format!("d{d} l{d}: {}; ", rep.frequency));
    }
    // rank-deficient A
    let mut a = DMatrix::zeros(2, 2);
    a[(0, 0)] = 1.0;
    let params = ModelParams::new(
        a,
        DMatrix::identity(2, 2) * -1.0,
        SymMatrix::identity(2),
    )
    .unwrap();
    let spec =
        CompoundPoissonSpec::new(1.0, 2, JumpLaw::IsotropicGaussian { sigma: 1.0 }).unwrap();
    let rep =
        irreducibility_rank_probe(&params, &spec, &PsdMatrix::zeros(2), 2, 10_000, 0, false)
            .unwrap();
    if rep.frequency != 0.0 {
        all_ok = false;
    }
    detail.push_str(&format!("singular A: {}", rep.frequency));
    criterion(9, "irreducibility rank probe", all_ok, detail);
}

/// Criterion 10: on a condition-satisfying d = 2 configuration the
/// synchronous-coupling slope is negative with a clean fit, multi-start
/// KS statistics fall below the 0.01 critical value at a long horizon,
/// and equal 1 at horizon zero.
#[test]
fn acceptance_10_ergodicity_diagnostics() {
    let params = ModelParams::new(
        DMatrix::identity(2, 2) * 0.4,
        DMatrix::identity(2, 2) * -1.0,
        SymMatrix::identity(2),
    )
    .unwrap();
    let spec =
        CompoundPoissonSpec::new(1.0, 2, JumpLaw::IsotropicGaussian { sigma: 0.5 }).unwrap();
    let verdict = check_geom_ergodicity(&params, &spec, 1.0, 50_000, 0)
        .unwrap()
        .satisfied;
    assert_eq!(verdict, Verdict::Yes);

    // horizon 20 / |m_B| with m_B = -2
    let horizon = 10.0;
    let mut rng = rng_for(2, "accept10", 0);
    let mid = random_psd(2, 0.0, &mut rng);
    let mid = PsdMatrix::try_new(
        SymMatrix::symmetrized(&(mid.matrix() * (0.5 / mid.spectral_norm()))).unwrap(),
    )
    .unwrap();

    let coupling_cfg = ExperimentConfig {
        params: params.clone(),
        spec: spec.clone(),
        p: 1.0,
        initial_states: vec![
            PsdMatrix::scaled_identity(2, 0.05).unwrap(),
            PsdMatrix::scaled_identity(2, 5.0).unwrap(),
        ],
        horizon,
        burn_in: None,
        grid: lin_grid(0.0, horizon, 40),
        n_paths: 200,
        seed: 11,
    };
    let coupling = coupling_experiment(&coupling_cfg).unwrap();

    let multi_cfg = ExperimentConfig {
        params: params.clone(),
        spec: spec.clone(),
        p: 1.0,
        initial_states: vec![
            PsdMatrix::scaled_identity(2, 0.05).unwrap(),
            mid.clone(),
            PsdMatrix::scaled_identity(2, 5.0).unwrap(),
        ],
        horizon,
        burn_in: Some(0.0),
        grid: vec![],
        n_paths: 2000,
        seed: 12,
    };
    let multi = multi_start_convergence(&multi_cfg).unwrap();

    let control_cfg = ExperimentConfig {
        horizon: 0.0,
        ..multi_cfg.clone()
    };
    let control = multi_start_convergence(&control_cfg).unwrap();

    let ok = coupling.slope < 0.0
        && coupling.r_squared > 0.9
        && multi.max_ks < multi.critical_001
        && control.max_ks == 1.0;
    criterion(
        10,
        "ergodicity diagnostics",
        ok,
        format!(
            "slope = {:.3} (R2 = {:.3}), max KS = {:.4} < {:.4}, control KS = {}",
            coupling.slope, coupling.r_squared, multi.max_ks, multi.critical_001, control.max_ks
        ),
    );
}

//! Desk-scale empirical experiments for the ergodic behaviour of the
//! volatility process: synchronous-coupling decay, stationary moment
//! estimation, multi-start convergence, the rank mechanics behind
//! irreducibility and the no-jump contraction behind aperiodicity.
//!
//! Total-variation distances are not estimable from samples, so
//! convergence diagnostics use Kolmogorov-Smirnov statistics on
//! one-dimensional functionals. They are proxies and labelled as such in
//! every report.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::levy::{sample_jump_train, sample_spaced_train, CompoundPoissonSpec};
use crate::matcore::{mat_exp, numerical_range_max, spectral_norm, PsdMatrix, SymMatrix};
use crate::process::{simulate_with_train, ModelParams};
use crate::seeding::{child_seed, rng_for};
use rand::Rng;
use rand_distr::StandardNormal;

/// Shared setup for the path-ensemble experiments.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub spec: CompoundPoissonSpec,
    pub p: f64,
    pub initial_states: Vec<PsdMatrix>,
    pub horizon: f64,
    /// Defaults to `10 / |m_B|` when unset (the drift rate sets the
    /// relaxation scale).
    pub burn_in: Option<f64>,
    pub grid: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spec.dim() != self.params.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.params.dim(),
                got: self.spec.dim(),
            });
        }
        if self.initial_states.is_empty() {
            return Err(CoreError::InvalidParam(
                "at least one initial state is required".into(),
            ));
        }
        for y0 in &self.initial_states {
            if y0.dim() != self.params.dim() {
                return Err(CoreError::DimensionMismatch {
                    expected: self.params.dim(),
                    got: y0.dim(),
                });
            }
        }
        if self.n_paths == 0 {
            return Err(CoreError::InvalidParam("need at least one path".into()));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self
            .grid
            .iter()
            .any(|&t| !(t >= 0.0) || t > self.horizon)
        {
            return Err(CoreError::InvalidParam(
                "grid times must lie in [0, horizon]".into(),
            ));
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0) {
                return Err(CoreError::InvalidParam(format!(
                    "burn-in must be nonnegative, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Effective burn-in: explicit value or `10 / |m_B|`.
    pub fn effective_burn_in(&self) -> f64 {
        self.burn_in.unwrap_or_else(|| {
            let m_b = numerical_range_max(self.params.b());
            if m_b < 0.0 {
                10.0 / m_b.abs()
            } else {
                0.0
            }
        })
    }

    fn sorted_grid(&self) -> Vec<f64> {
        let mut g = self.grid.clone();
        g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        g
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Least-squares slope of `log E |Y^x_t - Y^y_t|_F` over the
    /// post-burn-in grid. A convergence diagnostic, not an estimate of
    /// the ergodicity rate.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_pairs: usize,
    pub n_paths: usize,
    pub rows: Vec<(f64, f64)>,
}

/// Runs pairs of paths from different initial states against identical
/// jump trains and fits the decay of the mean Frobenius difference.
pub fn coupling_experiment(cfg: &ExperimentConfig) -> Result<CouplingReport> {
    cfg.validate()?;
    if cfg.initial_states.len() < 2 {
        return Err(CoreError::InvalidParam(
            "coupling needs at least two initial states".into(),
        ));
    }
    let grid = cfg.sorted_grid();
    if grid.is_empty() {
        return Err(CoreError::InvalidParam("grid must be non-empty".into()));
    }
    let burn_in = cfg.effective_burn_in();
    if grid.iter().filter(|&&t| t >= burn_in).count() < 2 {
        return Err(CoreError::InvalidParam(
            "need at least two post-burn-in grid points for the fit".into(),
        ));
    }

    let mut pairs = Vec::new();
    for i in 0..cfg.initial_states.len() {
        for j in (i + 1)..cfg.initial_states.len() {
            pairs.push((i, j));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|pi| (0..cfg.n_paths).map(move |k| (pi, k)))
        .collect();
    let diffs: Vec<Vec<f64>> = jobs
        .into_par_iter()
        .map(|(pi, k)| -> Result<Vec<f64>> {
            let (i, j) = pairs[pi];
            let seed = child_seed(cfg.seed, "coupling", (pi * cfg.n_paths + k) as u64);
            let train = sample_jump_train(&cfg.spec, cfg.horizon, seed)?;
            let a = simulate_with_train(
                &cfg.params,
                &train,
                &cfg.initial_states[i],
                &grid,
                false,
            )?;
            let b = simulate_with_train(
                &cfg.params,
                &train,
                &cfg.initial_states[j],
                &grid,
                false,
            )?;
            Ok(a.grid_points()
                .zip(b.grid_points())
                .map(|(pa, pb)| (&pa.y - &pb.y).norm())
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let n_jobs = diffs.len() as f64;
    let mut rows = Vec::with_capacity(grid.len());
    for (gi, &t) in grid.iter().enumerate() {
        let mean = diffs.iter().map(|d| d[gi]).sum::<f64>() / n_jobs;
        rows.push((t, mean));
    }

    // least squares of log mean difference against time, post burn-in
    let fit_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(t, m)| *t >= burn_in && *m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .collect();
    if fit_pts.len() < 2 {
        return Err(CoreError::InvalidParam(
            "coupled paths coincide exactly; nothing to fit".into(),
        ));
    }
    let n = fit_pts.len() as f64;
    let tbar = fit_pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ybar = fit_pts.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx = fit_pts.iter().map(|(t, _)| (t - tbar) * (t - tbar)).sum::<f64>();
    let sxy = fit_pts
        .iter()
        .map(|(t, y)| (t - tbar) * (y - ybar))
        .sum::<f64>();
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let ss_tot = fit_pts.iter().map(|(_, y)| (y - ybar) * (y - ybar)).sum::<f64>();
    let ss_res = fit_pts
        .iter()
        .map(|(t, y)| {
            let e = y - (intercept + slope * t);
            e * e
        })
        .sum::<f64>();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(CouplingReport {
        slope,
        intercept,
        r_squared,
        n_pairs: pairs.len(),
        n_paths: cfg.n_paths,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// "across_paths" when several paths average, "batch_means" for a
    /// single long path.
    pub method: String,
    /// Running pooled time-average per post-burn-in grid time.
    pub trace: Vec<(f64, f64)>,
}

/// Long-run time-average of the spectral-norm moment `|Y_t|_2^p`.
pub fn stationary_moment_estimate(cfg: &ExperimentConfig) -> Result<MomentReport> {
    cfg.validate()?;
    let grid = cfg.sorted_grid();
    let burn_in = cfg.effective_burn_in();
    let sample_idx: Vec<usize> = grid
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= burn_in)
        .map(|(i, _)| i)
        .collect();
    if sample_idx.is_empty() {
        return Err(CoreError::InvalidParam(
            "no grid points past the burn-in".into(),
        ));
    }
    let y0 = &cfg.initial_states[0];

    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let train = sample_jump_train(
                &cfg.spec,
                cfg.horizon,
                child_seed(cfg.seed, "moments", k as u64),
            )?;
            let rec = simulate_with_train(&cfg.params, &train, y0, &grid, false)?;
            let vals: Vec<f64> = rec
                .grid_points()
                .map(|pt| {
                    SymMatrix::symmetrized(&pt.y)
                        .expect("square state")
                        .spectral_norm()
                        .powf(cfg.p)
                })
                .collect();
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;

    let path_means: Vec<f64> = per_path
        .iter()
        .map(|vals| sample_idx.iter().map(|&i| vals[i]).sum::<f64>() / sample_idx.len() as f64)
        .collect();
    let estimate = path_means.iter().sum::<f64>() / path_means.len() as f64;

    let (stderr, method) = if path_means.len() >= 2 {
        let n = path_means.len() as f64;
        let var = path_means
            .iter()
            .map(|m| (m - estimate) * (m - estimate))
            .sum::<f64>()
            / (n - 1.0)
            / n;
        (var.sqrt(), "across_paths".to_string())
    } else {
        // batch means over the single path
        let vals: Vec<f64> = sample_idx.iter().map(|&i| per_path[0][i]).collect();
        let b = (vals.len() as f64).sqrt().floor().max(2.0) as usize;
        let batch_len = vals.len() / b;
        let mut means = Vec::with_capacity(b);
        for bi in 0..b {
            let chunk = &vals[bi * batch_len..(bi + 1) * batch_len];
            means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
        }
        let mb = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|m| (m - mb) * (m - mb)).sum::<f64>() / (b as f64 - 1.0)
            / b as f64;
        (var.sqrt(), "batch_means".to_string())
    };

    let mut trace = Vec::with_capacity(sample_idx.len());
    let mut acc = 0.0;
    for (count, &gi) in sample_idx.iter().enumerate() {
        let pooled = per_path.iter().map(|v| v[gi]).sum::<f64>() / per_path.len() as f64;
        acc += pooled;
        trace.push((grid[gi], acc / (count as f64 + 1.0)));
    }

    Ok(MomentReport {
        p: cfg.p,
        estimate,
        stderr,
        method,
        trace,
    })
}

/// Ensemble average of `|Y_T|_2^p` over independent paths at the terminal
/// time (the cross-check estimator for the time average).
pub fn ensemble_moment(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let y0 = &cfg.initial_states[0];
    let grid = [cfg.horizon];
    let vals: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let train = sample_jump_train(
                &cfg.spec,
                cfg.horizon,
                child_seed(cfg.seed, "ensemble", k as u64),
            )?;
            let rec = simulate_with_train(&cfg.params, &train, y0, &grid, false)?;
            let pt = rec.grid_points().last().expect("one grid point");
            Ok(SymMatrix::symmetrized(&pt.y)
                .expect("square state")
                .spectral_norm()
                .powf(cfg.p))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0) / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsRow {
    pub start_a: usize,
    pub start_b: usize,
    pub functional: String,
    pub statistic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiStartReport {
    /// Largest two-sample KS statistic over start pairs and functionals.
    /// A proxy for distributional distance, not a TV estimate.
    pub max_ks: f64,
    /// Asymptotic two-sample critical value at the 0.01 level.
    pub critical_001: f64,
    pub n_paths: usize,
    pub rows: Vec<KsRow>,
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Content tag of an initial state, so the noise driving a start depends
/// on the state itself and not on its position in the list. Permuting
/// the start labels therefore permutes the per-pair statistics without
/// changing them.
fn state_tag(y: &PsdMatrix) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for v in y.matrix().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Compares terminal-time empirical laws of `(|Y|_2, tr Y, lambda_min Y)`
/// across initial states with independent driving noise per start.
pub fn multi_start_convergence(cfg: &ExperimentConfig) -> Result<MultiStartReport> {
    cfg.validate()?;
    if cfg.initial_states.len() < 3 {
        return Err(CoreError::InvalidParam(
            "multi-start comparison needs at least three initial states".into(),
        ));
    }
    let n_starts = cfg.initial_states.len();
    let tags: Vec<u64> = cfg.initial_states.iter().map(state_tag).collect();

    let jobs: Vec<(usize, usize)> = (0..n_starts)
        .flat_map(|i| (0..cfg.n_paths).map(move |k| (i, k)))
        .collect();
    let samples: Vec<[f64; 3]> = jobs
        .into_par_iter()
        .map(|(i, k)| -> Result<[f64; 3]> {
            let y_t = if cfg.horizon == 0.0 {
                cfg.initial_states[i].matrix().clone()
            } else {
                let train = sample_jump_train(
                    &cfg.spec,
                    cfg.horizon,
                    child_seed(child_seed(cfg.seed, "multistart", tags[i]), "path", k as u64),
                )?;
                let rec = simulate_with_train(
                    &cfg.params,
                    &train,
                    &cfg.initial_states[i],
                    &[cfg.horizon],
                    false,
                )?;
                rec.grid_points().last().expect("one grid point").y.clone()
            };
            let sym = SymMatrix::symmetrized(&y_t)?;
            let ev = sym.eigenvalues();
            Ok([ev[ev.len() - 1].max(-ev[0]), y_t.trace(), ev[0]])
        })
        .collect::<Result<Vec<_>>>()?;

    let functional_names = ["spectral_norm", "trace", "min_eigenvalue"];
    let mut rows = Vec::new();
    let mut max_ks = 0.0f64;
    for i in 0..n_starts {
        for j in (i + 1)..n_starts {
            for (fi, name) in functional_names.iter().enumerate() {
                let mut a: Vec<f64> = (0..cfg.n_paths)
                    .map(|k| samples[i * cfg.n_paths + k][fi])
                    .collect();
                let mut b: Vec<f64> = (0..cfg.n_paths)
                    .map(|k| samples[j * cfg.n_paths + k][fi])
                    .collect();
                let stat = ks_statistic(&mut a, &mut b);
                max_ks = max_ks.max(stat);
                rows.push(KsRow {
                    start_a: i,
                    start_b: j,
                    functional: name.to_string(),
                    statistic: stat,
                });
            }
        }
    }

    // c(0.01) = sqrt(ln(2/0.01) / 2)
    let c = (2.0f64 / 0.01).ln() / 2.0;
    let n = cfg.n_paths as f64;
    let critical_001 = c.sqrt() * (2.0 / n).sqrt();
    Ok(MultiStartReport {
        max_ks,
        critical_001,
        n_paths: cfg.n_paths,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankProbeReport {
    pub l: usize,
    pub n_trials: usize,
    /// Fraction of trials where the jump-accumulated part of the state
    /// reached full rank.
    pub frequency: f64,
}

/// Simulates exactly `l` jumps (one per unit interval) and measures how
/// often `Y_{t_l} - e^{B t_l} Y_0 e^{B^T t_l}` has full rank.
///
/// The jump law must be absolutely continuous. With `enforce_invertible`
/// a numerically singular `A` is rejected; pass `false` to probe
/// rank-deficient `A` (the full-rank frequency is then 0).
#[allow(clippy::too_many_arguments)]
pub fn irreducibility_rank_probe(
    params: &ModelParams,
    spec: &CompoundPoissonSpec,
    y0: &PsdMatrix,
    l: usize,
    n_trials: usize,
    seed: u64,
    enforce_invertible: bool,
) -> Result<RankProbeReport> {
    if spec.dim() != params.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim(),
            got: spec.dim(),
        });
    }
    if !spec.is_absolutely_continuous() {
        return Err(CoreError::InvalidParam(
            "rank probe requires an absolutely continuous jump law".into(),
        ));
    }
    if l == 0 || n_trials == 0 {
        return Err(CoreError::InvalidParam(
            "need at least one jump and one trial".into(),
        ));
    }
    let svals = params.a().clone().svd(false, false).singular_values;
    let smax = svals.iter().fold(0.0f64, |m, &v| m.max(v));
    let smin = svals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if enforce_invertible && ratio <= 1e-12 {
        return Err(CoreError::SingularMatrix { ratio });
    }

    let interval = 1.0;
    let t_l = l as f64 * interval;
    let decay = mat_exp(params.b(), t_l)?;
    let flowed_y0 = &decay * y0.matrix() * decay.transpose();

    let hits: usize = (0..n_trials)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let train = sample_spaced_train(
                spec,
                l,
                interval,
                child_seed(seed, "rank-probe", trial as u64),
            )?;
            let rec = simulate_with_train(params, &train, y0, &[t_l], false)?;
            let y_tl = &rec.grid_points().last().expect("one grid point").y;
            let gamma = SymMatrix::symmetrized(&(y_tl - &flowed_y0))?;
            let ev = gamma.eigenvalues();
            let norm2 = ev.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let full_rank = norm2 > 0.0 && ev[0] > 1e-12 * norm2;
            Ok(usize::from(full_rank))
        })
        .collect::<Result<Vec<usize>>>()?
        .iter()
        .sum();

    Ok(RankProbeReport {
        l,
        n_trials,
        frequency: hits as f64 / n_trials as f64,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AperiodicityReport {
    /// Fitted transient constant with `|e^{Bt}|_2 <= c_bar e^{-delta t}`.
    pub c_bar: f64,
    pub delta: f64,
    /// Earliest time after which the no-jump flow provably keeps
    /// `|x|_2 <= k_bound` states inside the ball: `ln(c_bar^2) / (2 delta)`.
    pub return_time: f64,
    pub k_bound: f64,
    pub violations: usize,
    pub n_states: usize,
    /// `(t, |e^{Bt}|_2, c_bar e^{-delta t})` along the grid.
    pub rows: Vec<(f64, f64, f64)>,
}

const APERIODICITY_SEED: u64 = 0x6170_6572;

/// Computes decay constants for the no-jump flow and verifies that states
/// with `|x|_2 <= k_bound` return to the ball past the bound time.
pub fn aperiodicity_flow_check(
    params: &ModelParams,
    k_bound: f64,
    t_grid: &[f64],
) -> Result<AperiodicityReport> {
    if !(k_bound > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "ball radius must be positive, got {k_bound}"
        )));
    }
    if t_grid.is_empty() {
        return Err(CoreError::InvalidParam("time grid must be non-empty".into()));
    }
    let lambda = params.b_spectral_abscissa();
    if lambda >= 0.0 {
        return Err(CoreError::UnstableDrift { lambda });
    }
    // strictly inside the spectral abscissa so the transient envelope is
    // bounded even for non-normal B
    let delta = 0.9 * lambda.abs();

    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    if grid[0] > 0.0 {
        grid.insert(0, 0.0);
    }

    let mut c_bar = 1.0f64;
    let mut rows = Vec::with_capacity(grid.len());
    let mut flow_norms = Vec::with_capacity(grid.len());
    for &t in &grid {
        let e = mat_exp(params.b(), t)?;
        let norm = spectral_norm(&e);
        flow_norms.push(norm);
        c_bar = c_bar.max(norm * (delta * t).exp());
    }
    for (&t, &norm) in grid.iter().zip(&flow_norms) {
        rows.push((t, norm, c_bar * (-delta * t).exp()));
    }

    // the quadratic flow x -> e^{Bt} x e^{B^T t} contracts with constant
    // c_bar^2, so the return bound is ln(c_bar^2) / (2 delta)
    let return_time = (c_bar * c_bar).ln() / (2.0 * delta);

    let d = params.dim();
    let mut rng = rng_for(APERIODICITY_SEED, "aperiodicity-states", 0);
    let mut states: Vec<DMatrix<f64>> = Vec::new();
    states.push(DMatrix::identity(d, d) * k_bound);
    for i in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(i, i)] = k_bound;
        states.push(m);
    }
    for _ in 0..64 {
        let mut w = DMatrix::<f64>::zeros(d, d);
        for _ in 0..d {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            w += &g * g.transpose();
        }
        let sn = SymMatrix::symmetrized(&w)?.spectral_norm();
        if sn > 0.0 {
            states.push(w * (k_bound / sn));
        }
    }

    let mut violations = 0usize;
    for &t in grid.iter().filter(|&&t| t >= return_time) {
        let e = mat_exp(params.b(), t)?;
        for x in &states {
            let moved = &e * x * e.transpose();
            let sn = SymMatrix::symmetrized(&moved)?.spectral_norm();
            if sn > k_bound * (1.0 + 1e-10) {
                violations += 1;
            }
        }
    }

    Ok(AperiodicityReport {
        c_bar,
        delta,
        return_time,
        k_bound,
        violations,
        n_states: states.len(),
        rows,
    })
}

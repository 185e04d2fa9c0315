//! Exact event-driven simulation of the volatility process.
//!
//! Between jumps the state follows the closed-form linear matrix flow
//! `Y -> e^{B dt} Y e^{B^T dt}`; at a jump with size `x` it gains the
//! rank-one PSD increment `w w^T` with `w = A (C + Y)^{1/2} x`. There is
//! no time discretization anywhere, so every recorded state is exact up
//! to floating-point rounding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::levy::{sample_jump_train, CompoundPoissonSpec, JumpTrain};
use crate::matcore::{mat_exp, spectral_abscissa, PsdMatrix, SymMatrix};

/// Model matrices: jump shape `A`, mean reversion `B` and the positive
/// definite floor `C` of the covariance `V = C + Y`.
#[derive(Debug, Clone)]
pub struct ModelParams {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: PsdMatrix,
    b_abscissa: f64,
}

impl ModelParams {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: SymMatrix) -> Result<Self> {
        let d = c.dim();
        for (m, name) in [(&a, "A"), (&b, "B")] {
            if m.nrows() != d || m.ncols() != d {
                return Err(CoreError::InvalidParam(format!(
                    "{name} must be {d}x{d}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let c = PsdMatrix::try_new_positive_definite(c)?;
        let b_abscissa = spectral_abscissa(&b);
        Ok(Self {
            a,
            b,
            c,
            b_abscissa,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &PsdMatrix {
        &self.c
    }

    /// Largest real part over the spectrum of `B`.
    pub fn b_spectral_abscissa(&self) -> f64 {
        self.b_abscissa
    }

    /// Whether `B` has its spectrum in the open left half-plane. The
    /// simulator itself accepts any `B`; the stationarity and ergodicity
    /// conditions require this flag.
    pub fn is_mean_reverting(&self) -> bool {
        self.b_abscissa < 0.0
    }
}

/// Volatility state at a point in time.
#[derive(Debug, Clone)]
pub struct VolState {
    pub t: f64,
    pub y: PsdMatrix,
}

/// What a skeleton row records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Grid,
    PreJump,
    PostJump,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Grid => "grid",
            EventKind::PreJump => "pre_jump",
            EventKind::PostJump => "post_jump",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonPoint {
    pub t: f64,
    pub kind: EventKind,
    pub y: DMatrix<f64>,
}

/// Full log of one simulated path: the driving train, the state at every
/// grid time and on both sides of every jump, and optionally the
/// accumulated log-price increments.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub params: ModelParams,
    pub y0: DMatrix<f64>,
    pub train: JumpTrain,
    pub skeleton: Vec<SkeletonPoint>,
    pub log_price: Option<Vec<(f64, DVector<f64>)>>,
}

impl PathRecord {
    pub fn grid_points(&self) -> impl Iterator<Item = &SkeletonPoint> {
        self.skeleton
            .iter()
            .filter(|p| p.kind == EventKind::Grid)
    }

    /// Largest Frobenius norm over the recorded skeleton.
    pub fn max_frobenius(&self) -> f64 {
        self.skeleton
            .iter()
            .map(|p| p.y.norm())
            .fold(0.0, f64::max)
    }

    /// CSV with one row per skeleton point: time, event type, then the
    /// d(d+1)/2 upper-triangle entries of Y in row-major order.
    pub fn to_csv(&self) -> String {
        let d = self.params.dim();
        let mut out = String::from("time,event_type");
        for i in 0..d {
            for j in i..d {
                out.push_str(&format!(",y_{i}_{j}"));
            }
        }
        out.push('\n');
        for p in &self.skeleton {
            out.push_str(&format!("{},{}", p.t, p.kind.as_str()));
            for i in 0..d {
                for j in i..d {
                    out.push_str(&format!(",{}", p.y[(i, j)]));
                }
            }
            out.push('\n');
        }
        out
    }

    /// JSON event log including the jump marks.
    pub fn to_event_json(&self) -> serde_json::Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        let mut jumps = Vec::new();
        let mut pre_iter = self
            .skeleton
            .iter()
            .filter(|p| p.kind == EventKind::PreJump);
        let mut post_iter = self
            .skeleton
            .iter()
            .filter(|p| p.kind == EventKind::PostJump);
        for (t, mark) in self.train.times.iter().zip(&self.train.marks) {
            let pre = pre_iter.next().expect("one pre-jump row per jump");
            let post = post_iter.next().expect("one post-jump row per jump");
            jumps.push(serde_json::json!({
                "time": t,
                "mark": mark.as_slice(),
                "y_pre": rows(&pre.y),
                "y_post": rows(&post.y),
            }));
        }
        let grid: Vec<serde_json::Value> = self
            .grid_points()
            .map(|p| serde_json::json!({ "time": p.t, "y": rows(&p.y) }))
            .collect();
        let mut doc = serde_json::json!({
            "dim": self.params.dim(),
            "horizon": self.train.horizon,
            "y0": rows(&self.y0),
            "jumps": jumps,
            "grid": grid,
        });
        if let Some(g) = &self.log_price {
            doc["log_price"] = serde_json::Value::Array(
                g.iter()
                    .map(|(t, v)| serde_json::json!({ "time": t, "g": v.as_slice() }))
                    .collect(),
            );
        }
        doc
    }
}

/// Closed-form inter-jump evolution `e^{B dt} Y e^{B^T dt}`.
pub fn flow(params: &ModelParams, y: &PsdMatrix, dt: f64) -> Result<PsdMatrix> {
    if dt < 0.0 {
        return Err(CoreError::InvalidParam(format!(
            "flow time must be nonnegative, got {dt}"
        )));
    }
    if dt == 0.0 {
        return Ok(y.clone());
    }
    let e = mat_exp(params.b(), dt)?;
    let m = &e * y.matrix() * e.transpose();
    let sym = SymMatrix::symmetrized(&m)?;
    PsdMatrix::try_new(sym).map_err(|e| {
        CoreError::InternalDefect(format!("flow left the PSD cone: {e}"))
    })
}

/// Jump update `Y + w w^T` with `w = A (C + Y)^{1/2} x`.
pub fn apply_jump(params: &ModelParams, y: &PsdMatrix, x: &DVector<f64>) -> Result<PsdMatrix> {
    let w = jump_direction(params, y, x)?;
    let m = y.matrix() + &w * w.transpose();
    let sym = SymMatrix::symmetrized(&m)?;
    PsdMatrix::try_new(sym).map_err(|e| {
        CoreError::InternalDefect(format!("jump left the PSD cone: {e}"))
    })
}

/// The rank-one jump direction `w = A (C + Y)^{1/2} x`.
pub fn jump_direction(
    params: &ModelParams,
    y: &PsdMatrix,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x.len() != params.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    let v = covariance(params, y)?;
    Ok(params.a() * v.sqrt().matrix() * x)
}

/// The covariance `V = C + Y` as a PSD matrix.
pub fn covariance(params: &ModelParams, y: &PsdMatrix) -> Result<PsdMatrix> {
    let m = params.c().matrix() + y.matrix();
    let sym = SymMatrix::symmetrized(&m)?;
    PsdMatrix::try_new(sym)
        .map_err(|e| CoreError::InternalDefect(format!("covariance not PSD: {e}")))
}

enum PathEvent {
    Jump(usize),
    Grid,
}

/// Runs the exact scheme against a given jump train.
///
/// Records the state at every grid time and immediately before and after
/// every jump. With `with_price` the log-price increments
/// `(C + Y_{t-})^{1/2} x` are accumulated and sampled at grid times and
/// after each jump.
pub fn simulate_with_train(
    params: &ModelParams,
    train: &JumpTrain,
    y0: &PsdMatrix,
    grid: &[f64],
    with_price: bool,
) -> Result<PathRecord> {
    if y0.dim() != params.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim(),
            got: y0.dim(),
        });
    }
    let mut grid_sorted: Vec<f64> = grid.to_vec();
    grid_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite grid times"));
    if grid_sorted
        .iter()
        .any(|&t| t < 0.0 || t > train.horizon || !t.is_finite())
    {
        return Err(CoreError::InvalidParam(
            "grid times must lie in [0, horizon]".into(),
        ));
    }

    // merge jumps and grid times; at equal times the jump is applied
    // first so grid rows record the right-continuous state
    let mut events: Vec<(f64, PathEvent)> = Vec::with_capacity(train.len() + grid_sorted.len());
    for (k, &t) in train.times.iter().enumerate() {
        events.push((t, PathEvent::Jump(k)));
    }
    for &t in &grid_sorted {
        events.push((t, PathEvent::Grid));
    }
    events.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite event times")
            .then_with(|| {
                let rank = |e: &PathEvent| match e {
                    PathEvent::Jump(_) => 0u8,
                    PathEvent::Grid => 1u8,
                };
                rank(&a.1).cmp(&rank(&b.1))
            })
    });

    let mut state = VolState {
        t: 0.0,
        y: y0.clone(),
    };
    let mut price = DVector::zeros(params.dim());
    let mut skeleton = Vec::with_capacity(events.len() + train.len());
    let mut price_samples = if with_price { Some(Vec::new()) } else { None };

    for (t, ev) in events {
        if t > state.t {
            state.y = flow(params, &state.y, t - state.t)?;
            state.t = t;
        }
        match ev {
            PathEvent::Jump(k) => {
                skeleton.push(SkeletonPoint {
                    t,
                    kind: EventKind::PreJump,
                    y: state.y.matrix().clone(),
                });
                if let Some(samples) = price_samples.as_mut() {
                    let dg = covariance(params, &state.y)?.sqrt().matrix() * &train.marks[k];
                    price += dg;
                    samples.push((t, price.clone()));
                }
                state.y = apply_jump(params, &state.y, &train.marks[k])?;
                skeleton.push(SkeletonPoint {
                    t,
                    kind: EventKind::PostJump,
                    y: state.y.matrix().clone(),
                });
            }
            PathEvent::Grid => {
                skeleton.push(SkeletonPoint {
                    t,
                    kind: EventKind::Grid,
                    y: state.y.matrix().clone(),
                });
                if let Some(samples) = price_samples.as_mut() {
                    samples.push((t, price.clone()));
                }
            }
        }
    }

    Ok(PathRecord {
        params: params.clone(),
        y0: y0.matrix().clone(),
        train: train.clone(),
        skeleton,
        log_price: price_samples,
    })
}

/// Samples a jump train and runs the exact scheme; deterministic in
/// `(params, spec, y0, grid, seed)`.
pub fn simulate_path(
    params: &ModelParams,
    spec: &CompoundPoissonSpec,
    y0: &PsdMatrix,
    horizon: f64,
    grid: &[f64],
    seed: u64,
    with_price: bool,
) -> Result<PathRecord> {
    if spec.dim() != params.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim(),
            got: spec.dim(),
        });
    }
    let train = sample_jump_train(spec, horizon, seed)?;
    simulate_with_train(params, &train, y0, grid, with_price)
}

/// Recomputes the state at every grid time from the integral
/// representation
/// `Y_t = e^{Bt} Y_0 e^{B^T t} + sum_{tau_i <= t} e^{B(t-tau_i)} w_i w_i^T e^{B^T(t-tau_i)}`
/// using the logged pre-jump states, and returns the largest Frobenius
/// discrepancy against the simulated skeleton.
pub fn reconstruct_path(record: &PathRecord) -> Result<f64> {
    let params = &record.params;
    let pre_states: Vec<&SkeletonPoint> = record
        .skeleton
        .iter()
        .filter(|p| p.kind == EventKind::PreJump)
        .collect();
    if pre_states.len() != record.train.len() {
        return Err(CoreError::InvalidParam(
            "record is incomplete: one pre-jump state per jump is required".into(),
        ));
    }

    // jump directions from the logged left limits
    let mut directions = Vec::with_capacity(record.train.len());
    for (p, x) in pre_states.iter().zip(&record.train.marks) {
        let y = PsdMatrix::try_new(SymMatrix::symmetrized(&p.y)?)?;
        directions.push(jump_direction(params, &y, x)?);
    }

    let mut max_err = 0.0f64;
    for point in record.grid_points() {
        let t = point.t;
        let e0 = mat_exp(params.b(), t)?;
        let mut rec = &e0 * &record.y0 * e0.transpose();
        for ((tau, _), w) in record
            .train
            .times
            .iter()
            .zip(&record.train.marks)
            .zip(&directions)
        {
            if *tau <= t {
                let e = mat_exp(params.b(), t - tau)?;
                let ew = &e * w;
                rec += &ew * ew.transpose();
            }
        }
        let err = (&rec - &point.y).norm();
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

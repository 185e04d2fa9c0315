//! Task execution: binds a parsed config to the core operations and
//! packages results.json plus the per-task CSV artifacts.

use mucogarch_core::conditions::{
    check_first_order, check_geom_ergodicity, check_geom_ergodicity_small_p,
    check_log_stationarity, check_moment_k, ConditionReport, Verdict,
};
use mucogarch_core::ergolab::{
    aperiodicity_flow_check, coupling_experiment, irreducibility_rank_probe,
    multi_start_convergence, stationary_moment_estimate, ExperimentConfig,
};
use mucogarch_core::error::CoreError;
use mucogarch_core::generator::{
    dynkin_check, extended_generator, foster_lyapunov_scan, gronwall_check,
};
use mucogarch_core::matcore::{vec_of, BsNormContext};
use mucogarch_core::process::{reconstruct_path, simulate_path};

use crate::config::{ConditionSel, RunConfig, TaskCfg};
use crate::CliError;

pub struct TaskOutput {
    /// Body of results.json.
    pub results: serde_json::Value,
    /// Additional artifacts as (file name, content).
    pub files: Vec<(String, String)>,
    /// True when any condition verdict came back inconclusive.
    pub inconclusive: bool,
}

fn map_core(e: CoreError) -> CliError {
    match e {
        CoreError::NotSquare { .. }
        | CoreError::NotSymmetric { .. }
        | CoreError::NotPsd { .. }
        | CoreError::NotPositiveDefinite { .. }
        | CoreError::DimensionMismatch { .. }
        | CoreError::NotDiagonalizable { .. }
        | CoreError::UnstableDrift { .. }
        | CoreError::SingularMatrix { .. }
        | CoreError::InvalidParam(_) => CliError::Validation(e.to_string()),
        CoreError::ExpOverflow { .. }
        | CoreError::NonFiniteIntegrand { .. }
        | CoreError::InternalDefect(_)
        | CoreError::EstimatorVariance { .. } => CliError::Numerical(e.to_string()),
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn execute(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let params = cfg.to_model_params()?;
    let spec = cfg.to_noise_spec()?;

    match &cfg.task {
        TaskCfg::Simulate {
            horizon,
            grid,
            y0,
            seed,
            with_price,
        } => {
            let y0 = cfg.build_y0(y0)?;
            let grid = grid.times();
            let rec = simulate_path(&params, &spec, &y0, *horizon, &grid, *seed, *with_price)
                .map_err(map_core)?;
            let err = reconstruct_path(&rec).map_err(map_core)?;
            let last = rec.skeleton.last();
            let results = serde_json::json!({
                "task": "simulate",
                "horizon": horizon,
                "n_jumps": rec.train.len(),
                "reconstruction_error": err,
                "final_time": last.map(|p| p.t),
                "final_y": last.map(|p| matrix_rows(&p.y)),
            });
            let files = vec![
                ("skeleton.csv".to_string(), rec.to_csv()),
                (
                    "events.json".to_string(),
                    serde_json::to_string_pretty(&rec.to_event_json()).expect("serializes"),
                ),
            ];
            Ok(TaskOutput {
                results,
                files,
                inconclusive: false,
            })
        }

        TaskCfg::Check {
            condition,
            p,
            k,
            n_mc,
            seed,
        } => {
            let mut reports: Vec<ConditionReport> = Vec::new();
            let needs_ctx = matches!(
                condition,
                ConditionSel::All | ConditionSel::LogStationarity | ConditionSel::StationaryMoment
            );
            let ctx = if needs_ctx {
                Some(BsNormContext::new(params.b(), params.a()).map_err(map_core)?)
            } else {
                None
            };
            let require_p = || {
                p.ok_or_else(|| {
                    CliError::Validation("task.p is required for this condition".into())
                })
            };
            let require_k = || {
                k.ok_or_else(|| {
                    CliError::Validation("task.k is required for this condition".into())
                })
            };
            let geom_route = |pv: f64| -> Result<ConditionReport, CliError> {
                if pv >= 1.0 {
                    check_geom_ergodicity(&params, &spec, pv, *n_mc, *seed).map_err(map_core)
                } else {
                    check_geom_ergodicity_small_p(&params, &spec, pv, *n_mc, *seed)
                        .map_err(map_core)
                }
            };
            match condition {
                ConditionSel::LogStationarity => {
                    reports.push(
                        check_log_stationarity(&params, &spec, ctx.as_ref().unwrap(), *n_mc, *seed)
                            .map_err(map_core)?,
                    );
                }
                ConditionSel::StationaryMoment => {
                    reports.push(
                        check_moment_k(
                            &params,
                            &spec,
                            ctx.as_ref().unwrap(),
                            require_k()?,
                            *n_mc,
                            *seed,
                        )
                        .map_err(map_core)?,
                    );
                }
                ConditionSel::GeometricErgodicity => {
                    reports.push(geom_route(require_p()?)?);
                }
                ConditionSel::FirstOrder => {
                    reports.push(check_first_order(&params, &spec, *n_mc, *seed).map_err(map_core)?);
                }
                ConditionSel::All => {
                    let ctx = ctx.as_ref().unwrap();
                    reports.push(
                        check_log_stationarity(&params, &spec, ctx, *n_mc, *seed)
                            .map_err(map_core)?,
                    );
                    reports.push(
                        check_moment_k(&params, &spec, ctx, require_k()?, *n_mc, *seed)
                            .map_err(map_core)?,
                    );
                    reports.push(geom_route(require_p()?)?);
                    reports.push(check_first_order(&params, &spec, *n_mc, *seed).map_err(map_core)?);
                }
            }

            let inconclusive = reports
                .iter()
                .any(|r| r.satisfied == Verdict::Inconclusive);
            let mut csv = String::from(ConditionReport::csv_header());
            csv.push('\n');
            for r in &reports {
                csv.push_str(&r.to_csv_row());
                csv.push('\n');
            }
            let mut results = serde_json::json!({
                "task": "check",
                "reports": reports,
            });
            if reports.len() == 1 {
                results["report"] = serde_json::to_value(&reports[0]).expect("serializes");
            }
            Ok(TaskOutput {
                results,
                files: vec![("conditions.csv".to_string(), csv)],
                inconclusive,
            })
        }

        TaskCfg::GeneratorEvaluate { y0, p, n_mc, seed } => {
            let y0 = cfg.build_y0(y0)?;
            let x = vec_of(y0.matrix());
            let report =
                extended_generator(&params, &spec, &x, *p, *n_mc, *seed).map_err(map_core)?;
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "generator_evaluate", "report": report }),
                files: vec![],
                inconclusive: false,
            })
        }

        TaskCfg::GeneratorDynkin {
            y0,
            p,
            h,
            n_paths,
            seed,
        } => {
            let y0 = cfg.build_y0(y0)?;
            let report =
                dynkin_check(&params, &spec, &y0, *p, *h, *n_paths, *seed).map_err(map_core)?;
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "generator_dynkin", "report": report }),
                files: vec![],
                inconclusive: false,
            })
        }

        TaskCfg::GeneratorFosterScan {
            p,
            r_max,
            n_states,
            n_mc,
            seed,
        } => {
            let condition = if *p >= 1.0 {
                check_geom_ergodicity(&params, &spec, *p, *n_mc, *seed).map_err(map_core)?
            } else {
                check_geom_ergodicity_small_p(&params, &spec, *p, *n_mc, *seed)
                    .map_err(map_core)?
            };
            let condition_holds = condition.satisfied == Verdict::Yes;
            let (fit, rows) = foster_lyapunov_scan(
                &params,
                &spec,
                *p,
                *r_max,
                *n_states,
                *n_mc,
                *seed,
                condition_holds,
            )
            .map_err(map_core)?;
            let mut csv = String::from("norm_x,gen_value,gen_stderr,u,slack\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.norm_x, r.gen_value, r.gen_stderr, r.u, r.slack
                ));
            }
            Ok(TaskOutput {
                results: serde_json::json!({
                    "task": "generator_foster_scan",
                    "report": fit,
                    "condition": condition,
                }),
                files: vec![("scan.csv".to_string(), csv)],
                inconclusive: condition.satisfied == Verdict::Inconclusive,
            })
        }

        TaskCfg::GeneratorGronwall {
            y0,
            p,
            t_grid,
            n_paths,
            seed,
        } => {
            let y0 = cfg.build_y0(y0)?;
            let report = gronwall_check(&params, &spec, &y0, *p, &t_grid.times(), *n_paths, *seed)
                .map_err(map_core)?;
            let mut csv = String::from("t,mean_u,stderr,bound,ratio\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.t, r.mean_u, r.stderr, r.bound, r.ratio
                ));
            }
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "generator_gronwall", "report": report }),
                files: vec![("gronwall.csv".to_string(), csv)],
                inconclusive: false,
            })
        }

        TaskCfg::Coupling {
            initial_states,
            p,
            horizon,
            burn_in,
            grid,
            n_paths,
            seed,
        } => {
            let states = initial_states
                .iter()
                .map(|y| cfg.build_y0(y))
                .collect::<Result<Vec<_>, _>>()?;
            let exp = ExperimentConfig {
                params,
                spec,
                p: *p,
                initial_states: states,
                horizon: *horizon,
                burn_in: *burn_in,
                grid: grid.times(),
                n_paths: *n_paths,
                seed: *seed,
            };
            let report = coupling_experiment(&exp).map_err(map_core)?;
            let mut csv = String::from("t,mean_diff\n");
            for (t, m) in &report.rows {
                csv.push_str(&format!("{t},{m}\n"));
            }
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "coupling", "report": report }),
                files: vec![("trace.csv".to_string(), csv)],
                inconclusive: false,
            })
        }

        TaskCfg::Moments {
            initial_states,
            p,
            horizon,
            burn_in,
            grid,
            n_paths,
            seed,
        } => {
            let states = initial_states
                .iter()
                .map(|y| cfg.build_y0(y))
                .collect::<Result<Vec<_>, _>>()?;
            let exp = ExperimentConfig {
                params,
                spec,
                p: *p,
                initial_states: states,
                horizon: *horizon,
                burn_in: *burn_in,
                grid: grid.times(),
                n_paths: *n_paths,
                seed: *seed,
            };
            let report = stationary_moment_estimate(&exp).map_err(map_core)?;
            let mut csv = String::from("t,running_estimate\n");
            for (t, v) in &report.trace {
                csv.push_str(&format!("{t},{v}\n"));
            }
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "moments", "report": report }),
                files: vec![("trace.csv".to_string(), csv)],
                inconclusive: false,
            })
        }

        TaskCfg::Multistart {
            initial_states,
            p,
            horizon,
            n_paths,
            seed,
        } => {
            let states = initial_states
                .iter()
                .map(|y| cfg.build_y0(y))
                .collect::<Result<Vec<_>, _>>()?;
            let exp = ExperimentConfig {
                params,
                spec,
                p: *p,
                initial_states: states,
                horizon: *horizon,
                burn_in: Some(0.0),
                grid: vec![],
                n_paths: *n_paths,
                seed: *seed,
            };
            let report = multi_start_convergence(&exp).map_err(map_core)?;
            let mut csv = String::from("start_a,start_b,functional,statistic\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    r.start_a, r.start_b, r.functional, r.statistic
                ));
            }
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "multistart", "report": report }),
                files: vec![("ks.csv".to_string(), csv)],
                inconclusive: false,
            })
        }

        TaskCfg::RankProbe {
            y0,
            l,
            n_trials,
            seed,
            enforce_invertible,
        } => {
            let y0 = cfg.build_y0(y0)?;
            let report = irreducibility_rank_probe(
                &params,
                &spec,
                &y0,
                *l,
                *n_trials,
                *seed,
                *enforce_invertible,
            )
            .map_err(map_core)?;
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "rank_probe", "report": report }),
                files: vec![],
                inconclusive: false,
            })
        }

        TaskCfg::Aperiodicity { k_bound, t_grid } => {
            let report =
                aperiodicity_flow_check(&params, *k_bound, &t_grid.times()).map_err(map_core)?;
            let mut csv = String::from("t,flow_norm,envelope\n");
            for (t, norm, env) in &report.rows {
                csv.push_str(&format!("{t},{norm},{env}\n"));
            }
            Ok(TaskOutput {
                results: serde_json::json!({ "task": "aperiodicity", "report": report }),
                files: vec![("decay.csv".to_string(), csv)],
                inconclusive: false,
            })
        }
    }
}

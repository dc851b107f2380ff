//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime error.

pub mod config;
pub mod emit;
pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::aggregate::{aggregate, SeriesRecord};
use crate::error::{Error, Result};
use crate::experiments::{curve_summaries, run_figure1, run_grid, run_table1, table1_cells, within_combined_sem, CurveSummary, RunRecord};
use crate::growth::{default_window, fit_growth_order};
use crate::oracle::run_theorem_suite;
use crate::ENGINE_VERSION;

pub use config::{parse_config, ConfigError, ParseOutcome, Plan, ValidatedConfig};
use emit::{emit_report, emit_results, fmt_num, Emission};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const SEED_SCHEME: &str = "run for seed index j uses noise seed base_seed + j; coupled trial i uses seed base_seed + i; \
     draw (generation t, slot s, parameter i) is a pure function of (seed, t, s, i)";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_USAGE,
        Error::Validation(_) | Error::Contract(_) | Error::Unsupported(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

/// What a finished invocation produced.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// False when a theorem check came out negative.
    pub all_checks_passed: bool,
}

fn report_header(cfg: &ValidatedConfig) -> Value {
    json!({
        "engine_version": ENGINE_VERSION,
        "subcommand": cfg.subcommand(),
        "preset": cfg.preset,
        "seed_scheme": SEED_SCHEME,
        "effective_config": cfg.plan,
    })
}

fn curve_json(c: &CurveSummary) -> Value {
    json!({
        "task": c.key.task,
        "target": c.key.target,
        "order": c.variant.order,
        "self_ref": c.variant.self_referential,
        "beta": c.key.beta,
        "k": c.k,
        "pop": c.key.pop,
        "generations_recorded": c.mean.len(),
        "final_mean": c.final_mean,
        "final_sem": c.final_sem,
        "truncated_at": c.truncated_at,
        "growth": c.growth,
        "growth_error": c.growth_error,
    })
}

fn series_of(records: &[RunRecord]) -> Vec<SeriesRecord> {
    records.iter().map(RunRecord::to_series).collect()
}

fn summary_lines(curves: &[CurveSummary]) -> String {
    let mut out = String::new();
    for c in curves {
        let _ = write!(
            out,
            "{:<6} {:<5} {:<18} k={:<5} beta={:<6} final {} ± {}",
            c.key.task,
            c.key.target,
            c.variant.label(),
            c.k,
            fmt_num(c.key.beta),
            fmt_num(c.final_mean),
            fmt_num(c.final_sem)
        );
        if let Some(g) = c.growth {
            let _ = write!(out, "  slope {:.3}  R²(log-lin) {:.4}", g.slope, g.r2_loglin);
        }
        if let Some(t) = c.truncated_at {
            let _ = write!(out, "  overflow at {t}");
        }
        out.push('\n');
    }
    out
}

fn table1_csv(cells: &[crate::experiments::Table1Cell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["target", "order", "self_ref", "beta", "mean_error", "sem_error", "best"])?;
    for cell in cells {
        for s in &cell.per_beta {
            w.write_record([
                cell.target.name().to_string(),
                cell.variant.order.to_string(),
                cell.variant.self_referential.to_string(),
                fmt_num(s.beta),
                fmt_num(s.mean_error),
                fmt_num(s.sem_error),
                (s.beta == cell.best_beta).to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn top1_comparisons(curves: &[CurveSummary]) -> Vec<Value> {
    let top1: Vec<&CurveSummary> = curves
        .iter()
        .filter(|c| c.k == 1 && !c.variant.self_referential)
        .collect();
    let mut out = Vec::new();
    for (i, a) in top1.iter().enumerate() {
        for b in &top1[i + 1..] {
            out.push(json!({
                "orders": [a.variant.order, b.variant.order],
                "difference": a.final_mean - b.final_mean,
                "combined_sem": (a.final_sem.powi(2) + b.final_sem.powi(2)).sqrt(),
                "within_2_sem": within_combined_sem(a, b, 2.0),
            }));
        }
    }
    out
}

/// Runs a validated plan on a pool of `cfg.threads` workers and writes its outputs.
pub fn execute(cfg: &ValidatedConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| execute_plan(cfg))
}

fn execute_plan(cfg: &ValidatedConfig) -> Result<Outcome> {
    let mut report = report_header(cfg);
    match &cfg.plan {
        Plan::Simulate { grids } => {
            let mut records = Vec::new();
            for grid in grids {
                records.extend(run_grid(grid)?);
            }
            let curves = curve_summaries(&records);
            let series = series_of(&records);
            let aggregates = aggregate(&series);
            report["summary"] = json!({
                "cells": curves.iter().map(curve_json).collect::<Vec<_>>(),
                "tuned_errors": table1_cells(&records),
            });
            let files = emit_results(
                &cfg.out,
                &Emission {
                    records: &series,
                    curves: &aggregates,
                    report: &report,
                    extra: vec![],
                },
            )?;
            Ok(Outcome {
                files,
                summary: summary_lines(&curves),
                all_checks_passed: true,
            })
        }
        Plan::Figure1(spec) => {
            let result = run_figure1(spec)?;
            let series = series_of(&result.records);
            let aggregates = aggregate(&series);
            report["summary"] = json!({
                "curves": result.curves.iter().map(curve_json).collect::<Vec<_>>(),
                "top1_final_comparisons": top1_comparisons(&result.curves),
            });
            let svg = svg::render_growth_curves(&result.curves, spec.population_size);
            let files = emit_results(
                &cfg.out,
                &Emission {
                    records: &series,
                    curves: &aggregates,
                    report: &report,
                    extra: vec![("figure1.svg".to_string(), svg.into_bytes())],
                },
            )?;
            Ok(Outcome {
                files,
                summary: summary_lines(&result.curves),
                all_checks_passed: true,
            })
        }
        Plan::Table1(spec) => {
            let result = run_table1(spec)?;
            let series = series_of(&result.records);
            let aggregates = aggregate(&series);
            let mut best = serde_json::Map::new();
            for &t in &spec.targets {
                if let Some(cell) = result.best_variant(t) {
                    best.insert(t.name().to_string(), json!(cell.variant));
                }
            }
            report["summary"] = json!({ "cells": result.cells, "best_variant": best });
            let mut summary = String::new();
            for cell in &result.cells {
                let _ = writeln!(
                    summary,
                    "{:<6} {:<18} error {}  (beta {})",
                    cell.target.name(),
                    cell.variant.label(),
                    fmt_num(cell.best_error),
                    fmt_num(cell.best_beta)
                );
            }
            let files = emit_results(
                &cfg.out,
                &Emission {
                    records: &series,
                    curves: &aggregates,
                    report: &report,
                    extra: vec![("table1.csv".to_string(), table1_csv(&result.cells)?)],
                },
            )?;
            Ok(Outcome {
                files,
                summary,
                all_checks_passed: true,
            })
        }
        Plan::TheoremCheck(spec) => {
            let suite = run_theorem_suite(spec)?;
            report["lemma2_pathwise_violations"] = json!(suite.lemma2_pathwise_violations);
            report["verdicts"] = json!({
                "pathwise_dominance": suite.lemma2_holds,
                "top1_equal_counts": suite.theorem1_exact,
                "strict_advantage": suite.theorem2_strict,
            });
            report["checks"] = json!(suite.entries);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "check", "order", "k", "pop", "trials", "mean_children_base", "mean_children_perturbed",
                "mean_diff", "sem_diff", "pathwise_violations", "unequal_trials", "witness_count", "passed",
            ])?;
            let mut summary = String::new();
            for e in &suite.entries {
                let r = &e.report;
                w.write_record([
                    e.check.to_string(),
                    e.order.to_string(),
                    e.k.to_string(),
                    e.population_size.to_string(),
                    r.trials.to_string(),
                    fmt_num(r.mean_children_base),
                    fmt_num(r.mean_children_perturbed),
                    fmt_num(r.mean_diff),
                    fmt_num(r.sem_diff),
                    r.pathwise_violations.to_string(),
                    r.unequal_trials.to_string(),
                    r.witness_count.to_string(),
                    e.passed.to_string(),
                ])?;
                let _ = writeln!(
                    summary,
                    "{:<20} n={} k={} N={}  diff {} ± {}  violations {}  {}",
                    e.check,
                    e.order,
                    e.k,
                    e.population_size,
                    fmt_num(r.mean_diff),
                    fmt_num(r.sem_diff),
                    r.pathwise_violations,
                    if e.passed { "ok" } else { "FAILED" }
                );
            }
            let csv_bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            let files = emit_report(&cfg.out, &report, &[("theorem_check.csv".to_string(), csv_bytes)])?;
            Ok(Outcome {
                files,
                summary,
                all_checks_passed: suite.all_passed(),
            })
        }
        Plan::Fit(plan) => {
            let series = emit::read_runs_csv(&plan.input)?;
            let curves = aggregate(&series);
            let mut fits = Vec::new();
            let mut summary = String::new();
            for curve in &curves {
                let means = curve.means();
                let auto = default_window(means.len());
                let window = (
                    plan.window_start.unwrap_or(auto.0),
                    plan.window_end.unwrap_or(auto.1).min(means.len() as u64),
                );
                let fit = fit_growth_order(&means, window);
                let _ = writeln!(
                    summary,
                    "{:<6} {:<5} order {}{} k={} beta={}: {}",
                    curve.key.task,
                    curve.key.target,
                    curve.key.order,
                    if curve.key.self_ref { " (self-ref)" } else { "" },
                    curve.key.k,
                    fmt_num(curve.key.beta),
                    match &fit {
                        Ok(f) => format!("slope {:.3}, R²(log-lin) {:.4}", f.slope, f.r2_loglin),
                        Err(e) => e.to_string(),
                    }
                );
                fits.push(json!({
                    "key": curve.key,
                    "fit": fit.as_ref().ok(),
                    "error": fit.as_ref().err().map(|e| e.to_string()),
                }));
            }
            report["summary"] = json!({ "fits": fits });
            let files = emit_report(&cfg.out, &report, &[])?;
            Ok(Outcome {
                files,
                summary,
                all_checks_passed: true,
            })
        }
    }
}

/// Full CLI entry point; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(argv) {
        Ok(ParseOutcome::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Ok(ParseOutcome::Run(cfg)) => cfg,
        Err(ConfigError::Usage(msg)) => {
            eprint!("{msg}");
            return EXIT_USAGE;
        }
        Err(ConfigError::Invalid(err)) => {
            eprintln!("error: {err}");
            return exit_code(&err);
        }
    };
    eprintln!("ordevo: {} on {} thread(s), output in {}", cfg.subcommand(), cfg.threads, cfg.out.display());
    match execute(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.all_checks_passed {
                EXIT_OK
            } else {
                eprintln!("error: at least one theorem check failed");
                EXIT_RUNTIME
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

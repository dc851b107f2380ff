//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Runs the full desk-scale experiments; expect several minutes.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ordevo::cli::{execute, parse_config, ParseOutcome};
use ordevo::experiments::{run_figure1, run_table1, within_combined_sem, Figure1Spec, Table1Spec, Variant};
use ordevo::fitness::Target;
use ordevo::oracle::{check_lemma2_pathwise, estimate_child_expectation, CoupledTrialConfig, OracleReport};
use ordevo::{step_generation, Genome, MutationConfig, Population, SelectionConfig, ZeroNoise};

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(id: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Σ_j C(t, j) x_j in exact integer arithmetic.
fn closed_form(init: &[i64], t: u64) -> i128 {
    let mut total = 0i128;
    let mut binom = 1i128;
    for (j, &x) in init.iter().enumerate() {
        let j = j as i128;
        if j > t as i128 {
            break;
        }
        if j > 0 {
            binom = binom * (t as i128 - j + 1) / j;
        }
        total += binom * x as i128;
    }
    total
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let sel = SelectionConfig::new(1, 1).unwrap();
    let cfg = MutationConfig::standard(1.0).unwrap();
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for order in 0..=4usize {
        for _ in 0..200 {
            let init: Vec<i64> = (0..=order).map(|_| rng.random_range(-1000..=1000)).collect();
            let genome = Genome::from_params(init.iter().map(|&v| v as f64).collect()).unwrap();
            let mut pop = Population::from_genomes(vec![genome]).unwrap();
            for t in 0..=30u64 {
                checked += 1;
                if pop.member(0)[0] as i128 != closed_form(&init, t) || pop.member(0)[0].fract() != 0.0 {
                    mismatches += 1;
                }
                let fit: Vec<f64> = pop.base_values().collect();
                pop = step_generation(&pop, &fit, &sel, &cfg, &ZeroNoise).unwrap();
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "1 zero-noise closed form (n<=4, t<=30, exact, <1s)",
        mismatches == 0 && elapsed < Duration::from_secs(1),
        format!("{checked} values, {mismatches} mismatches, {}", secs(elapsed)),
    )
}

fn oracle(order: usize, k: usize, pop: usize, trials: u64) -> OracleReport {
    let cfg = CoupledTrialConfig::new(order, k, pop, 1.0).unwrap();
    estimate_child_expectation(&cfg, trials, 0).unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut violations = 0u64;
    let mut configs = 0;
    let mut all_hold = true;
    for order in [1, 2, 3] {
        for k in [2, 4] {
            for pop in [4, 8] {
                let r = oracle(order, k, pop, 10_000);
                violations += r.pathwise_violations;
                all_hold &= check_lemma2_pathwise(&r);
                configs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "2 pathwise dominance (12 configs x 10k trials, <1min)",
        all_hold && violations == 0 && elapsed < Duration::from_secs(60),
        format!("{configs} configs, {violations} violations, {}", secs(elapsed)),
    )
}

fn criterion_3() -> Outcome {
    let mut unequal = 0u64;
    let mut details = Vec::new();
    for order in [2, 3] {
        for pop in [4, 8] {
            let r = oracle(order, 1, pop, 10_000);
            unequal += r.unequal_trials;
            details.push(format!("n={order} N={pop}: {} unequal", r.unequal_trials));
        }
    }
    verdict("3 top-1 counts equal (k=1, n in {2,3})", unequal == 0, details.join("; "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for order in [1, 2] {
        let r = oracle(order, 2, 8, 100_000);
        ok &= r.strictly_positive(5.0) && r.witness_observed;
        details.push(format!(
            "n={order}: diff {:.4} sem {:.4} ({:.1} sem), witnesses {}",
            r.mean_diff,
            r.sem_diff,
            r.mean_diff / r.sem_diff,
            r.witness_count
        ));
    }
    let elapsed = start.elapsed();
    details.push(secs(elapsed));
    verdict(
        "4 strict advantage (k=2, N=8, 1e5 trials, >5 sem, witness, <2min)",
        ok && elapsed < Duration::from_secs(120),
        details.join("; "),
    )
}

fn criterion_5() -> Vec<Outcome> {
    let start = Instant::now();
    let spec = Figure1Spec::desk();
    let result = run_figure1(&spec).unwrap();
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(300);

    let mut slopes_ok = true;
    let mut slopes = Vec::new();
    for n in 1..=3 {
        let curve = result.curve(Variant::standard(n), spec.k).unwrap();
        let slope = curve.growth.map(|g| g.slope).unwrap_or(f64::NAN);
        slopes_ok &= (slope - n as f64).abs() <= 0.5;
        slopes.push(format!("n={n}: {slope:.3}"));
    }

    let sr = result.curve(Variant::self_referential(1), spec.k).unwrap();
    let r2 = sr.growth.map(|g| g.r2_loglin).unwrap_or(f64::NAN);
    let truncation = match sr.truncated_at {
        Some(t) => format!("overflow at generation {t}"),
        None => "no overflow".into(),
    };

    let top1: Vec<_> = (0..=3).map(|n| result.curve(Variant::standard(n), 1).unwrap()).collect();
    let mut pairs_ok = true;
    let mut worst = 0.0f64;
    for (i, a) in top1.iter().enumerate() {
        for b in &top1[i + 1..] {
            pairs_ok &= within_combined_sem(a, b, 2.0);
            let combined = (a.final_sem.powi(2) + b.final_sem.powi(2)).sqrt();
            worst = worst.max((a.final_mean - b.final_mean).abs() / combined);
        }
    }

    vec![
        verdict(
            "5a top-2 log-log slopes within 0.5 of n (n=1..3)",
            slopes_ok && in_time,
            format!("{}; {}", slopes.join(", "), secs(elapsed)),
        ),
        verdict(
            "5b self-referential log-linear R^2 > 0.99",
            r2 > 0.99 && in_time,
            format!("R^2 {r2:.6}, {truncation}"),
        ),
        verdict(
            "5c top-1 finals within 2 combined sem (orders 0..3)",
            pairs_ok && in_time,
            format!("largest gap {worst:.2} combined sem"),
        ),
    ]
}

fn criterion_6() -> Vec<Outcome> {
    let start = Instant::now();
    let spec = Table1Spec::desk();
    let result = run_table1(&spec).unwrap();
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(30 * 60);

    let error = |t: Target, n: usize| result.cell(t, Variant::standard(n)).unwrap().best_error;
    let best = |t: Target| result.best_variant(t).unwrap();
    let row = |t: Target| {
        (0..=3)
            .map(|n| format!("{n}:{:.3e}", error(t, n)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let lin = best(Target::Linear);
    let a_ok = lin.variant.order >= 1 && lin.best_error <= 0.1 * error(Target::Linear, 0);
    let quad = best(Target::Quadratic);
    let b_ok = matches!(quad.variant.order, 2 | 3);
    let mut c_ok = true;
    let mut c_detail = Vec::new();
    for t in Target::ALL {
        let beats = (1..=3).any(|n| error(t, n) < error(t, 0));
        c_ok &= beats;
        c_detail.push(format!("{}: {}", t.name(), if beats { "yes" } else { "no" }));
    }

    vec![
        verdict(
            "6a target t: best order >= 1 with error <= 0.1x order 0",
            a_ok && in_time,
            format!("best order {} | {} | {}", lin.variant.order, row(Target::Linear), secs(elapsed)),
        ),
        verdict(
            "6b target t^2: best order in {2,3}",
            b_ok && in_time,
            format!("best order {} | {}", quad.variant.order, row(Target::Quadratic)),
        ),
        verdict(
            "6c every target: some order >= 1 beats order 0",
            c_ok && in_time,
            c_detail.join(", "),
        ),
    ]
}

fn runs_csv(dir: &Path, threads: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(threads);
    let out_str = out.to_str().unwrap();
    let argv: Vec<&str> = ["ordevo", "--threads", threads]
        .into_iter()
        .chain(args.iter().copied())
        .chain(["--out", out_str])
        .collect();
    let ParseOutcome::Run(cfg) = parse_config(argv).unwrap_or_else(|_| panic!("bad arguments {args:?}")) else {
        panic!("no run for {args:?}");
    };
    execute(&cfg).unwrap();
    std::fs::read(out.join("runs.csv")).unwrap()
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let experiments: [&[&str]; 3] = [
        &["simulate", "--orders", "0,1,2,sr", "--pop", "1024", "--k", "4", "--gens", "100", "--seeds", "4", "--seed", "11"],
        &["figure1", "--pop", "2048", "--k", "2", "--gens", "60", "--seeds", "3", "--seed", "5"],
        &["table1", "--pop", "1024", "--k", "64", "--gens", "80", "--seeds", "2", "--beta", "0.1,0.01"],
    ];
    let mut identical = 0;
    for (i, args) in experiments.iter().enumerate() {
        let sub = dir.path().join(i.to_string());
        if runs_csv(&sub, "1", args) == runs_csv(&sub, "4", args) {
            identical += 1;
        }
    }
    verdict(
        "7 runs.csv byte-identical with 1 vs 4 threads",
        identical == experiments.len(),
        format!("{identical}/{} experiments identical", experiments.len()),
    )
}

fn report(o: &Outcome) {
    println!("{} criterion {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.detail);
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut record = |batch: Vec<Outcome>| {
        for o in &batch {
            report(o);
        }
        outcomes.extend(batch);
    };
    record(vec![criterion_1()]);
    record(vec![criterion_2()]);
    record(vec![criterion_3()]);
    record(vec![criterion_4()]);
    record(criterion_5());
    record(criterion_6());
    record(vec![criterion_7()]);

    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

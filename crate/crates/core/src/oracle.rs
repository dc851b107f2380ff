//! Coupled common-noise trials for checking how top-k selection treats the
//! highest meta-parameter.
//!
//! A trial evolves two populations that are identical except that one focal
//! member has `delta` added to its top entry. Both arms read the same
//! [`NoiseStream`], and noise is addressed by slot rather than by lineage, so
//! the arms see the same mutation vector even after their selections diverge.
//! After `n + 1` selection events (generations `0..=n`) the number of
//! offspring slots descended from the focal member is counted in each arm.
//!
//! What the trials exhibit:
//! * with `k = 1` the counts agree in every trial (the first selection settles
//!   everything and the top entry cannot influence it);
//! * the perturbed arm never has fewer descendants than the base arm;
//! * with `k > 1` it sometimes has strictly more, so the expected count is
//!   strictly larger.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    offspring_parents, select_top_k, step_generation_into, MutationConfig, Population,
    SelectionConfig,
};
use crate::noise::{NoiseSource, NoiseStream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub focal_slot: usize,
    /// Added to the focal member's top entry in the perturbed arm.
    pub delta: f64,
    pub meta_order: usize,
}

impl PerturbationSpec {
    pub fn new(focal_slot: usize, delta: f64, meta_order: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Validation(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            focal_slot,
            delta,
            meta_order,
        })
    }
}

/// How both arms are initialized before the perturbation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialInit {
    /// Every entry i.i.d. standard normal, drawn at generation 0 of the trial stream.
    #[default]
    Jittered,
    /// All-zero genomes, so the first selection is a full tie.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledTrialConfig {
    pub selection: SelectionConfig,
    pub mutation: MutationConfig,
    pub perturbation: PerturbationSpec,
    pub init: TrialInit,
}

impl CoupledTrialConfig {
    /// Jittered init, focal slot 0, standard mutation with `beta = 1`.
    pub fn new(meta_order: usize, k: usize, population_size: usize, delta: f64) -> Result<Self> {
        Ok(Self {
            selection: SelectionConfig::new(k, population_size)?,
            mutation: MutationConfig::standard(1.0)?,
            perturbation: PerturbationSpec::new(0, delta, meta_order)?,
            init: TrialInit::Jittered,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.mutation.self_referential {
            return Err(Error::Unsupported(
                "coupled trials are defined for the standard mutation rule only".into(),
            ));
        }
        let p = &self.perturbation;
        if p.focal_slot >= self.selection.population_size {
            return Err(Error::Contract(format!(
                "focal slot {} outside a population of {}",
                p.focal_slot, self.selection.population_size
            )));
        }
        if !(p.delta.is_finite() && p.delta >= 0.0) {
            return Err(Error::Contract(format!("invalid delta {}", p.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledTrialResult {
    pub children_base: usize,
    pub children_perturbed: usize,
    pub trial_seed: u64,
}

/// Fitnesses and lineage of one arm at one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSnapshot {
    pub generation: u64,
    pub fitnesses: Vec<f64>,
    pub lineage: Vec<u32>,
}

/// Full history of a coupled trial, generations `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrace {
    pub base: Vec<ArmSnapshot>,
    pub perturbed: Vec<ArmSnapshot>,
    pub result: CoupledTrialResult,
}

fn initial_population(cfg: &CoupledTrialConfig, stream: &NoiseStream) -> Population {
    let sel = &cfg.selection;
    let mut pop = crate::evolution::init_population(cfg.perturbation.meta_order, sel);
    if cfg.init == TrialInit::Jittered {
        for s in 0..sel.population_size {
            stream.fill(0, s, pop.member_mut(s));
        }
    }
    pop
}

struct Arm {
    pop: Population,
    scratch: Population,
    fitnesses: Vec<f64>,
}

impl Arm {
    fn new(pop: Population) -> Self {
        let fitnesses = pop.base_values().collect();
        Self {
            scratch: pop.clone(),
            pop,
            fitnesses,
        }
    }

    fn step(&mut self, cfg: &CoupledTrialConfig, stream: &NoiseStream) -> Result<()> {
        step_generation_into(
            &self.pop,
            &self.fitnesses,
            &cfg.selection,
            &cfg.mutation,
            stream,
            &mut self.scratch,
        )?;
        std::mem::swap(&mut self.pop, &mut self.scratch);
        self.fitnesses.clear();
        self.fitnesses.extend(self.pop.base_values());
        Ok(())
    }

    /// Offspring slots descended from `tag` after the next selection.
    fn children_after_selection(&self, sel: &SelectionConfig, tag: u32) -> Result<usize> {
        let survivors = select_top_k(&self.fitnesses, sel.k)?;
        Ok(offspring_parents(&survivors, sel.population_size)
            .into_iter()
            .filter(|&p| self.pop.lineage()[p] == tag)
            .count())
    }

    fn snapshot(&self) -> ArmSnapshot {
        ArmSnapshot {
            generation: self.pop.generation(),
            fitnesses: self.fitnesses.clone(),
            lineage: self.pop.lineage().to_vec(),
        }
    }
}

fn run_trial(
    cfg: &CoupledTrialConfig,
    trial_seed: u64,
    mut record: Option<(&mut Vec<ArmSnapshot>, &mut Vec<ArmSnapshot>)>,
) -> Result<CoupledTrialResult> {
    cfg.validate()?;
    let stream = NoiseStream::new(trial_seed);
    let pert = cfg.perturbation;
    let base_pop = initial_population(cfg, &stream);
    let focal_tag = base_pop.lineage()[pert.focal_slot];
    let mut perturbed_pop = base_pop.clone();
    perturbed_pop.member_mut(pert.focal_slot)[pert.meta_order] += pert.delta;

    let mut base = Arm::new(base_pop);
    let mut perturbed = Arm::new(perturbed_pop);
    for generation in 0..=pert.meta_order as u64 {
        if let Some((b, p)) = record.as_mut() {
            b.push(base.snapshot());
            p.push(perturbed.snapshot());
        }
        if generation == pert.meta_order as u64 {
            break;
        }
        base.step(cfg, &stream)?;
        perturbed.step(cfg, &stream)?;
    }

    Ok(CoupledTrialResult {
        children_base: base.children_after_selection(&cfg.selection, focal_tag)?,
        children_perturbed: perturbed.children_after_selection(&cfg.selection, focal_tag)?,
        trial_seed,
    })
}

/// One coupled trial: both arms share every mutation draw.
pub fn run_coupled_trial(cfg: &CoupledTrialConfig, trial_seed: u64) -> Result<CoupledTrialResult> {
    run_trial(cfg, trial_seed, None)
}

/// Like [`run_coupled_trial`], also returning per-generation fitness and lineage of both arms.
pub fn trace_coupled_trial(cfg: &CoupledTrialConfig, trial_seed: u64) -> Result<CoupledTrace> {
    let mut base = Vec::new();
    let mut perturbed = Vec::new();
    let result = run_trial(cfg, trial_seed, Some((&mut base, &mut perturbed)))?;
    Ok(CoupledTrace {
        base,
        perturbed,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub trials: u64,
    pub mean_children_base: f64,
    pub mean_children_perturbed: f64,
    /// Mean of `children_perturbed - children_base`.
    pub mean_diff: f64,
    pub sem_diff: f64,
    /// Trials with `children_perturbed < children_base`.
    pub pathwise_violations: u64,
    /// Trials where the counts differ at all.
    pub unequal_trials: u64,
    /// Trials with no base-arm children but at least one perturbed-arm child.
    pub witness_count: u64,
    pub witness_observed: bool,
}

impl OracleReport {
    /// Aggregates results in the given order.
    pub fn from_results(results: &[CoupledTrialResult]) -> Self {
        let diffs: Vec<f64> = results
            .iter()
            .map(|r| r.children_perturbed as f64 - r.children_base as f64)
            .collect();
        let base: Vec<f64> = results.iter().map(|r| r.children_base as f64).collect();
        let pert: Vec<f64> = results.iter().map(|r| r.children_perturbed as f64).collect();
        let witness_count = results
            .iter()
            .filter(|r| r.children_base == 0 && r.children_perturbed >= 1)
            .count() as u64;
        Self {
            trials: results.len() as u64,
            mean_children_base: stats::mean(&base),
            mean_children_perturbed: stats::mean(&pert),
            mean_diff: stats::mean(&diffs),
            sem_diff: stats::sem(&diffs),
            pathwise_violations: results
                .iter()
                .filter(|r| r.children_perturbed < r.children_base)
                .count() as u64,
            unequal_trials: results
                .iter()
                .filter(|r| r.children_perturbed != r.children_base)
                .count() as u64,
            witness_count,
            witness_observed: witness_count > 0,
        }
    }

    /// Mean difference is positive by more than `sigmas` standard errors.
    pub fn strictly_positive(&self, sigmas: f64) -> bool {
        self.mean_diff > 0.0 && self.mean_diff > sigmas * self.sem_diff
    }
}

/// Runs `trials` coupled trials with seeds `base_seed, base_seed + 1, ...`.
/// Trials run on the current rayon pool; the report does not depend on
/// scheduling because results are reduced in seed order.
pub fn estimate_child_expectation(
    cfg: &CoupledTrialConfig,
    trials: u64,
    base_seed: u64,
) -> Result<OracleReport> {
    if trials == 0 {
        return Err(Error::Contract("at least one trial is required".into()));
    }
    cfg.validate()?;
    let results = (0..trials)
        .into_par_iter()
        .map(|i| run_coupled_trial(cfg, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport::from_results(&results))
}

pub fn check_lemma2_pathwise(report: &OracleReport) -> bool {
    report.pathwise_violations == 0
}

/// Grid of coupled-trial checks run by the `theorem-check` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSuiteSpec {
    pub delta: f64,
    pub base_seed: u64,
    /// Pathwise-dominance grid: every (order, k, N) combination.
    pub dominance_orders: Vec<usize>,
    pub dominance_ks: Vec<usize>,
    pub dominance_pops: Vec<usize>,
    pub dominance_trials: u64,
    /// Top-1 grid: every (order, N) combination with k = 1.
    pub top1_orders: Vec<usize>,
    pub top1_pops: Vec<usize>,
    pub top1_trials: u64,
    /// Strict-advantage checks: every order with (k, N) fixed.
    pub advantage_orders: Vec<usize>,
    pub advantage_k: usize,
    pub advantage_pop: usize,
    pub advantage_trials: u64,
    /// Required margin of the mean difference in standard errors.
    pub advantage_sigmas: f64,
}

impl Default for TheoremSuiteSpec {
    fn default() -> Self {
        Self {
            delta: 1.0,
            base_seed: 0,
            dominance_orders: vec![1, 2, 3],
            dominance_ks: vec![2, 4],
            dominance_pops: vec![4, 8],
            dominance_trials: 10_000,
            top1_orders: vec![2, 3],
            top1_pops: vec![4, 8],
            top1_trials: 10_000,
            advantage_orders: vec![1, 2],
            advantage_k: 2,
            advantage_pop: 8,
            advantage_trials: 100_000,
            advantage_sigmas: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub check: &'static str,
    pub order: usize,
    pub k: usize,
    pub population_size: usize,
    pub report: OracleReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremSuiteReport {
    pub entries: Vec<SuiteEntry>,
    /// Violations summed over the dominance grid.
    pub lemma2_pathwise_violations: u64,
    pub lemma2_holds: bool,
    pub theorem1_exact: bool,
    pub theorem2_strict: bool,
}

impl TheoremSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.lemma2_holds && self.theorem1_exact && self.theorem2_strict
    }
}

fn suite_config(order: usize, k: usize, pop: usize, delta: f64) -> Result<CoupledTrialConfig> {
    CoupledTrialConfig::new(order, k, pop, delta)
}

/// Runs the dominance, top-1 and strict-advantage grids.
pub fn run_theorem_suite(spec: &TheoremSuiteSpec) -> Result<TheoremSuiteReport> {
    let mut entries = Vec::new();
    for &order in &spec.dominance_orders {
        for &k in &spec.dominance_ks {
            for &pop in &spec.dominance_pops {
                let cfg = suite_config(order, k, pop, spec.delta)?;
                let report = estimate_child_expectation(&cfg, spec.dominance_trials, spec.base_seed)?;
                entries.push(SuiteEntry {
                    check: "pathwise_dominance",
                    order,
                    k,
                    population_size: pop,
                    passed: check_lemma2_pathwise(&report),
                    report,
                });
            }
        }
    }
    for &order in &spec.top1_orders {
        for &pop in &spec.top1_pops {
            let cfg = suite_config(order, 1, pop, spec.delta)?;
            let report = estimate_child_expectation(&cfg, spec.top1_trials, spec.base_seed)?;
            entries.push(SuiteEntry {
                check: "top1_equal_counts",
                order,
                k: 1,
                population_size: pop,
                passed: report.unequal_trials == 0,
                report,
            });
        }
    }
    for &order in &spec.advantage_orders {
        let cfg = suite_config(order, spec.advantage_k, spec.advantage_pop, spec.delta)?;
        let report = estimate_child_expectation(&cfg, spec.advantage_trials, spec.base_seed)?;
        entries.push(SuiteEntry {
            check: "strict_advantage",
            order,
            k: spec.advantage_k,
            population_size: spec.advantage_pop,
            passed: report.strictly_positive(spec.advantage_sigmas) && report.witness_observed,
            report,
        });
    }

    fn of<'a>(entries: &'a [SuiteEntry], check: &'a str) -> impl Iterator<Item = &'a SuiteEntry> + 'a {
        entries.iter().filter(move |e| e.check == check)
    }
    let lemma2_pathwise_violations = of(&entries, "pathwise_dominance")
        .chain(of(&entries, "strict_advantage"))
        .map(|e| e.report.pathwise_violations)
        .sum();
    let theorem1_exact = of(&entries, "top1_equal_counts").all(|e| e.passed);
    let theorem2_strict = of(&entries, "strict_advantage").all(|e| e.passed);
    Ok(TheoremSuiteReport {
        lemma2_pathwise_violations,
        lemma2_holds: lemma2_pathwise_violations == 0,
        theorem1_exact,
        theorem2_strict,
        entries,
    })
}

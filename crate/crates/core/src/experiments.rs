//! Experiment drivers: single runs, seed grids, the growth-curve study and the
//! forecasting-error table.
//!
//! Seeds: the run for seed index `j` of a grid uses noise seed
//! `base_seed + j` (wrapping). The seed does not depend on the cell, so every
//! cell of a grid sees the same set of noise streams.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, AggregateCurve, CellKey, SeriesRecord};
use crate::error::{Error, Result};
use crate::evolution::{init_population, step_generation_into, MutationConfig, Population, SelectionConfig};
use crate::fitness::{FitnessTask, Target};
use crate::growth::{default_window, fit_growth_order, GrowthFit};
use crate::noise::{NoiseSource, NoiseStream};
use crate::stats;

/// Meta-order plus whether the top entry is self-referential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variant {
    pub order: usize,
    pub self_referential: bool,
}

impl Variant {
    pub fn standard(order: usize) -> Self {
        Self {
            order,
            self_referential: false,
        }
    }

    pub fn self_referential(order: usize) -> Self {
        Self {
            order,
            self_referential: true,
        }
    }

    pub fn label(&self) -> String {
        if self.self_referential {
            format!("self-ref (order {})", self.order)
        } else {
            format!("order {}", self.order)
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.self_referential {
            write!(f, "sr{}", self.order)
        } else {
            write!(f, "{}", self.order)
        }
    }
}

/// One (task, variant, selection, beta, seed) run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSpec {
    pub task: FitnessTask,
    pub variant: Variant,
    pub selection: SelectionConfig,
    pub beta: f64,
    pub beta_is_variance: bool,
    pub generations: u64,
    pub seed: u64,
}

impl RunSpec {
    pub fn mutation(&self) -> Result<MutationConfig> {
        MutationConfig::new(self.beta, self.variant.self_referential, self.beta_is_variance)
    }

    pub fn cell_key(&self) -> CellKey {
        CellKey {
            task: self.task.kind_name().to_string(),
            target: self.task.target().map(|t| t.name().to_string()).unwrap_or_default(),
            order: self.variant.order,
            self_ref: self.variant.self_referential,
            beta: self.beta,
            k: self.selection.k,
            pop: self.selection.population_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub spec: RunSpec,
    /// Best fitness of generations `1..=len`.
    pub best_fitness: Vec<f64>,
    /// |target − entry 0| of each generation's fittest member (time series only).
    pub pred_error: Option<Vec<f64>>,
    /// First generation that left the floating-point range, if any.
    pub truncated_at: Option<u64>,
}

impl RunRecord {
    pub fn to_series(&self) -> SeriesRecord {
        SeriesRecord {
            key: self.spec.cell_key(),
            seed: self.spec.seed,
            best_fitness: self.best_fitness.clone(),
            pred_error: self.pred_error.clone(),
        }
    }

    /// Mean prediction error over all generations; infinite for truncated runs.
    pub fn mean_pred_error(&self) -> Option<f64> {
        let errors = self.pred_error.as_ref()?;
        if self.truncated_at.is_some() || errors.is_empty() {
            return Some(f64::INFINITY);
        }
        Some(stats::mean(errors))
    }
}

/// Fittest member (lowest slot on ties).
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Evolves `pop` for `spec.generations` steps with an explicit noise source.
/// Evaluation order per step: fitness of generation t, select, replicate,
/// mutate into t + 1.
pub fn run_evolution_from<N: NoiseSource + ?Sized>(
    spec: &RunSpec,
    mut pop: Population,
    noise: &N,
) -> Result<RunRecord> {
    spec.task.validate()?;
    if spec.generations == 0 {
        return Err(Error::Validation("generations must be at least 1".into()));
    }
    if pop.len() != spec.selection.population_size {
        return Err(Error::Contract("initial population size does not match the selection config".into()));
    }
    let mutation = spec.mutation()?;
    let task = spec.task;
    let capacity = spec.generations as usize;
    let mut best_fitness = Vec::with_capacity(capacity);
    let mut pred_error = task.target().map(|_| Vec::with_capacity(capacity));
    let mut truncated_at = None;

    let start = pop.generation();
    let mut fitnesses: Vec<f64> = pop.base_values().map(|b| task.fitness_of_base(b, start)).collect();
    let mut scratch = pop.clone();
    for _ in 0..spec.generations {
        match step_generation_into(&pop, &fitnesses, &spec.selection, &mutation, noise, &mut scratch) {
            Ok(_) => {}
            Err(Error::Overflow { generation, .. }) => {
                truncated_at = Some(generation);
                break;
            }
            Err(e) => return Err(e),
        }
        std::mem::swap(&mut pop, &mut scratch);
        let t = pop.generation();
        fitnesses.clear();
        fitnesses.extend(pop.base_values().map(|b| task.fitness_of_base(b, t)));
        let best = argmax(&fitnesses);
        if !fitnesses[best].is_finite() {
            truncated_at = Some(t);
            break;
        }
        best_fitness.push(fitnesses[best]);
        if let (Some(errors), Some(target)) = (pred_error.as_mut(), task.target_value(t)) {
            errors.push((target - pop.member(best)[0]).abs());
        }
    }
    Ok(RunRecord {
        spec: *spec,
        best_fitness,
        pred_error,
        truncated_at,
    })
}

/// A run from all-zero genomes with the spec's seeded noise stream.
pub fn run_evolution(spec: &RunSpec) -> Result<RunRecord> {
    let pop = init_population(spec.variant.order, &spec.selection);
    run_evolution_from(spec, pop, &NoiseStream::new(spec.seed))
}

/// Cartesian product of cells × seeds for one task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub task: FitnessTask,
    pub variants: Vec<Variant>,
    pub population_size: usize,
    /// Survivor counts; each must divide the population size.
    pub ks: Vec<usize>,
    pub betas: Vec<f64>,
    pub beta_is_variance: bool,
    pub generations: u64,
    pub seeds: u64,
    pub base_seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.generations < 1 {
            return Err(Error::Validation("generations must be at least 1".into()));
        }
        if self.seeds < 1 {
            return Err(Error::Validation("seeds must be at least 1".into()));
        }
        if self.variants.is_empty() || self.ks.is_empty() || self.betas.is_empty() {
            return Err(Error::Validation("orders, k and beta lists must be non-empty".into()));
        }
        for &k in &self.ks {
            SelectionConfig::new(k, self.population_size)?;
        }
        for &b in &self.betas {
            MutationConfig::standard(b)?;
        }
        Ok(())
    }

    /// Runs in a fixed order: k, variant, beta, seed.
    pub fn run_specs(&self) -> Result<Vec<RunSpec>> {
        self.validate()?;
        let mut out = Vec::new();
        for &k in &self.ks {
            let selection = SelectionConfig::new(k, self.population_size)?;
            for &variant in &self.variants {
                for &beta in &self.betas {
                    for j in 0..self.seeds {
                        out.push(RunSpec {
                            task: self.task,
                            variant,
                            selection,
                            beta,
                            beta_is_variance: self.beta_is_variance,
                            generations: self.generations,
                            seed: self.base_seed.wrapping_add(j),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs every cell of the grid on the current rayon pool. Output order
/// matches [`GridSpec::run_specs`] regardless of scheduling.
pub fn run_grid(spec: &GridSpec) -> Result<Vec<RunRecord>> {
    let specs = spec.run_specs()?;
    specs.par_iter().map(run_evolution).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Spec {
    pub population_size: usize,
    /// Survivors for the population-based arm; the single-genome arm always uses 1.
    pub k: usize,
    pub beta: f64,
    pub beta_is_variance: bool,
    pub generations: u64,
    pub seeds: u64,
    pub base_seed: u64,
    pub variants: Vec<Variant>,
}

impl Figure1Spec {
    /// N = 2048, top-2 vs top-1, beta = 1, T = 1000, 32 seeds.
    pub fn desk() -> Self {
        Self {
            population_size: 2048,
            k: 2,
            beta: 1.0,
            beta_is_variance: true,
            generations: 1000,
            seeds: 32,
            base_seed: 0,
            variants: vec![
                Variant::standard(0),
                Variant::standard(1),
                Variant::standard(2),
                Variant::standard(3),
                Variant::self_referential(1),
            ],
        }
    }

    /// Desk settings with 1024 seeds.
    pub fn full() -> Self {
        Self {
            seeds: 1024,
            ..Self::desk()
        }
    }

    pub fn grid(&self) -> GridSpec {
        let mut ks = vec![self.k];
        if self.k != 1 {
            ks.push(1);
        }
        GridSpec {
            task: FitnessTask::Numeric,
            variants: self.variants.clone(),
            population_size: self.population_size,
            ks,
            betas: vec![self.beta],
            beta_is_variance: self.beta_is_variance,
            generations: self.generations,
            seeds: self.seeds,
            base_seed: self.base_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub key: CellKey,
    pub variant: Variant,
    pub k: usize,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
    /// Earliest overflow generation across seeds.
    pub truncated_at: Option<u64>,
    pub final_mean: f64,
    pub final_sem: f64,
    /// Final-generation best fitness of every seed, in seed order.
    pub final_values: Vec<f64>,
    pub growth: Option<GrowthFit>,
    pub growth_error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Figure1Result {
    pub curves: Vec<CurveSummary>,
    pub records: Vec<RunRecord>,
}

impl Figure1Result {
    pub fn curve(&self, variant: Variant, k: usize) -> Option<&CurveSummary> {
        self.curves.iter().find(|c| c.variant == variant && c.k == k)
    }
}

fn summarize_curve(curve: &AggregateCurve, records: &[&RunRecord]) -> CurveSummary {
    let mean = curve.means();
    let sem = curve.sems();
    let truncated_at = records.iter().filter_map(|r| r.truncated_at).min();
    let last = mean.len();
    let mut final_values: Vec<(u64, f64)> = records
        .iter()
        .filter(|_| last > 0)
        .map(|r| (r.spec.seed, r.best_fitness[last - 1]))
        .collect();
    final_values.sort_by_key(|(s, _)| *s);
    let final_values: Vec<f64> = final_values.into_iter().map(|(_, v)| v).collect();
    let (growth, growth_error) = if last == 0 {
        (None, Some("empty curve".to_string()))
    } else {
        match fit_growth_order(&mean, default_window(last)) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    CurveSummary {
        key: curve.key.clone(),
        variant: Variant {
            order: curve.key.order,
            self_referential: curve.key.self_ref,
        },
        k: curve.key.k,
        final_mean: mean.last().copied().unwrap_or(f64::NAN),
        final_sem: sem.last().copied().unwrap_or(f64::NAN),
        mean,
        sem,
        truncated_at,
        final_values,
        growth,
        growth_error,
    }
}

/// Aggregated curve, final values and growth fit for every cell in `records`.
pub fn curve_summaries(records: &[RunRecord]) -> Vec<CurveSummary> {
    let series: Vec<SeriesRecord> = records.iter().map(RunRecord::to_series).collect();
    aggregate(&series)
        .iter()
        .map(|curve| {
            let members: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.spec.cell_key().cmp_key(&curve.key).is_eq())
                .collect();
            summarize_curve(curve, &members)
        })
        .collect()
}

/// Mean best-fitness curves with SEM and a growth fit per (variant, k).
pub fn run_figure1(spec: &Figure1Spec) -> Result<Figure1Result> {
    let records = run_grid(&spec.grid())?;
    Ok(Figure1Result {
        curves: curve_summaries(&records),
        records,
    })
}

/// `|a − b| < sigmas · sqrt(sem_a² + sem_b²)`.
pub fn within_combined_sem(a: &CurveSummary, b: &CurveSummary, sigmas: f64) -> bool {
    let combined = (a.final_sem * a.final_sem + b.final_sem * b.final_sem).sqrt();
    (a.final_mean - b.final_mean).abs() < sigmas * combined
}

pub const DEFAULT_BETA_GRID: [f64; 5] = [1.0, 0.5, 0.1, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Spec {
    pub targets: Vec<Target>,
    pub variants: Vec<Variant>,
    pub population_size: usize,
    pub k: usize,
    pub betas: Vec<f64>,
    pub beta_is_variance: bool,
    pub generations: u64,
    pub seeds: u64,
    pub base_seed: u64,
    pub time_scale: f64,
}

impl Table1Spec {
    /// N = 16384, top-1024, T = 4096, 64 seeds.
    pub fn full() -> Self {
        Self {
            targets: Target::ALL.to_vec(),
            variants: (0..4).map(Variant::standard).collect(),
            population_size: 16384,
            k: 1024,
            betas: DEFAULT_BETA_GRID.to_vec(),
            beta_is_variance: true,
            generations: 4096,
            seeds: 64,
            base_seed: 0,
            time_scale: crate::fitness::DEFAULT_TIME_SCALE,
        }
    }

    /// N = 4096, top-256, T = 2048, 8 seeds.
    pub fn desk() -> Self {
        Self {
            population_size: 4096,
            k: 256,
            generations: 2048,
            seeds: 8,
            ..Self::full()
        }
    }

    pub fn grid(&self, target: Target) -> GridSpec {
        GridSpec {
            task: FitnessTask::TimeSeries {
                target,
                time_scale: self.time_scale,
            },
            variants: self.variants.clone(),
            population_size: self.population_size,
            ks: vec![self.k],
            betas: self.betas.clone(),
            beta_is_variance: self.beta_is_variance,
            generations: self.generations,
            seeds: self.seeds,
            base_seed: self.base_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaScore {
    pub beta: f64,
    /// Mean over seeds of each run's mean prediction error.
    pub mean_error: f64,
    pub sem_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Cell {
    pub target: Target,
    pub variant: Variant,
    /// Sorted by ascending beta.
    pub per_beta: Vec<BetaScore>,
    pub best_beta: f64,
    pub best_error: f64,
}

#[derive(Debug, Clone)]
pub struct Table1Result {
    pub cells: Vec<Table1Cell>,
    pub records: Vec<RunRecord>,
}

impl Table1Result {
    pub fn cell(&self, target: Target, variant: Variant) -> Option<&Table1Cell> {
        self.cells.iter().find(|c| c.target == target && c.variant == variant)
    }

    /// Variant with the lowest tuned error for `target` (lowest order on ties).
    pub fn best_variant(&self, target: Target) -> Option<&Table1Cell> {
        self.cells
            .iter()
            .filter(|c| c.target == target)
            .min_by(|a, b| a.best_error.total_cmp(&b.best_error).then(a.variant.cmp(&b.variant)))
    }
}

/// Tunes beta per (target, variant) from finished runs.
pub fn table1_cells(records: &[RunRecord]) -> Vec<Table1Cell> {
    let mut scored: Vec<(Target, Variant, f64, u64, f64)> = records
        .iter()
        .filter_map(|r| {
            let target = r.spec.task.target()?;
            Some((target, r.spec.variant, r.spec.beta, r.spec.seed, r.mean_pred_error()?))
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });

    let mut cells = Vec::new();
    for cell in scored.chunk_by(|a, b| a.0 == b.0 && a.1 == b.1) {
        let per_beta: Vec<BetaScore> = cell
            .chunk_by(|a, b| a.2 == b.2)
            .map(|runs| {
                let errors: Vec<f64> = runs.iter().map(|r| r.4).collect();
                BetaScore {
                    beta: runs[0].2,
                    mean_error: stats::mean(&errors),
                    sem_error: stats::sem(&errors),
                }
            })
            .collect();
        // strict `<` keeps the smaller beta on ties
        let best = per_beta
            .iter()
            .fold(per_beta[0], |acc, s| if s.mean_error < acc.mean_error { *s } else { acc });
        cells.push(Table1Cell {
            target: cell[0].0,
            variant: cell[0].1,
            per_beta,
            best_beta: best.beta,
            best_error: best.mean_error,
        });
    }
    cells
}

pub fn run_table1(spec: &Table1Spec) -> Result<Table1Result> {
    if spec.targets.is_empty() {
        return Err(Error::Validation("at least one target is required".into()));
    }
    let mut records = Vec::new();
    for &target in &spec.targets {
        records.extend(run_grid(&spec.grid(target))?);
    }
    Ok(Table1Result {
        cells: table1_cells(&records),
        records,
    })
}

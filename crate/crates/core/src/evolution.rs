//! Genomes with a cascade of additive meta-parameters, top-k truncation
//! selection and the generation step.
//!
//! A genome of meta-order `n` holds `n + 1` reals. Entry 0 is the value the
//! fitness looks at; entry `i + 1` is added to entry `i` on every mutation, so
//! the highest entry drives the one below it, which drives the one below that,
//! and so on down to entry 0.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::NoiseSource;

/// Slots below this count are stepped on the calling thread.
const PAR_MIN_SLOTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    params: Vec<f64>,
}

impl Genome {
    pub fn zeros(order: usize) -> Self {
        Self {
            params: vec![0.0; order + 1],
        }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Contract("a genome needs at least one parameter".into()));
        }
        if let Some(index) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { params })
    }

    /// Highest meta-parameter index `n`.
    pub fn order(&self) -> usize {
        self.params.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Applies one mutation with the given raw standard-normal draws.
    pub fn mutate(&self, noise: &[f64], cfg: &MutationConfig) -> Result<Genome> {
        if noise.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "noise has {} entries but the genome has {}",
                noise.len(),
                self.params.len()
            )));
        }
        let mut out = vec![0.0; self.params.len()];
        mutate_slice(&self.params, noise, cfg.sigma(), cfg.self_referential, &mut out);
        if let Some(index) = out.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Genome { params: out })
    }
}

/// Core update shared by `Genome::mutate` and the population step.
#[inline]
pub(crate) fn mutate_slice(
    src: &[f64],
    noise: &[f64],
    sigma: f64,
    self_referential: bool,
    dst: &mut [f64],
) {
    let n = src.len() - 1;
    for i in 0..n {
        dst[i] = src[i] + src[i + 1] + sigma * noise[i];
    }
    dst[n] = if self_referential {
        src[n] + src[n] + sigma * noise[n]
    } else {
        src[n] + sigma * noise[n]
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutationConfig {
    pub beta: f64,
    pub self_referential: bool,
    /// When set, `beta` is the noise variance; otherwise it is the standard deviation.
    pub beta_is_variance: bool,
}

impl MutationConfig {
    pub fn new(beta: f64, self_referential: bool, beta_is_variance: bool) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Validation(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(Self {
            beta,
            self_referential,
            beta_is_variance,
        })
    }

    /// Standard mode, beta read as a variance.
    pub fn standard(beta: f64) -> Result<Self> {
        Self::new(beta, false, true)
    }

    /// Multiplier applied to each raw standard-normal draw.
    pub fn sigma(&self) -> f64 {
        if self.beta_is_variance {
            self.beta.sqrt()
        } else {
            self.beta
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub population_size: usize,
}

impl SelectionConfig {
    pub fn new(k: usize, population_size: usize) -> Result<Self> {
        if population_size == 0 {
            return Err(Error::Validation("population_size must be at least 1".into()));
        }
        if k == 0 || k > population_size {
            return Err(Error::Validation(format!(
                "k must be in 1..=population_size ({population_size}), got {k}"
            )));
        }
        if !population_size.is_multiple_of(k) {
            return Err(Error::Validation(format!(
                "population_size must be divisible by k (population_size = {population_size}, k = {k})"
            )));
        }
        Ok(Self { k, population_size })
    }

    /// Offspring produced per survivor.
    pub fn clones_per_survivor(&self) -> usize {
        self.population_size / self.k
    }
}

/// Fixed-size population stored as one flat row-major parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    width: usize,
    params: Vec<f64>,
    lineage: Vec<u32>,
    generation: u64,
}

impl Population {
    /// Lineage tags default to the slot index.
    pub fn from_genomes(members: Vec<Genome>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Contract("a population needs at least one member".into()))?;
        let width = first.params.len();
        if members.iter().any(|g| g.params.len() != width) {
            return Err(Error::Contract("all members must share one meta-order".into()));
        }
        let lineage = (0..members.len() as u32).collect();
        let params = members.into_iter().flat_map(|g| g.params).collect();
        Ok(Self {
            width,
            params,
            lineage,
            generation: 0,
        })
    }

    pub fn with_lineage(mut self, lineage: Vec<u32>) -> Result<Self> {
        if lineage.len() != self.len() {
            return Err(Error::Contract(format!(
                "{} lineage tags for {} members",
                lineage.len(),
                self.len()
            )));
        }
        self.lineage = lineage;
        Ok(self)
    }

    pub fn with_generation(mut self, generation: u64) -> Self {
        self.generation = generation;
        self
    }

    pub fn len(&self) -> usize {
        self.lineage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lineage.is_empty()
    }

    pub fn order(&self) -> usize {
        self.width - 1
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn lineage(&self) -> &[u32] {
        &self.lineage
    }

    pub fn member(&self, slot: usize) -> &[f64] {
        &self.params[slot * self.width..(slot + 1) * self.width]
    }

    pub fn member_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.params[slot * self.width..(slot + 1) * self.width]
    }

    pub fn genome(&self, slot: usize) -> Genome {
        Genome {
            params: self.member(slot).to_vec(),
        }
    }

    pub fn members(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.params.chunks_exact(self.width)
    }

    /// Entry 0 of every member, in slot order.
    pub fn base_values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.params.iter().step_by(self.width).copied()
    }

    /// Number of members carrying `tag`.
    pub fn count_lineage(&self, tag: u32) -> usize {
        self.lineage.iter().filter(|&&t| t == tag).count()
    }
}

/// All-zero genomes of the given order, generation 0, lineage tag = slot.
pub fn init_population(order: usize, sel: &SelectionConfig) -> Population {
    let n = sel.population_size;
    Population {
        width: order + 1,
        params: vec![0.0; n * (order + 1)],
        lineage: (0..n as u32).collect(),
        generation: 0,
    }
}

#[inline]
fn rank_desc(fitnesses: &[f64], a: usize, b: usize) -> Ordering {
    fitnesses[b]
        .partial_cmp(&fitnesses[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// Indices of the `k` largest fitnesses, best first. Ties go to the lower index.
pub fn select_top_k(fitnesses: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = fitnesses.len();
    if k == 0 || k > n {
        return Err(Error::Contract(format!("cannot select top {k} of {n} members")));
    }
    if let Some(i) = fitnesses.iter().position(|f| !f.is_finite()) {
        return Err(Error::Contract(format!("fitness of member {i} is not finite")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_desc(fitnesses, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank_desc(fitnesses, a, b));
    Ok(idx)
}

/// Parent index for every offspring slot: slot `s` descends from
/// `survivors[s * k / N]`.
pub fn offspring_parents(survivors: &[usize], population_size: usize) -> Vec<usize> {
    let k = survivors.len();
    (0..population_size)
        .map(|s| survivors[s * k / population_size])
        .collect()
}

fn check_step_inputs(pop: &Population, fitnesses: &[f64], sel: &SelectionConfig) -> Result<()> {
    if pop.len() != sel.population_size {
        return Err(Error::Contract(format!(
            "population has {} members but the selection config expects {}",
            pop.len(),
            sel.population_size
        )));
    }
    if fitnesses.len() != pop.len() {
        return Err(Error::Contract(format!(
            "{} fitness values for {} members",
            fitnesses.len(),
            pop.len()
        )));
    }
    Ok(())
}

/// Select, replicate and mutate into `next`, reusing its buffers.
/// Returns the survivor indices (best first).
pub fn step_generation_into<N: NoiseSource + ?Sized>(
    pop: &Population,
    fitnesses: &[f64],
    sel: &SelectionConfig,
    mutation: &MutationConfig,
    noise: &N,
    next: &mut Population,
) -> Result<Vec<usize>> {
    check_step_inputs(pop, fitnesses, sel)?;
    let survivors = select_top_k(fitnesses, sel.k)?;

    let width = pop.width;
    let n = pop.len();
    let k = sel.k;
    let generation = pop.generation + 1;
    let sigma = mutation.sigma();
    let self_ref = mutation.self_referential;

    next.width = width;
    next.params.resize(n * width, 0.0);
    next.lineage.resize(n, 0);
    next.generation = generation;

    let fill_slot = |buf: &mut Vec<f64>, s: usize, dst: &mut [f64], tag: &mut u32| {
        let parent = survivors[s * k / n];
        noise.fill(generation, s, buf);
        mutate_slice(pop.member(parent), buf, sigma, self_ref, dst);
        *tag = pop.lineage[parent];
    };

    if n >= PAR_MIN_SLOTS && rayon::current_num_threads() > 1 {
        next.params
            .par_chunks_mut(width)
            .zip(next.lineage.par_iter_mut())
            .enumerate()
            .with_min_len(PAR_MIN_SLOTS / 2)
            .for_each_init(
                || vec![0.0; width],
                |buf, (s, (dst, tag))| fill_slot(buf, s, dst, tag),
            );
    } else {
        let mut buf = vec![0.0; width];
        for (s, (dst, tag)) in next
            .params
            .chunks_mut(width)
            .zip(next.lineage.iter_mut())
            .enumerate()
        {
            fill_slot(&mut buf, s, dst, tag);
        }
    }

    if let Some(pos) = next.params.iter().position(|p| !p.is_finite()) {
        return Err(Error::Overflow {
            generation,
            slot: pos / width,
        });
    }
    Ok(survivors)
}

/// One generation: select the top k, clone each survivor N/k times, mutate
/// every offspring with noise addressed at `(t + 1, slot, param)`.
pub fn step_generation<N: NoiseSource + ?Sized>(
    pop: &Population,
    fitnesses: &[f64],
    sel: &SelectionConfig,
    mutation: &MutationConfig,
    noise: &N,
) -> Result<Population> {
    let mut next = Population {
        width: pop.width,
        params: Vec::with_capacity(pop.params.len()),
        lineage: Vec::with_capacity(pop.len()),
        generation: pop.generation,
    };
    step_generation_into(pop, fitnesses, sel, mutation, noise, &mut next)?;
    Ok(next)
}

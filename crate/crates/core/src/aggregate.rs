//! Per-generation mean / SEM across seeds.
//!
//! Input runs are grouped by [`CellKey`] and sorted by seed before reduction,
//! so the output does not depend on the order runs were produced in.

use std::cmp::Ordering;

use serde::Serialize;

use crate::stats;

/// Everything that identifies an experiment cell except the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellKey {
    pub task: String,
    /// Empty for the numeric task.
    pub target: String,
    pub order: usize,
    pub self_ref: bool,
    pub beta: f64,
    pub k: usize,
    pub pop: usize,
}

impl CellKey {
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.task
            .cmp(&other.task)
            .then_with(|| self.target.cmp(&other.target))
            .then_with(|| self.self_ref.cmp(&other.self_ref))
            .then_with(|| self.order.cmp(&other.order))
            .then_with(|| self.beta.total_cmp(&other.beta))
            .then_with(|| other.k.cmp(&self.k))
            .then_with(|| self.pop.cmp(&other.pop))
    }
}

/// One seed's curves. `best_fitness[j]` belongs to generation `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub key: CellKey,
    pub seed: u64,
    pub best_fitness: Vec<f64>,
    pub pred_error: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub generation: u64,
    pub n_seeds: usize,
    pub mean_best_fitness: f64,
    pub sem_best_fitness: f64,
    pub mean_pred_error: Option<f64>,
    pub sem_pred_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub key: CellKey,
    pub seeds: Vec<u64>,
    /// Rows stop at the shortest seed's curve, so every row covers all seeds.
    pub rows: Vec<AggregateRow>,
}

impl AggregateCurve {
    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_best_fitness).collect()
    }

    pub fn sems(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sem_best_fitness).collect()
    }
}

/// Groups runs by cell and reduces each generation across seeds.
pub fn aggregate(records: &[SeriesRecord]) -> Vec<AggregateCurve> {
    let mut sorted: Vec<&SeriesRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp_key(&b.key).then(a.seed.cmp(&b.seed)));

    let mut curves = Vec::new();
    for group in sorted.chunk_by(|a, b| a.key.cmp_key(&b.key) == Ordering::Equal) {
        let len = group.iter().map(|r| r.best_fitness.len()).min().unwrap_or(0);
        let has_error = group.iter().all(|r| r.pred_error.is_some());
        let mut rows = Vec::with_capacity(len);
        let mut fit_col = Vec::with_capacity(group.len());
        let mut err_col = Vec::with_capacity(group.len());
        for j in 0..len {
            fit_col.clear();
            fit_col.extend(group.iter().map(|r| r.best_fitness[j]));
            let (mean_err, sem_err) = if has_error {
                err_col.clear();
                err_col.extend(group.iter().map(|r| r.pred_error.as_ref().unwrap()[j]));
                (Some(stats::mean(&err_col)), Some(stats::sem(&err_col)))
            } else {
                (None, None)
            };
            rows.push(AggregateRow {
                generation: j as u64 + 1,
                n_seeds: group.len(),
                mean_best_fitness: stats::mean(&fit_col),
                sem_best_fitness: stats::sem(&fit_col),
                mean_pred_error: mean_err,
                sem_pred_error: sem_err,
            });
        }
        curves.push(AggregateCurve {
            key: group[0].key.clone(),
            seeds: group.iter().map(|r| r.seed).collect(),
            rows,
        });
    }
    curves
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(order: usize) -> CellKey {
        CellKey {
            task: "numeric".into(),
            target: String::new(),
            order,
            self_ref: false,
            beta: 1.0,
            k: 2,
            pop: 8,
        }
    }

    fn rec(order: usize, seed: u64, ys: &[f64]) -> SeriesRecord {
        SeriesRecord {
            key: key(order),
            seed,
            best_fitness: ys.to_vec(),
            pred_error: None,
        }
    }

    #[test]
    fn groups_and_reduces() {
        let recs = vec![
            rec(1, 0, &[1.0, 2.0, 3.0]),
            rec(0, 0, &[0.0, 0.0]),
            rec(1, 1, &[3.0, 4.0]),
        ];
        let curves = aggregate(&recs);
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0].key.order, 0);
        let c1 = &curves[1];
        assert_eq!(c1.seeds, vec![0, 1]);
        assert_eq!(c1.rows.len(), 2);
        assert_eq!(c1.means(), vec![2.0, 3.0]);
        assert_eq!(c1.sems(), vec![1.0, 1.0]);
    }

    #[test]
    fn seed_order_does_not_matter() {
        let ys = |s: u64| -> Vec<f64> { (0..5).map(|j| (s as f64 * 0.1 + j as f64).sin()).collect() };
        let forward: Vec<SeriesRecord> = (0..7).map(|s| rec(2, s, &ys(s))).collect();
        let mut backward = forward.clone();
        backward.reverse();
        backward.swap(1, 4);
        assert_eq!(aggregate(&forward), aggregate(&backward));
    }
}

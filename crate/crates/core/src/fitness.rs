//! Fitness functions: the numeric task (fitness is entry 0) and one-step
//! time-series forecasting against a fixed target curve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Generations per unit of target-function time.
pub const DEFAULT_TIME_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    /// f(u) = u
    #[serde(rename = "t")]
    Linear,
    /// f(u) = u²
    #[serde(rename = "t2")]
    Quadratic,
    /// f(u) = sin(u)
    #[serde(rename = "sin")]
    Sine,
    /// f(u) = sin(u·sin(u))
    #[serde(rename = "tsint")]
    SineOfTSineT,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::Linear,
        Target::Quadratic,
        Target::Sine,
        Target::SineOfTSineT,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Target::Linear => "t",
            Target::Quadratic => "t2",
            Target::Sine => "sin",
            Target::SineOfTSineT => "tsint",
        }
    }

    /// The target function evaluated at already-rescaled time `u`.
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Target::Linear => u,
            Target::Quadratic => u * u,
            Target::Sine => u.sin(),
            Target::SineOfTSineT => (u * u.sin()).sin(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "t" => Ok(Target::Linear),
            "t2" => Ok(Target::Quadratic),
            "sin" => Ok(Target::Sine),
            "tsint" => Ok(Target::SineOfTSineT),
            other => Err(Error::config(
                "target",
                format!("unknown target `{other}` (expected t, t2, sin or tsint)"),
            )),
        }
    }
}

/// `target(generation / time_scale)`.
pub fn target_value(target: Target, generation: u64, time_scale: f64) -> f64 {
    target.eval(generation as f64 / time_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessTask {
    Numeric,
    TimeSeries { target: Target, time_scale: f64 },
}

impl FitnessTask {
    pub fn time_series(target: Target) -> Self {
        FitnessTask::TimeSeries {
            target,
            time_scale: DEFAULT_TIME_SCALE,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if let FitnessTask::TimeSeries { time_scale, .. } = self {
            if !(time_scale.is_finite() && *time_scale > 0.0) {
                return Err(Error::Validation(format!(
                    "time_scale must be positive, got {time_scale}"
                )));
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FitnessTask::Numeric => "numeric",
            FitnessTask::TimeSeries { .. } => "timeseries",
        }
    }

    pub fn target(&self) -> Option<Target> {
        match self {
            FitnessTask::Numeric => None,
            FitnessTask::TimeSeries { target, .. } => Some(*target),
        }
    }

    /// Target value at `generation`, if the task has one.
    pub fn target_value(&self, generation: u64) -> Option<f64> {
        match *self {
            FitnessTask::Numeric => None,
            FitnessTask::TimeSeries { target, time_scale } => {
                Some(target_value(target, generation, time_scale))
            }
        }
    }

    /// Fitness from a genome's entry 0. Higher entries never matter.
    #[inline]
    pub fn fitness_of_base(&self, base: f64, generation: u64) -> f64 {
        match *self {
            FitnessTask::Numeric => base,
            FitnessTask::TimeSeries { target, time_scale } => {
                -(target_value(target, generation, time_scale) - base).abs()
            }
        }
    }

    pub fn evaluate(&self, params: &[f64], generation: u64) -> f64 {
        self.fitness_of_base(params[0], generation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn target_examples() {
        assert_eq!(target_value(Target::Linear, 0, 100.0), 0.0);
        assert_eq!(target_value(Target::Quadratic, 100, 100.0), 1.0);
        // sin(1.57 sin 1.57) = 0.999999682535301656... (30-digit reference)
        let v = target_value(Target::SineOfTSineT, 157, 100.0);
        assert!((v - 0.999_999_682_535_301_7).abs() < 1e-15, "{v}");
    }

    #[test]
    fn target_names_round_trip() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert!(matches!("cos".parse::<Target>(), Err(Error::Config { .. })));
    }

    #[test]
    fn fitness_examples() {
        assert_eq!(FitnessTask::Numeric.evaluate(&[3.5, 9.0], 0), 3.5);
        let lin = FitnessTask::time_series(Target::Linear);
        assert_eq!(lin.evaluate(&[1.0, 4.0, -2.0], 100), 0.0);
        let f = lin.evaluate(&[0.6], 100);
        assert!((f + 0.4).abs() < 1e-15, "{f}");
    }

    #[test]
    fn rejects_non_positive_time_scale() {
        let bad = FitnessTask::TimeSeries {
            target: Target::Sine,
            time_scale: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(FitnessTask::time_series(Target::Sine).validate().is_ok());
    }

    proptest! {
        #[test]
        fn time_series_fitness_is_non_positive(base in -1e6f64..1e6, t in 0u64..10_000, ti in 0usize..4) {
            let task = FitnessTask::time_series(Target::ALL[ti]);
            let f = task.evaluate(&[base], t);
            prop_assert!(f <= 0.0);
            let exact = task.target_value(t).unwrap();
            prop_assert_eq!(task.evaluate(&[exact], t), 0.0);
        }

        #[test]
        fn numeric_fitness_ignores_higher_orders(
            base in -1e6f64..1e6,
            rest in proptest::collection::vec(-1e6f64..1e6, 0..5),
            t in 0u64..100,
        ) {
            let mut params = vec![base];
            params.extend(rest);
            prop_assert_eq!(FitnessTask::Numeric.evaluate(&params, t), base);
        }
    }
}

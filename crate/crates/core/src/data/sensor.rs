//! Synthetic ten-sensor data.
//!
//! Benign rows sit inside every sensor's normal range and pass every binary
//! check. Anomalous rows violate a random nonempty subset of the *planted*
//! sensors: continuous readings are pushed outside their range by a margin of
//! 10%..100% of the range width, binary checks are flipped to 0. Sensors that
//! are not planted carry no label signal.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorRange {
    /// Normal readings lie in `[lo, hi]`.
    Continuous { lo: f64, hi: f64 },
    /// Pass/fail check; 1 is normal.
    Check,
}

impl SensorRange {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            SensorRange::Continuous { lo, hi } => (lo..=hi).contains(&v),
            SensorRange::Check => v == 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SensorFeature {
    pub name: &'static str,
    pub range: SensorRange,
}

const fn cont(name: &'static str, lo: f64, hi: f64) -> SensorFeature {
    SensorFeature {
        name,
        range: SensorRange::Continuous { lo, hi },
    }
}

const fn check(name: &'static str) -> SensorFeature {
    SensorFeature {
        name,
        range: SensorRange::Check,
    }
}

pub const SENSOR_FEATURES: [SensorFeature; 10] = [
    cont("Formality", 1.0, 10.0),
    check("Location"),
    cont("Frequency", 1.0, 10.0),
    cont("Speed", 50.0, 90.0),
    check("Correlation"),
    cont("Lane Alignment", 1.0, 3.0),
    cont("Headway Time", 0.3, 0.95),
    cont("Protocol", 1.0, 10000.0),
    cont("Plausibility", 50.0, 200.0),
    check("Consistency"),
];

/// Location, Correlation, Lane Alignment, Protocol, Consistency.
pub const DEFAULT_PLANTED: [usize; 5] = [1, 4, 5, 7, 9];

/// Number of range predicates a row violates.
pub fn violations(row: &[f64]) -> usize {
    SENSOR_FEATURES
        .iter()
        .zip(row)
        .filter(|(f, &v)| !f.range.contains(v))
        .count()
}

#[derive(Debug, Clone)]
pub struct SensorGenerator {
    pub n: usize,
    pub anomaly_fraction: f64,
    pub seed: u64,
    pub planted: Vec<usize>,
}

impl SensorGenerator {
    pub fn new(n: usize, anomaly_fraction: f64, seed: u64) -> Self {
        Self {
            n,
            anomaly_fraction,
            seed,
            planted: DEFAULT_PLANTED.to_vec(),
        }
    }

    pub fn with_planted(mut self, planted: Vec<usize>) -> Self {
        self.planted = planted;
        self
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "anomaly_fraction must lie in (0, 1), got {}",
                self.anomaly_fraction
            )));
        }
        let n_anomalous = (self.n as f64 * self.anomaly_fraction).round() as usize;
        if n_anomalous == 0 || n_anomalous == self.n {
            return Err(Error::InvalidConfig(format!(
                "n * anomaly_fraction rounds to {n_anomalous}; both classes must be present"
            )));
        }
        let mut planted = self.planted.clone();
        planted.sort_unstable();
        planted.dedup();
        if planted.is_empty() || planted.iter().any(|&j| j >= SENSOR_FEATURES.len()) {
            return Err(Error::InvalidConfig(format!(
                "planted sensors must be a nonempty subset of 0..10, got {:?}",
                self.planted
            )));
        }

        let mut rng = seed::derived_rng(self.seed, &[seed::tag("sensor")]);
        let mut labels: Vec<u32> = (0..self.n).map(|i| u32::from(i < n_anomalous)).collect();
        labels.shuffle(&mut rng);

        let rows = labels
            .iter()
            .map(|&label| {
                let mut row: Vec<f64> = SENSOR_FEATURES
                    .iter()
                    .map(|f| match f.range {
                        SensorRange::Continuous { lo, hi } => rng.random_range(lo..=hi),
                        SensorRange::Check => 1.0,
                    })
                    .collect();
                if label == 1 {
                    let chosen = loop {
                        let pick: Vec<usize> = planted
                            .iter()
                            .copied()
                            .filter(|_| rng.random_bool(0.5))
                            .collect();
                        if !pick.is_empty() {
                            break pick;
                        }
                    };
                    for j in chosen {
                        row[j] = match SENSOR_FEATURES[j].range {
                            SensorRange::Continuous { lo, hi } => {
                                let width = hi - lo;
                                let margin = rng.random_range(0.1 * width..=width);
                                if rng.random_bool(0.5) {
                                    lo - margin
                                } else {
                                    hi + margin
                                }
                            }
                            SensorRange::Check => 0.0,
                        };
                    }
                }
                row
            })
            .collect();
        Dataset::new(FeatureSchema::sensor(), rows, labels)
    }
}

pub fn generate_sensor_dataset(n: usize, anomaly_fraction: f64, seed: u64) -> Result<Dataset> {
    SensorGenerator::new(n, anomaly_fraction, seed).generate()
}

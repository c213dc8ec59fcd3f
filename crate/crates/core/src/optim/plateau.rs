use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduce-on-plateau settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    /// Multiplier applied to the learning rate on a plateau.
    pub factor: f64,
    /// Non-improving steps tolerated before shrinking.
    pub patience: usize,
    /// Relative improvement over the best loss that counts as progress.
    pub threshold: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { factor: 0.5, patience: 30, threshold: 1e-4 }
    }
}

impl PlateauConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::Usage(format!("plateau factor {} not in (0, 1)", self.factor)));
        }
        if self.patience == 0 {
            return Err(Error::Usage("plateau patience must be at least 1".into()));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(Error::Usage("plateau threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    config: PlateauConfig,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(config: PlateauConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, best: f64::INFINITY, stale: 0 })
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Feed the latest loss and get the learning rate to use next. After
    /// `patience` consecutive steps without improvement the rate shrinks by
    /// `factor` and the counter restarts.
    pub fn update(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best * (1.0 - self.config.threshold) || self.best == f64::INFINITY {
            self.best = loss;
            self.stale = 0;
            return lr;
        }
        self.stale += 1;
        if self.stale >= self.config.patience {
            self.stale = 0;
            lr * self.config.factor
        } else {
            lr
        }
    }
}

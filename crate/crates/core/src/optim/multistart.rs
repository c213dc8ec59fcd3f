use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, PlateauConfig, PlateauScheduler};
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// A differentiable scalar function of a real vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Value at `x`; writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Evaluate stacked points (row-major, `dim` columns). Implementations
    /// that override this must give every row exactly what
    /// [`value_grad`](Self::value_grad) gives for that point alone.
    fn value_grad_rows(&self, xs: &[f64], grads: &mut [f64], values: &mut [f64]) {
        let d = self.dim();
        for ((x, g), v) in xs.chunks_exact(d).zip(grads.chunks_exact_mut(d)).zip(values) {
            *v = self.value_grad(x, g);
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartConfig {
    pub restarts: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub scheduler: Option<PlateauConfig>,
    /// Record the loss every `record_stride` evaluations (the final
    /// evaluation is always recorded).
    pub record_stride: usize,
    pub seed: u64,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self { restarts: 10, steps: 1000, learning_rate: 0.01, scheduler: None, record_stride: 1, seed: 0 }
    }
}

impl MultiStartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Usage("at least one restart is required".into()));
        }
        if self.steps == 0 {
            return Err(Error::Usage("at least one optimization step is required".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Usage(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.record_stride == 0 {
            return Err(Error::Usage("record stride must be at least 1".into()));
        }
        if let Some(s) = &self.scheduler {
            s.validate()?;
        }
        Ok(())
    }

    /// Seed of restart `index`. Seeds of the first `k` restarts do not
    /// depend on the total restart count.
    pub fn restart_seed(&self, index: usize) -> u64 {
        seed::derive(self.seed, &[index as u64])
    }
}

/// History of one local optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub seed: u64,
    pub record_stride: usize,
    /// Loss at evaluations `0, stride, 2 * stride, ...`, plus the last one.
    pub losses: Vec<f64>,
    /// Loss at the final iterate; equals the last recorded loss.
    pub final_loss: f64,
    /// The final iterate.
    pub params: Vec<f64>,
}

impl RestartTrace {
    pub fn is_finite(&self) -> bool {
        self.final_loss.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartOutcome {
    pub best_params: Vec<f64>,
    pub best_loss: f64,
    pub best_restart: usize,
    pub traces: Vec<RestartTrace>,
}

/// Standard normal initial guesses.
pub fn standard_normal_sampler(rng: &mut Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Run one Adam descent per start, all in lockstep so that `eval` sees
/// every live iterate at once.
///
/// `eval(xs, grads, values)` receives the stacked iterates and must fill
/// one gradient row and one value per start. Each run performs `steps`
/// updates and `steps + 1` evaluations; a run whose loss or gradient turns
/// non-finite is frozen with that loss. Runs never interact, so the
/// outcome of each is independent of the others.
pub fn run_restarts<F>(
    dim: usize,
    starts: Vec<(u64, Vec<f64>)>,
    cfg: &MultiStartConfig,
    mut eval: F,
) -> Result<Vec<RestartTrace>>
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]),
{
    if cfg.steps == 0 || cfg.record_stride == 0 {
        cfg.validate()?;
    }
    let n = starts.len();
    let mut xs = Vec::with_capacity(n * dim);
    let mut seeds = Vec::with_capacity(n);
    for (seed, x0) in starts {
        if x0.len() != dim {
            return Err(Error::Shape { context: "initial guess", expected: dim, actual: x0.len() });
        }
        seeds.push(seed);
        xs.extend_from_slice(&x0);
    }
    let adam_cfg = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut adam: Vec<AdamState> = (0..n).map(|_| AdamState::new(dim, adam_cfg)).collect();
    let mut schedulers: Vec<Option<PlateauScheduler>> =
        (0..n).map(|_| cfg.scheduler.map(PlateauScheduler::new).transpose()).collect::<Result<_>>()?;
    let mut traces: Vec<RestartTrace> = seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| RestartTrace {
            restart: i,
            seed,
            record_stride: cfg.record_stride,
            losses: Vec::with_capacity(cfg.steps / cfg.record_stride + 2),
            final_loss: f64::NAN,
            params: Vec::new(),
        })
        .collect();
    let mut live = vec![true; n];
    let mut grads = vec![0.0; n * dim];
    let mut values = vec![0.0; n];

    for step in 0..=cfg.steps {
        if !live.iter().any(|&l| l) {
            break;
        }
        eval(&xs, &mut grads, &mut values);
        let last = step == cfg.steps;
        for r in 0..n {
            if !live[r] {
                continue;
            }
            let loss = values[r];
            let row = r * dim..(r + 1) * dim;
            let grad_ok = grads[row.clone()].iter().all(|g| g.is_finite());
            let trace = &mut traces[r];
            if last || step % cfg.record_stride == 0 || !loss.is_finite() || !grad_ok {
                trace.losses.push(loss);
            }
            if last || !loss.is_finite() || !grad_ok {
                trace.final_loss = if grad_ok { loss } else { f64::NAN };
                if !grad_ok && trace.losses.last() != Some(&trace.final_loss) {
                    trace.losses.push(f64::NAN);
                }
                trace.params = xs[row.clone()].to_vec();
                live[r] = false;
                if !last {
                    // Park the frozen iterate at the origin so later
                    // evaluations of the batch stay finite.
                    xs[row].fill(0.0);
                }
                continue;
            }
            adam[r].step(&mut xs[row.clone()], &grads[row])?;
            if let Some(s) = schedulers[r].as_mut() {
                let lr = s.update(loss, adam[r].learning_rate());
                adam[r].set_learning_rate(lr);
            }
        }
    }
    Ok(traces)
}

/// Index of the finite trace with the smallest final loss, lowest index on
/// ties.
pub(crate) fn best_trace(traces: &[RestartTrace]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in traces.iter().enumerate() {
        if !t.is_finite() {
            continue;
        }
        match best {
            Some(b) if traces[b].final_loss <= t.final_loss => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Minimize `objective` from `cfg.restarts` random starts drawn by
/// `sampler` and keep the run with the lowest final loss.
pub fn multistart_minimize<O, S>(objective: &O, sampler: S, cfg: &MultiStartConfig) -> Result<MultiStartOutcome>
where
    O: Objective + ?Sized,
    S: Fn(&mut Rng, usize) -> Vec<f64>,
{
    cfg.validate()?;
    let dim = objective.dim();
    let starts = (0..cfg.restarts)
        .map(|r| {
            let s = cfg.restart_seed(r);
            (s, sampler(&mut seed::rng(s), dim))
        })
        .collect();
    let traces = run_restarts(dim, starts, cfg, |xs, grads, values| objective.value_grad_rows(xs, grads, values))?;
    match best_trace(&traces) {
        Some(b) => Ok(MultiStartOutcome {
            best_params: traces[b].params.clone(),
            best_loss: traces[b].final_loss,
            best_restart: b,
            traces,
        }),
        None => Err(Error::OptimizationFailed { traces }),
    }
}

//! Agent-based integration of the income Langevin equation
//!
//! ```text
//! dy = (C(t) − M y) dt + σ y dW
//! ```
//!
//! in the Ito sense, by Euler–Maruyama with reflection at a small positive
//! floor. With `σ = √2` the stationary law is exactly
//! [`SteadyStateIpdf`](crate::distlib::SteadyStateIpdf) with `C0 = C`.
//!
//! Every agent owns a counter-based stream keyed by `(seed, agent index)`,
//! so trajectories do not depend on how agents are split across threads.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distlib::SteadyStateIpdf;
use crate::error::{Error, Result};
use crate::labour::LabourRate;
use crate::rng::CounterStream;

pub use crate::stats::hill_tail_exponent;

/// Default noise amplitude; makes the simulator's generator match the
/// Fokker–Planck operator with diffusion `y² ∂f/∂y`.
pub const DEFAULT_SIGMA: f64 = std::f64::consts::SQRT_2;
/// `dt · (M + 2)` must stay below this.
pub const MAX_DRIFT_STEP: f64 = 0.1;
/// `dt · σ²` must stay below this.
pub const MAX_NOISE_STEP: f64 = 0.05;

const PAR_MIN_CHUNK: usize = 256;
/// Agents stepped together by one kernel call.
const LANES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub m: f64,
    pub labour_rate: LabourRate,
    pub sigma: f64,
    pub dt: f64,
    pub floor: f64,
}

impl LangevinParams {
    /// Default noise `√2` and reflection floor `1e-9 · min C / M`.
    pub fn new(m: f64, labour_rate: LabourRate, dt: f64) -> Result<Self> {
        let floor = 1e-9 * labour_rate.min_value() / m;
        let p = Self { m, labour_rate, sigma: DEFAULT_SIGMA, dt, floor };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        self.floor = floor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::params(format!("M must be positive, got {}", self.m)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::params(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::params(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::params(format!("reflection floor must be positive, got {}", self.floor)));
        }
        let drift = self.dt * (self.m + 2.0);
        if drift >= MAX_DRIFT_STEP {
            return Err(Error::params(format!(
                "dt·(M+2) = {drift} must be below {MAX_DRIFT_STEP}; use dt < {}",
                MAX_DRIFT_STEP / (self.m + 2.0)
            )));
        }
        let noise = self.dt * self.sigma * self.sigma;
        if noise >= MAX_NOISE_STEP {
            return Err(Error::params(format!(
                "dt·σ² = {noise} must be below {MAX_NOISE_STEP}; use dt < {}",
                MAX_NOISE_STEP / (self.sigma * self.sigma)
            )));
        }
        Ok(())
    }

    /// Deterministic fixed point `C / M` at time `t`.
    pub fn fixed_point(&self, t: f64) -> f64 {
        self.labour_rate.eval(t) / self.m
    }
}

/// How agents are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// i.i.d. draws from a steady-state law, each from the agent's own stream.
    Equilibrium(SteadyStateIpdf<f64>),
    /// Every agent at the same income.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    incomes: Vec<f64>,
    streams: Vec<CounterStream>,
    steps: u64,
    dt: f64,
    seed: u64,
}

impl AgentPopulation {
    pub fn new(n_agents: usize, init: InitialCondition, seed: u64, dt: f64) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::params("population needs at least one agent"));
        }
        let mut streams: Vec<CounterStream> = (0..n_agents as u64).map(|i| CounterStream::new(seed, i)).collect();
        let incomes = match init {
            InitialCondition::Constant(y) => {
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::params(format!("initial income must be positive, got {y}")));
                }
                vec![y; n_agents]
            }
            InitialCondition::Equilibrium(dist) => streams.iter_mut().map(|s| dist.draw(s)).collect(),
        };
        Ok(Self { incomes, streams, steps: 0, dt, seed })
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Identifier of each agent's random stream.
    pub fn stream_ids(&self) -> Vec<u64> {
        self.streams.iter().map(CounterStream::key).collect()
    }

    pub fn mean(&self) -> f64 {
        self.incomes.iter().sum::<f64>() / self.incomes.len() as f64
    }

    /// Advance every agent by `n_steps` Euler–Maruyama steps.
    ///
    /// `pool` selects the worker threads; `None` runs on the calling thread.
    pub fn advance(&mut self, params: &LangevinParams, n_steps: u64, pool: Option<&rayon::ThreadPool>) -> Result<()> {
        if (params.dt - self.dt).abs() > 0.0 {
            return Err(Error::params(format!(
                "population was created with dt = {}, params have dt = {}",
                self.dt, params.dt
            )));
        }
        if n_steps == 0 {
            return Ok(());
        }
        // C at the start of each step (non-anticipating)
        let rates: Vec<f64> =
            (0..n_steps).map(|k| params.labour_rate.eval((self.steps + k) as f64 * params.dt)).collect();
        let kernel = StepKernel {
            m: params.m,
            dt: params.dt,
            noise: params.sigma * params.dt.sqrt(),
            floor: params.floor,
            rates: &rates,
        };
        let start_time = self.time();
        let outcome = match pool {
            None => self
                .incomes
                .chunks_mut(LANES)
                .zip(self.streams.chunks_mut(LANES))
                .enumerate()
                .try_for_each(|(b, (y, s))| kernel.run(b * LANES, y, s, start_time)),
            Some(pool) => pool.install(|| {
                self.incomes
                    .par_chunks_mut(LANES)
                    .zip(self.streams.par_chunks_mut(LANES))
                    .enumerate()
                    .with_min_len(PAR_MIN_CHUNK / LANES)
                    .try_for_each(|(b, (y, s))| kernel.run(b * LANES, y, s, start_time))
            }),
        };
        outcome?;
        self.steps += n_steps;
        Ok(())
    }
}

struct StepKernel<'a> {
    m: f64,
    dt: f64,
    noise: f64,
    floor: f64,
    rates: &'a [f64],
}

impl StepKernel<'_> {
    /// Steps a block of up to `LANES` agents together. Each agent still reads
    /// only its own stream, in order, so blocking never changes a path; it
    /// only lets independent agents overlap in the pipeline.
    #[inline]
    fn run(&self, first: usize, ys: &mut [f64], streams: &mut [CounterStream], start_time: f64) -> Result<()> {
        let lanes = ys.len();
        // local copies keep the block's state out of memory in the hot loop
        let mut v = [0.0; LANES];
        let mut st = [CounterStream::new(0, 0); LANES];
        v[..lanes].copy_from_slice(ys);
        st[..lanes].copy_from_slice(streams);
        for (k, &c) in self.rates.iter().enumerate() {
            for j in 0..lanes {
                let xi: f64 = StandardNormal.sample(&mut st[j]);
                let mut next = v[j] + (c - self.m * v[j]) * self.dt + self.noise * v[j] * xi;
                if !(next > self.floor) {
                    if next.is_nan() {
                        return Err(non_finite(first + j, start_time + k as f64 * self.dt));
                    }
                    while next < self.floor {
                        next = 2.0 * self.floor - next;
                    }
                }
                v[j] = next;
            }
        }
        if let Some(j) = v[..lanes].iter().position(|x| !x.is_finite()) {
            return Err(non_finite(first + j, start_time + self.rates.len() as f64 * self.dt));
        }
        ys.copy_from_slice(&v[..lanes]);
        streams.copy_from_slice(&st[..lanes]);
        Ok(())
    }
}

fn non_finite(agent: usize, t: f64) -> Error {
    Error::numerical(format!("agent {agent} income became non-finite near t = {t}; reduce dt"))
}

/// One Euler–Maruyama step for every agent, returning the new population.
pub fn step(pop: &AgentPopulation, params: &LangevinParams) -> Result<AgentPopulation> {
    let mut next = pop.clone();
    next.advance(params, 1, None)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_agents: usize,
    pub t_end: f64,
    pub init: InitialCondition,
    pub seed: u64,
    /// Sorted times in `[0, t_end]`; empty means only the final state.
    pub snapshot_times: Vec<f64>,
}

/// Builds a worker pool; results never depend on the worker count.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::numerical(format!("cannot start worker pool: {e}")))
}

/// Simulate a population and return snapshots at the requested times.
///
/// Snapshot times are rounded to the nearest whole step.
pub fn run(params: &LangevinParams, cfg: &RunConfig, pool: Option<&rayon::ThreadPool>) -> Result<Vec<AgentPopulation>> {
    params.validate()?;
    if cfg.n_agents == 0 {
        return Err(Error::params("n_agents must be at least 1"));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::params(format!("t_end must be positive, got {}", cfg.t_end)));
    }
    let times: Vec<f64> = if cfg.snapshot_times.is_empty() { vec![cfg.t_end] } else { cfg.snapshot_times.clone() };
    if times.iter().any(|&t| !(0.0..=cfg.t_end).contains(&t)) {
        return Err(Error::params("snapshot times must lie within [0, t_end]"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::params("snapshot times must be sorted"));
    }

    let mut pop = AgentPopulation::new(cfg.n_agents, cfg.init, cfg.seed, params.dt)?;
    let mut snapshots = Vec::with_capacity(times.len());
    for &t in &times {
        let target = (t / params.dt).round() as u64;
        pop.advance(params, target.saturating_sub(pop.steps()), pool)?;
        snapshots.push(pop.clone());
    }
    Ok(snapshots)
}

/// First snapshot time at which the population mean has closed all but `1/e`
/// of its initial gap to `target_mean`, if any.
pub fn relaxation_time(snapshots: &[AgentPopulation], target_mean: f64) -> Option<f64> {
    let first = snapshots.first()?;
    let gap0 = (first.mean() - target_mean).abs();
    let threshold = gap0 * (-1.0_f64).exp();
    snapshots.iter().find(|p| (p.mean() - target_mean).abs() <= threshold).map(AgentPopulation::time)
}

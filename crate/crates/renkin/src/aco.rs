//! Continuous ant-colony estimation of the exchange coefficients.
//!
//! The optimizer keeps a population of `P` candidate coefficient vectors
//! ordered by cost. Each iteration samples `Q` new candidates around
//! rank-weighted population members (one Gaussian kernel per coordinate),
//! then keeps the cheapest `P` of the enlarged set, so the best cost never
//! increases. The cost of a candidate is the squared residual between the
//! closed-form model observables and the measured kidney/bladder series,
//! with the kidney data first corrected for its blood fraction.

use crate::kinetics::{CaseKind, KineticsError, RateConstants};
use crate::synth::{FrameModel, MeasurementSet, SynthError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AcoError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ensemble seeds must be distinct")]
    DuplicateSeeds,
    #[error("ensemble needs seeds for each run: {runs} runs, {seeds} seeds")]
    SeedCount { runs: usize, seeds: usize },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// Optimizer hyperparameters and the fit's data handling knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcoConfig {
    /// Population size P.
    pub pop_size: usize,
    /// New states sampled per iteration, Q.
    pub n_new: usize,
    /// Rank-weight spread q: weights are a Gaussian of deviation q*P over
    /// the ranks, centered at the best.
    pub q: f64,
    /// Kernel deviation scale xi.
    pub xi: f64,
    pub max_iter: usize,
    /// Stop when the population diameter (coordinate sup-distance between
    /// any two members) falls below this.
    pub conv_tol: f64,
    /// Per-coordinate search box; samples are clipped into it.
    pub bounds: [(f64, f64); 6],
    /// Coefficients below this in a reported fit are set to exactly 0; also
    /// the structural tolerance for case switching inside the cost.
    pub threshold: f64,
    /// Blood fraction of the kidney ROI signal.
    pub v_b: f64,
    /// When set, every run of an ensemble starts from the same initial
    /// population, drawn once from this seed.
    pub shared_init_seed: Option<u64>,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self {
            pop_size: 13,
            n_new: derived_sample_count(13),
            q: 0.015,
            xi: 0.4,
            max_iter: 20_000,
            conv_tol: 1e-4,
            bounds: [(0.0, 1.0); 6],
            threshold: 1e-3,
            v_b: 0.2,
            shared_init_seed: None,
        }
    }
}

/// The sample-count rule `Q = floor(P / 2) + 1`.
pub fn derived_sample_count(pop_size: usize) -> usize {
    pop_size / 2 + 1
}

impl AcoConfig {
    /// Default configuration for a population of `p`, with `Q` derived.
    pub fn for_population(p: usize) -> Self {
        Self { pop_size: p, n_new: derived_sample_count(p), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AcoError> {
        if self.pop_size < 2 {
            return Err(AcoError::InvalidConfig("population must have at least 2 states"));
        }
        if self.n_new < 1 {
            return Err(AcoError::InvalidConfig("at least one new state per iteration"));
        }
        if !(self.q > 0.0) || !(self.xi > 0.0) {
            return Err(AcoError::InvalidConfig("q and xi must be positive"));
        }
        if self.max_iter < 1 {
            return Err(AcoError::InvalidConfig("max_iter must be positive"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(AcoError::InvalidConfig("conv_tol must be positive"));
        }
        for (lo, hi) in self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
                return Err(AcoError::InvalidConfig("bounds must satisfy 0 <= lo < hi"));
            }
        }
        if !(self.threshold >= 0.0) {
            return Err(AcoError::InvalidConfig("threshold must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.v_b) {
            return Err(AcoError::InvalidConfig("v_b must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Removes the blood fraction from a measured kidney series:
/// `(C_k - v_b * C_b) / (1 - v_b)` elementwise.
pub fn blood_correction(kidney: &[f64], blood: &[f64], v_b: f64) -> Result<Vec<f64>, AcoError> {
    if kidney.len() != blood.len() {
        return Err(AcoError::LengthMismatch(kidney.len(), blood.len()));
    }
    if !(0.0..1.0).contains(&v_b) {
        return Err(AcoError::InvalidConfig("v_b must lie in [0, 1)"));
    }
    Ok(kidney
        .iter()
        .zip(blood)
        .map(|(k, b)| (k - v_b * b) / (1.0 - v_b))
        .collect())
}

/// The discrepancy functional for one measurement set, prepared once so the
/// optimizer's inner loop only pays for the solve.
pub struct CostFn {
    model: FrameModel,
    target_kidney: Vec<f64>,
    target_bladder: Vec<f64>,
}

impl CostFn {
    pub fn new(data: &MeasurementSet, config: &AcoConfig) -> Result<Self, AcoError> {
        config.validate()?;
        let target_kidney = blood_correction(&data.kidney, &data.blood, config.v_b)?;
        let model = FrameModel::new(&data.schedule, &data.blood, config.threshold)?;
        Ok(Self { model, target_kidney, target_bladder: data.bladder.clone() })
    }

    /// Sum of squared residuals of both observables over all frames.
    pub fn eval(&self, state: &[f64; 6]) -> Result<f64, AcoError> {
        let k = RateConstants::from_vector(*state)?;
        let (kidney, bladder) = self.model.predict(&k)?;
        let sq = |model: &[f64], data: &[f64]| -> f64 {
            model.iter().zip(data).map(|(m, d)| (m - d) * (m - d)).sum()
        };
        Ok(sq(&kidney, &self.target_kidney) + sq(&bladder, &self.target_bladder))
    }

    /// Optimizer-facing evaluation: failures rank strictly worst.
    fn eval_or_inf(&self, state: &[f64; 6]) -> f64 {
        self.eval(state).unwrap_or(f64::INFINITY)
    }

    pub fn model(&self) -> &FrameModel {
        &self.model
    }
}

/// The discrepancy of a coefficient vector against a measurement set.
pub fn cost(k: &RateConstants, data: &MeasurementSet, config: &AcoConfig) -> Result<f64, AcoError> {
    CostFn::new(data, config)?.eval(&k.to_vector())
}

/// A candidate coefficient vector with its cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub state: [f64; 6],
    pub cost: f64,
}

/// A population of candidates, kept sorted by nondecreasing cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Population(Vec<Candidate>);

impl Population {
    /// Orders candidates by cost and keeps the cheapest `keep`.
    pub fn from_candidates(mut members: Vec<Candidate>, keep: usize) -> Self {
        members.sort_by(|x, y| x.cost.total_cmp(&y.cost));
        members.truncate(keep);
        Self(members)
    }

    pub fn members(&self) -> &[Candidate] {
        &self.0
    }

    pub fn best(&self) -> &Candidate {
        &self.0[0]
    }

    /// Largest per-coordinate spread between any two members.
    pub fn diameter(&self) -> f64 {
        (0..6)
            .map(|j| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for c in &self.0 {
                    lo = lo.min(c.state[j]);
                    hi = hi.max(c.state[j]);
                }
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Rank weights: a Gaussian over the normalized rank `(i - 1) / P` with
/// deviation `q * P`, normalized to a selection distribution. Strictly
/// decreasing in rank for any q > 0 (until the far tail underflows f64).
fn rank_weights(pop_size: usize, q: f64) -> Vec<f64> {
    let sd = q * (pop_size * pop_size) as f64;
    let mut w: Vec<f64> = (0..pop_size)
        .map(|i| {
            let z = i as f64 / sd;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Kernel deviation for coordinate `j` around member `l`:
/// `xi / sqrt(P - 1) * sum_p |u_{j,p} - u_{j,l}|`.
///
/// The sqrt keeps the sampling spread slightly above the population's mean
/// absolute deviation at the source setups' xi; dividing by P - 1 outright
/// makes the elitist replacement collapse the population long before it can
/// cross the search box (measured), which the published recoveries rule out.
fn kernel_deviation(members: &[Candidate], l: usize, j: usize, xi: f64) -> f64 {
    let u_l = members[l].state[j];
    let sum: f64 = members.iter().map(|c| (c.state[j] - u_l).abs()).sum();
    xi / ((members.len() - 1) as f64).sqrt() * sum
}

/// Draws the initial population uniformly from the bounds box and orders it
/// by cost.
pub fn init_population(
    cost_fn: &CostFn,
    config: &AcoConfig,
    rng: &mut ChaCha8Rng,
) -> Population {
    let members = (0..config.pop_size)
        .map(|_| {
            let mut state = [0.0; 6];
            for (x, (lo, hi)) in state.iter_mut().zip(config.bounds) {
                *x = lo + (hi - lo) * rng.gen::<f64>();
            }
            Candidate { state, cost: cost_fn.eval_or_inf(&state) }
        })
        .collect();
    Population::from_candidates(members, config.pop_size)
}

/// One optimizer step: samples `Q` new states from the rank-weighted
/// Gaussian kernels (kernel chosen per coordinate), clips them into the
/// bounds box, and keeps the cheapest `P` of the enlarged population.
pub fn aco_iterate<F>(
    pop: &Population,
    config: &AcoConfig,
    cost_fn: F,
    rng: &mut ChaCha8Rng,
) -> Population
where
    F: Fn(&[f64; 6]) -> f64,
{
    let members = pop.members();
    let weights = rank_weights(members.len(), config.q);
    let mut cum = weights.clone();
    for i in 1..cum.len() {
        cum[i] += cum[i - 1];
    }

    let mut enlarged = members.to_vec();
    for _ in 0..config.n_new {
        let mut state = [0.0; 6];
        for (j, x) in state.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            let l = cum.partition_point(|&c| c < u).min(members.len() - 1);
            let s = kernel_deviation(members, l, j, config.xi);
            let z: f64 = rng.sample(StandardNormal);
            let (lo, hi) = config.bounds[j];
            *x = (members[l].state[j] + s * z).clamp(lo, hi);
        }
        enlarged.push(Candidate { state, cost: cost_fn(&state) });
    }
    Population::from_candidates(enlarged, config.pop_size)
}

/// A single optimizer run's outcome. Reported coefficients below the
/// configured threshold are exactly 0, and `cost` is the cost of the
/// thresholded vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub rates: RateConstants,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub case: CaseKind,
}

/// Runs the optimizer to convergence (population diameter below
/// `conv_tol`) or to `max_iter`, thresholds the best state, and reports the
/// matrix case of the thresholded coefficients. Deterministic per seed.
pub fn run_aco(data: &MeasurementSet, config: &AcoConfig, seed: u64) -> Result<FitResult, AcoError> {
    let cost_fn = CostFn::new(data, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = match config.shared_init_seed {
        Some(s) => init_population(&cost_fn, config, &mut ChaCha8Rng::seed_from_u64(s)),
        None => init_population(&cost_fn, config, &mut rng),
    };
    run_from(init, &cost_fn, config, &mut rng)
}

fn run_from(
    init: Population,
    cost_fn: &CostFn,
    config: &AcoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FitResult, AcoError> {
    let mut pop = init;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..config.max_iter {
        pop = aco_iterate(&pop, config, |s| cost_fn.eval_or_inf(s), rng);
        iterations += 1;
        if pop.diameter() < config.conv_tol {
            converged = true;
            break;
        }
    }

    let mut state = pop.best().state;
    for x in &mut state {
        if *x < config.threshold {
            *x = 0.0;
        }
    }
    let rates = RateConstants::from_vector(state)?;
    let cost = cost_fn.eval(&state)?;
    let case = rates.matrix().classify(config.threshold);
    Ok(FitResult { rates, cost, iterations, converged, case })
}

/// Forward-solved observables of one ensemble run, in measurement space
/// (the kidney curve includes the blood fraction `v_b C_b + (1 - v_b)
/// (C_t + C_p)` so it overlays the data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCurves {
    pub kidney: Vec<f64>,
    pub bladder: Vec<f64>,
}

/// Multi-run statistics and per-run reconstructions (confidence strips).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// Per-coefficient mean over runs, after thresholding.
    pub mean: [f64; 6],
    /// Per-coefficient population standard deviation over runs.
    pub std: [f64; 6],
    pub runs: Vec<FitResult>,
    pub strips: Vec<RunCurves>,
    /// Frame times, minutes.
    pub times: Vec<f64>,
    pub kidney_data: Vec<f64>,
    pub bladder_data: Vec<f64>,
}

/// Runs the optimizer once per seed and aggregates coefficient statistics
/// and per-run reconstructed curves. Runs are independent; with the
/// `parallel` feature they execute on a thread pool, with identical output.
pub fn ensemble(
    data: &MeasurementSet,
    config: &AcoConfig,
    n_runs: usize,
    seeds: &[u64],
) -> Result<EnsembleResult, AcoError> {
    if n_runs < 1 || seeds.len() != n_runs {
        return Err(AcoError::SeedCount { runs: n_runs, seeds: seeds.len() });
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(AcoError::DuplicateSeeds);
    }

    #[cfg(feature = "parallel")]
    let runs: Result<Vec<FitResult>, AcoError> =
        seeds.par_iter().map(|&s| run_aco(data, config, s)).collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Result<Vec<FitResult>, AcoError> =
        seeds.iter().map(|&s| run_aco(data, config, s)).collect();
    let runs = runs?;

    let n = runs.len() as f64;
    let mut mean = [0.0; 6];
    for r in &runs {
        for (m, v) in mean.iter_mut().zip(r.rates.to_vector()) {
            *m += v / n;
        }
    }
    let mut std = [0.0; 6];
    for r in &runs {
        for ((s, v), m) in std.iter_mut().zip(r.rates.to_vector()).zip(mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
    }

    let model = FrameModel::new(&data.schedule, &data.blood, config.threshold)?;
    let strips = runs
        .iter()
        .map(|r| {
            let (kid, bladder) = model.predict(&r.rates)?;
            let kidney = kid
                .iter()
                .zip(&data.blood)
                .map(|(m, b)| config.v_b * b + (1.0 - config.v_b) * m)
                .collect();
            Ok(RunCurves { kidney, bladder })
        })
        .collect::<Result<Vec<_>, AcoError>>()?;

    Ok(EnsembleResult {
        mean,
        std,
        runs,
        strips,
        times: data.schedule.times().to_vec(),
        kidney_data: data.kidney.clone(),
        bladder_data: data.bladder.clone(),
    })
}

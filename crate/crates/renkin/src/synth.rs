//! Synthetic experiments and measurement containers.
//!
//! Generates the paper-style pipeline: a gamma-variate blood input curve,
//! the direct solution sampled on an acquisition schedule, Poisson noise on
//! the two observables (kidney sum and bladder), and Poisson error bars for
//! real data.

use crate::kinetics::{
    solve_direct, KineticsError, RateConstants, SampledCurve, TimeGrid, STRUCTURAL_EPS,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("gamma-variate parameters out of range: A >= 0, alpha > 0, beta > 0, t0 >= 0")]
    InvalidGammaParams,
    #[error("schedule times must be finite, strictly increasing, and positive")]
    InvalidSchedule,
    #[error("noise scale must be finite and >= 0, got {0}")]
    InvalidNoiseScale(f64),
    #[error("volume times scale must be positive")]
    ZeroVolume,
    #[error("negative input: {0}")]
    NegativeInput(f64),
    #[error("measurement sequences must share the schedule length")]
    LengthMismatch,
    #[error("measurement values must be finite and nonnegative (found {0})")]
    NegativeValue(f64),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// Parameters of the gamma-variate input function
/// `C_b(t) = A (t - t0)^alpha e^{-(t - t0)/beta}` for `t > t0`, else 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaVariateParams {
    /// Peak scaling A, kBq/mL per min^alpha.
    pub amplitude: f64,
    /// Onset delay t0, min.
    pub delay: f64,
    /// Shape exponent alpha.
    pub shape: f64,
    /// Decay time beta, min.
    pub scale: f64,
}

impl GammaVariateParams {
    pub fn new(amplitude: f64, delay: f64, shape: f64, scale: f64) -> Result<Self, SynthError> {
        let ok = amplitude.is_finite()
            && amplitude >= 0.0
            && delay.is_finite()
            && delay >= 0.0
            && shape.is_finite()
            && shape > 0.0
            && scale.is_finite()
            && scale > 0.0;
        if !ok {
            return Err(SynthError::InvalidGammaParams);
        }
        Ok(Self { amplitude, delay, shape, scale })
    }

    /// The curve value at time `t` (minutes).
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.delay {
            return 0.0;
        }
        let x = t - self.delay;
        self.amplitude * x.powf(self.shape) * (-x / self.scale).exp()
    }

    /// Time of the curve maximum, `t0 + alpha * beta`.
    pub fn peak_time(&self) -> f64 {
        self.delay + self.shape * self.scale
    }
}

impl Default for GammaVariateParams {
    /// Reference input curve used throughout the synthetic experiments.
    fn default() -> Self {
        Self { amplitude: 10.0, delay: 0.2, shape: 2.0, scale: 1.5 }
    }
}

/// Samples the gamma-variate input function on a grid.
pub fn gamma_variate_tac(p: &GammaVariateParams, grid: Arc<TimeGrid>) -> SampledCurve {
    SampledCurve::from_fn(grid, |t| p.eval(t)).expect("gamma variate is finite")
}

/// Acquisition frame midpoint times, minutes. Strictly increasing and
/// positive (frames start after injection at t = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AcquisitionSchedule(Vec<f64>);

impl AcquisitionSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self, SynthError> {
        let ok = !times.is_empty()
            && times[0] > 0.0
            && times.iter().all(|t| t.is_finite())
            && times.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(SynthError::InvalidSchedule);
        }
        Ok(Self(times))
    }

    /// The default 27-frame schedule: frame midpoints for 10 frames of
    /// 0.5 min, 8 of 1 min, and 9 of 4 min (49 min of acquisition).
    pub fn default_27() -> Self {
        let mut times = Vec::with_capacity(27);
        let mut start = 0.0;
        for &(count, width) in &[(10, 0.5), (8, 1.0), (9, 4.0)] {
            for _ in 0..count {
                times.push(start + width / 2.0);
                start += width;
            }
        }
        Self::new(times).expect("default schedule is valid")
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.0.last().expect("schedule is nonempty")
    }
}

impl TryFrom<Vec<f64>> for AcquisitionSchedule {
    type Error = SynthError;
    fn try_from(times: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(times)
    }
}

impl From<AcquisitionSchedule> for Vec<f64> {
    fn from(s: AcquisitionSchedule) -> Self {
        s.0
    }
}

/// Frame-sampled measurements: blood input plus the kidney and bladder
/// observables, with optional per-frame error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub schedule: AcquisitionSchedule,
    pub blood: Vec<f64>,
    pub kidney: Vec<f64>,
    pub bladder: Vec<f64>,
    pub kidney_err: Option<Vec<f64>>,
    pub bladder_err: Option<Vec<f64>>,
}

impl MeasurementSet {
    pub fn new(
        schedule: AcquisitionSchedule,
        blood: Vec<f64>,
        kidney: Vec<f64>,
        bladder: Vec<f64>,
        kidney_err: Option<Vec<f64>>,
        bladder_err: Option<Vec<f64>>,
    ) -> Result<Self, SynthError> {
        let n = schedule.len();
        let lengths_ok = blood.len() == n
            && kidney.len() == n
            && bladder.len() == n
            && kidney_err.as_ref().map_or(true, |e| e.len() == n)
            && bladder_err.as_ref().map_or(true, |e| e.len() == n);
        if !lengths_ok {
            return Err(SynthError::LengthMismatch);
        }
        for seq in [&blood, &kidney, &bladder]
            .into_iter()
            .chain(kidney_err.iter())
            .chain(bladder_err.iter())
        {
            if let Some(&bad) = seq.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(SynthError::NegativeValue(bad));
            }
        }
        Ok(Self { schedule, blood, kidney, bladder, kidney_err, bladder_err })
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }
}

/// The direct model evaluated at acquisition frames.
///
/// Shared by the simulator, the fit cost, and the strip reconstruction: the
/// blood samples (anchored at `C_b(0) = 0`, the injection instant) are
/// interpolated onto a uniform grid of 2000 steps over the acquisition span,
/// the direct problem is solved there, and the observables are read off at
/// the frame times. Simulation and fitting go through the same arithmetic,
/// so a noiseless round trip reproduces the data bit for bit.
#[derive(Debug, Clone)]
pub struct FrameModel {
    frame_times: Vec<f64>,
    tac: SampledCurve,
    eps: f64,
}

/// Internal solve-grid resolution (intervals over the acquisition span).
const MODEL_GRID_INTERVALS: usize = 2000;

impl FrameModel {
    pub fn new(
        schedule: &AcquisitionSchedule,
        blood: &[f64],
        eps: f64,
    ) -> Result<Self, SynthError> {
        if blood.len() != schedule.len() {
            return Err(SynthError::LengthMismatch);
        }
        let grid = Arc::new(
            TimeGrid::uniform(schedule.end(), MODEL_GRID_INTERVALS)
                .map_err(SynthError::Kinetics)?,
        );
        let mut anchor_t = Vec::with_capacity(blood.len() + 1);
        let mut anchor_v = Vec::with_capacity(blood.len() + 1);
        anchor_t.push(0.0);
        anchor_v.push(0.0);
        anchor_t.extend_from_slice(schedule.times());
        anchor_v.extend_from_slice(blood);
        let values = grid
            .times()
            .iter()
            .map(|&t| crate::kinetics::interp_linear(&anchor_t, &anchor_v, t))
            .collect();
        let tac = SampledCurve::new(grid, values).map_err(SynthError::Kinetics)?;
        Ok(Self { frame_times: schedule.times().to_vec(), tac, eps })
    }

    /// Model kidney (`C_t + C_p`) and bladder (`C_u`) values at the frame
    /// times for the given rate constants.
    pub fn predict(&self, k: &RateConstants) -> Result<(Vec<f64>, Vec<f64>), KineticsError> {
        let sol = solve_direct(k, &self.tac, self.eps)?;
        let kidney_grid = sol.kidney_sum();
        let times = self.tac.times();
        let kidney = self
            .frame_times
            .iter()
            .map(|&t| crate::kinetics::interp_linear(times, &kidney_grid, t))
            .collect();
        let bladder = self.frame_times.iter().map(|&t| sol.c_u.interpolate(t)).collect();
        Ok((kidney, bladder))
    }

    /// The resampled blood curve driving the solve.
    pub fn tac(&self) -> &SampledCurve {
        &self.tac
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }
}

/// Scaled Poisson resampling of a nonnegative value: draws
/// `Poisson(scale * v) / scale`. Zero stays exactly zero.
fn poisson_noisy(v: f64, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let draw: f64 = Poisson::new(scale * v).expect("positive mean").sample(rng);
    draw / scale
}

/// Simulates a measurement set: gamma-variate blood samples, direct-model
/// observables at the frames, and Poisson noise on kidney and bladder (the
/// blood samples stay noiseless, as in the source experiments).
/// `noise_scale` is in counts per (kBq/mL); 0 disables noise. Deterministic
/// for a fixed seed; the kidney frames consume random draws first.
pub fn simulate_measurements(
    k: &RateConstants,
    p: &GammaVariateParams,
    schedule: &AcquisitionSchedule,
    noise_scale: f64,
    seed: u64,
) -> Result<MeasurementSet, SynthError> {
    if !noise_scale.is_finite() || noise_scale < 0.0 {
        return Err(SynthError::InvalidNoiseScale(noise_scale));
    }
    let blood: Vec<f64> = schedule.times().iter().map(|&t| p.eval(t)).collect();
    let model = FrameModel::new(schedule, &blood, STRUCTURAL_EPS)?;
    let (mut kidney, mut bladder) = model.predict(k)?;
    if noise_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in kidney.iter_mut() {
            *v = poisson_noisy(*v, noise_scale, &mut rng);
        }
        for v in bladder.iter_mut() {
            *v = poisson_noisy(*v, noise_scale, &mut rng);
        }
    }
    MeasurementSet::new(schedule.clone(), blood, kidney, bladder, None, None)
}

/// Poisson error bar of a concentration: the ROI activity is
/// `concentration * volume * scale` counts, its standard deviation the
/// square root of that, normalized back to concentration units.
pub fn error_bars(concentration: f64, volume: f64, scale: f64) -> Result<f64, SynthError> {
    if !(volume > 0.0) || !(scale > 0.0) {
        return Err(SynthError::ZeroVolume);
    }
    if !concentration.is_finite() || concentration < 0.0 {
        return Err(SynthError::NegativeInput(concentration));
    }
    let norm = volume * scale;
    Ok((concentration * norm).sqrt() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_variate_is_zero_before_onset() {
        let p = GammaVariateParams::default();
        let grid = Arc::new(TimeGrid::uniform(40.0, 400).unwrap());
        let tac = gamma_variate_tac(&p, grid);
        for (&t, &v) in tac.times().iter().zip(tac.values()) {
            if t <= p.delay {
                assert_eq!(v, 0.0);
            }
        }
        // Continuous at the onset.
        assert!(p.eval(p.delay + 1e-9) < 1e-6);
    }

    #[test]
    fn gamma_variate_peak_matches_fine_grid_argmax() {
        let p = GammaVariateParams::new(7.0, 0.5, 2.3, 1.1).unwrap();
        let n = 2_000_000;
        let (mut best_t, mut best_v) = (0.0, f64::MIN);
        for i in 0..=n {
            let t = 20.0 * i as f64 / n as f64;
            let v = p.eval(t);
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
        assert!((best_t - p.peak_time()).abs() < 1e-4, "argmax {best_t} vs {}", p.peak_time());
    }

    #[test]
    fn gamma_variate_zero_amplitude_is_zero() {
        let p = GammaVariateParams::new(0.0, 0.2, 2.0, 1.5).unwrap();
        let grid = Arc::new(TimeGrid::uniform(10.0, 50).unwrap());
        assert!(gamma_variate_tac(&p, grid).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_schedule_has_27_increasing_frames() {
        let s = AcquisitionSchedule::default_27();
        assert_eq!(s.len(), 27);
        assert!(s.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.times()[0], 0.25);
        assert_eq!(s.end(), 47.0);
    }

    #[test]
    fn schedule_rejects_disorder_and_nonpositive_start() {
        assert!(AcquisitionSchedule::new(vec![0.0, 1.0]).is_err());
        assert!(AcquisitionSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(AcquisitionSchedule::new(vec![]).is_err());
        assert!(AcquisitionSchedule::new(vec![0.5, 1.5]).is_ok());
    }

    #[test]
    fn noiseless_simulation_ignores_seed() {
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let p = GammaVariateParams::default();
        let s = AcquisitionSchedule::default_27();
        let a = simulate_measurements(&k, &p, &s, 0.0, 1).unwrap();
        let b = simulate_measurements(&k, &p, &s, 0.0, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 27);
        assert!(a.kidney.iter().any(|&v| v > 0.1));
        assert!(a.bladder.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn simulation_is_reproducible_per_seed() {
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let p = GammaVariateParams::default();
        let s = AcquisitionSchedule::default_27();
        let a = simulate_measurements(&k, &p, &s, 1e3, 42).unwrap();
        let b = simulate_measurements(&k, &p, &s, 1e3, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_measurements(&k, &p, &s, 1e3, 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.blood, c.blood); // blood stays noiseless
    }

    #[test]
    fn zero_value_stays_zero_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(poisson_noisy(0.0, 1e3, &mut rng), 0.0);
    }

    #[test]
    fn noise_is_unbiased_across_seeds() {
        // Poisson(scale * v) / scale has mean v: the empirical mean over many
        // seeds must sit within 3 standard errors of the noiseless value.
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let p = GammaVariateParams::default();
        let s = AcquisitionSchedule::default_27();
        let clean = simulate_measurements(&k, &p, &s, 0.0, 0).unwrap();
        let scale = 1e3;
        let n_seeds = 10_000_u64;
        let mut kidney_sum = vec![0.0; s.len()];
        for seed in 0..n_seeds {
            let noisy = simulate_measurements(&k, &p, &s, scale, seed).unwrap();
            for (acc, v) in kidney_sum.iter_mut().zip(&noisy.kidney) {
                *acc += v;
            }
        }
        for (i, (&sum, &truth)) in kidney_sum.iter().zip(&clean.kidney).enumerate() {
            let mean = sum / n_seeds as f64;
            // Var(Poisson(sv)/s) = v/s; standard error of the mean over seeds.
            let se = (truth / scale / n_seeds as f64).sqrt().max(1e-12);
            assert!(
                (mean - truth).abs() <= 3.0 * se,
                "frame {i}: mean {mean} vs {truth} (se {se})"
            );
        }
    }

    #[test]
    fn error_bars_hand_cases() {
        assert_eq!(error_bars(0.0, 2.0, 5.0).unwrap(), 0.0);
        // activity 100 counts, volume * scale = 10 -> error 1.0
        let e = error_bars(10.0, 2.0, 5.0).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        assert_eq!(error_bars(1.0, 0.0, 5.0).unwrap_err(), SynthError::ZeroVolume);
    }

    #[test]
    fn error_bars_scale_like_inverse_sqrt_volume() {
        // Doubling volume * scale at fixed concentration divides the error
        // by sqrt(2); direct evaluation at the two volumes is the oracle.
        let e1 = error_bars(4.0, 1.0, 100.0).unwrap();
        let e2 = error_bars(4.0, 2.0, 100.0).unwrap();
        assert!((e2 - e1 / 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frame_model_round_trip_is_exact() {
        // The simulator and a fresh FrameModel must produce bit-identical
        // observables from the same blood samples.
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let p = GammaVariateParams::default();
        let s = AcquisitionSchedule::default_27();
        let set = simulate_measurements(&k, &p, &s, 0.0, 0).unwrap();
        let model = FrameModel::new(&s, &set.blood, STRUCTURAL_EPS).unwrap();
        let (kid, bla) = model.predict(&k).unwrap();
        assert_eq!(kid, set.kidney);
        assert_eq!(bla, set.bladder);
    }
}

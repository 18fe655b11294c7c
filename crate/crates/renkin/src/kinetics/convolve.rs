//! Exponential convolution and cumulative integration of sampled curves.
//!
//! Both operations treat a [`SampledCurve`] as the piecewise-linear
//! interpolant of its samples and are exact for that interpolant, so errors
//! never compound along the grid.

use super::{KineticsError, SampledCurve};

/// `(e^x - 1) / x`, accurate near zero.
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// `(e^x - 1 - x) / x^2`, accurate near zero.
fn phi2(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// Convolution of the curve with `e^{lambda t}`:
/// `E(t) = integral_0^t e^{lambda (t - tau)} C(tau) dtau`.
///
/// Each grid interval is advanced with the closed-form update
/// `E(t + h) = e^{lambda h} E(t) + h [C(t) phi1(lambda h) + dC phi2(lambda h)]`,
/// which integrates the linear segment exactly; `E(0) = 0`.
pub fn exp_convolve(lambda: f64, tac: &SampledCurve) -> Result<SampledCurve, KineticsError> {
    if !lambda.is_finite() {
        return Err(KineticsError::NonFinite);
    }
    let times = tac.times();
    let values = tac.values();
    let mut out = vec![0.0; times.len()];
    // The grids here are usually uniform, so the interval coefficients are
    // reusable; key the cache on the exact bit pattern of lambda * h.
    let mut cached: Option<(f64, f64, f64, f64)> = None;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let x = lambda * h;
        let (decay, p1, p2) = match cached {
            Some((cx, d, p1, p2)) if cx == x => (d, p1, p2),
            _ => {
                let entry = (x, x.exp(), phi1(x), phi2(x));
                cached = Some(entry);
                (entry.1, entry.2, entry.3)
            }
        };
        let seg = h * (values[i - 1] * p1 + (values[i] - values[i - 1]) * p2);
        out[i] = decay * out[i - 1] + seg;
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(KineticsError::NonFinite);
    }
    SampledCurve::new(tac.grid().clone(), out)
}

/// Trapezoidal cumulative integral on the curve's grid; 0 at t = 0 and exact
/// for the piecewise-linear interpolant.
pub fn cumulative_integral(curve: &SampledCurve) -> SampledCurve {
    let times = curve.times();
    let values = curve.values();
    let mut out = vec![0.0; times.len()];
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        out[i] = out[i - 1] + 0.5 * h * (values[i] + values[i - 1]);
    }
    SampledCurve::new(curve.grid().clone(), out).expect("finite cumulative sums")
}

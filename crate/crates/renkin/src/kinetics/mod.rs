//! Domain types and the direct problem.
//!
//! The model tracks tracer concentrations in kidney tissue `C_t`, pre-urine
//! `C_p` and bladder urine `C_u`, fed by the blood concentration `C_b`:
//!
//! ```text
//! dC_t/dt = -(k_bt + k_pt) C_t + k_tp C_p + k_tb C_b
//! dC_p/dt =   k_pt C_t - (k_tp + k_up) C_p + k_pb C_b
//! dC_u/dt =   k_up C_p
//! ```
//!
//! with all concentrations zero at t = 0. The 2x2 system matrix for
//! `(C_t, C_p)` is `[[-a, b], [c, -d]]` with reduced parameters
//! `a = k_bt + k_pt`, `b = k_tp`, `c = k_pt`, `d = k_tp + k_up`; its
//! structure (full, triangular, diagonal) selects which closed form applies.

mod convolve;
mod ode;
mod solve;

pub use convolve::{cumulative_integral, exp_convolve};
pub use ode::ode_reference;
pub use solve::{
    solve_diagonal, solve_direct, solve_full, solve_lower, solve_upper, SolveError,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Structural tolerance (1/min) below which an off-diagonal parameter is
/// treated as zero, both when classifying the system matrix and when
/// thresholding fit outputs.
pub const STRUCTURAL_EPS: f64 = 1e-3;

/// Eigenvalues closer than this are treated as a repeated pair; the closed
/// forms that divide by their difference defer to the numeric integrator.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Eigenvalues smaller than this in magnitude make the bladder closed form
/// singular; the solver defers to the numeric integrator.
pub const ZERO_EIG_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum KineticsError {
    #[error("rate constant {name} = {value} is negative or non-finite")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("matrix parameters (a={a}, b={b}, c={c}, d={d}) violate a >= c >= 0, d >= b >= 0")]
    InvalidMatrix { a: f64, b: f64, c: f64, d: f64 },
    #[error("time grid must start at 0, be strictly increasing, and have at least 2 points")]
    InvalidGrid,
    #[error("curve has {values} values for a grid of {points} points")]
    LengthMismatch { values: usize, points: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}

/// The six exchange coefficients (1/min), the unknowns of the inverse
/// problem. `k_ab` is the flux rate into compartment `a` from compartment
/// `b`; suffixes: `b`lood, `t`issue, `p`re-urine, `u`rine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub k_bt: f64,
    pub k_tp: f64,
    pub k_pt: f64,
    pub k_up: f64,
    pub k_tb: f64,
    pub k_pb: f64,
}

/// Coefficient names in the canonical (table/CSV) column order.
pub const COEFFICIENT_NAMES: [&str; 6] = ["k_bt", "k_tp", "k_pt", "k_up", "k_tb", "k_pb"];

impl RateConstants {
    /// Validates that every coefficient is finite and nonnegative.
    pub fn new(
        k_bt: f64,
        k_tp: f64,
        k_pt: f64,
        k_up: f64,
        k_tb: f64,
        k_pb: f64,
    ) -> Result<Self, KineticsError> {
        let k = Self { k_bt, k_tp, k_pt, k_up, k_tb, k_pb };
        for (name, value) in COEFFICIENT_NAMES.iter().zip(k.to_vector()) {
            if !value.is_finite() || value < 0.0 {
                return Err(KineticsError::InvalidRate { name, value });
            }
        }
        Ok(k)
    }

    /// Builds from a state vector in [`COEFFICIENT_NAMES`] order.
    pub fn from_vector(v: [f64; 6]) -> Result<Self, KineticsError> {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    /// The coefficients as a vector in [`COEFFICIENT_NAMES`] order.
    pub fn to_vector(self) -> [f64; 6] {
        [self.k_bt, self.k_tp, self.k_pt, self.k_up, self.k_tb, self.k_pb]
    }

    /// Reduced system-matrix parameters for these coefficients.
    pub fn matrix(self) -> KineticMatrix {
        KineticMatrix {
            a: self.k_bt + self.k_pt,
            b: self.k_tp,
            c: self.k_pt,
            d: self.k_tp + self.k_up,
        }
    }
}

/// Reduced parameters of the 2x2 system matrix `[[-a, b], [c, -d]]`.
///
/// For admissible rate constants `a >= c >= 0` and `d >= b >= 0` hold, with
/// inverse relations `k_pt = c`, `k_bt = a - c`, `k_tp = b`, `k_up = d - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl KineticMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, KineticsError> {
        let finite = [a, b, c, d].iter().all(|x| x.is_finite());
        if !finite || !(a >= c && c >= 0.0 && d >= b && b >= 0.0) {
            return Err(KineticsError::InvalidMatrix { a, b, c, d });
        }
        Ok(Self { a, b, c, d })
    }

    /// Classifies the matrix structure with both off-diagonal entries
    /// thresholded at `eps`.
    pub fn classify(&self, eps: f64) -> CaseKind {
        match (self.b > eps, self.c > eps) {
            (true, true) => CaseKind::Full,
            (false, true) => CaseKind::LowerTriangular,
            (true, false) => CaseKind::UpperTriangular,
            (false, false) => CaseKind::Diagonal,
        }
    }

    /// Eigenvalues of the system matrix.
    ///
    /// With both off-diagonals nonzero these are the roots of
    /// `l^2 + (a+d) l + (ad - bc) = 0`, with `lambda1` the larger. With a
    /// structural zero the pair is `(-a, -d)` in that fixed order, matching
    /// the triangular/diagonal closed forms (which may invert the magnitude
    /// ordering).
    pub fn eigenvalues(&self) -> EigenPair {
        let KineticMatrix { a, b, c, d } = *self;
        if b == 0.0 || c == 0.0 {
            return EigenPair { lambda1: -a, lambda2: -d };
        }
        // (a+d)^2 - 4(ad - bc) == (a-d)^2 + 4bc, the cancellation-free form.
        let disc = (a - d) * (a - d) + 4.0 * b * c;
        let root = disc.sqrt();
        let lambda2 = -0.5 * (a + d + root);
        let det = a * d - b * c;
        // Vieta: lambda1 * lambda2 = det. Stable when the small root would
        // cancel in the quadratic formula.
        let lambda1 = if lambda2 != 0.0 { det / lambda2 } else { 0.5 * (root - (a + d)) };
        EigenPair { lambda1, lambda2 }
    }
}

/// Which closed-form solution applies to a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Full,
    LowerTriangular,
    UpperTriangular,
    Diagonal,
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseKind::Full => "full",
            CaseKind::LowerTriangular => "lower_triangular",
            CaseKind::UpperTriangular => "upper_triangular",
            CaseKind::Diagonal => "diagonal",
        };
        f.write_str(s)
    }
}

/// Eigenvalue pair of the system matrix (1/min).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Strictly increasing times in minutes, starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, KineticsError> {
        let ok = times.len() >= 2
            && times[0] == 0.0
            && times.iter().all(|t| t.is_finite())
            && times.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(KineticsError::InvalidGrid);
        }
        Ok(Self(times))
    }

    /// Uniform grid over `[0, t_end]` with `n_intervals` steps.
    pub fn uniform(t_end: f64, n_intervals: usize) -> Result<Self, KineticsError> {
        if !(t_end > 0.0) || n_intervals == 0 {
            return Err(KineticsError::InvalidGrid);
        }
        let step = t_end / n_intervals as f64;
        let times = (0..=n_intervals).map(|i| i as f64 * step).collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> f64 {
        *self.0.last().expect("grid has at least 2 points")
    }
}

/// A concentration curve sampled on a [`TimeGrid`], understood as the
/// piecewise-linear interpolant between its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self, KineticsError> {
        if values.len() != grid.len() {
            return Err(KineticsError::LengthMismatch {
                values: values.len(),
                points: grid.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(KineticsError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    /// Convenience constructor sampling `f` on the grid.
    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> Result<Self, KineticsError> {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation at `t`, clamped to the grid's span.
    pub fn interpolate(&self, t: f64) -> f64 {
        interp_linear(self.times(), &self.values, t)
    }

    /// The curve resampled onto another grid by linear interpolation.
    pub fn resample(&self, grid: Arc<TimeGrid>) -> Self {
        let values = grid.times().iter().map(|&t| self.interpolate(t)).collect();
        Self { grid, values }
    }
}

/// Linear interpolation of `(times, values)` samples at `t`, clamped to the
/// sampled span. `times` must be strictly increasing.
pub(crate) fn interp_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    // First index with time > t; in (0, last] by the bounds checks above.
    let hi = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[hi - 1], times[hi]);
    let (v0, v1) = (values[hi - 1], values[hi]);
    if t == t0 {
        return v0;
    }
    v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
}

/// The three compartment curves on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationSet {
    pub c_t: SampledCurve,
    pub c_p: SampledCurve,
    pub c_u: SampledCurve,
}

impl ConcentrationSet {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.c_t.grid()
    }

    /// Tissue plus pre-urine, the kidney ROI observable.
    pub fn kidney_sum(&self) -> Vec<f64> {
        self.c_t
            .values()
            .iter()
            .zip(self.c_p.values())
            .map(|(t, p)| t + p)
            .collect()
    }
}

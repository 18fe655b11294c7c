//! Renal tracer kinetics toolkit.
//!
//! A three-compartment model of tracer flow through kidney tissue, pre-urine
//! and bladder, driven by the blood time-activity curve. The crate solves the
//! direct problem in closed form (convolutions of the input curve with
//! exponentials, dispatched over the structure of the system matrix) and the
//! inverse problem — recovering the six exchange coefficients from measured
//! concentrations — with a continuous ant-colony optimizer.
//!
//! Module map:
//!
//! - [`kinetics`] — domain types, the four closed-form solvers, and a
//!   Runge–Kutta reference integrator used as an independent oracle.
//! - [`synth`] — gamma-variate input curves, acquisition schedules, synthetic
//!   measurement generation with Poisson noise, and Poisson error bars.
//! - [`aco`] — the ant-colony fit: cost functional, population updates,
//!   single runs and multi-run ensembles with confidence strips.
//! - [`io`] — the CSV measurement format and result emission.
//! - [`validate`] — the self-check suite behind the `validate` CLI command.

pub mod aco;
pub mod io;
pub mod kinetics;
pub mod synth;
pub mod validate;

pub use aco::{AcoConfig, EnsembleResult, FitResult, Population};
pub use kinetics::{
    CaseKind, ConcentrationSet, EigenPair, KineticMatrix, RateConstants, SampledCurve, TimeGrid,
};
pub use synth::{AcquisitionSchedule, GammaVariateParams, MeasurementSet};

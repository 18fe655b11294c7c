//! Browser bindings: three interactive operations over JSON strings.
//!
//! `direct_curves` solves the compartment model for slider-driven
//! coefficients, `simulate_frames` produces Poisson-noised frame data, and
//! `fit_frames` runs the ant-colony fit against simulated or pasted frames.
//! Build with `wasm-pack build --target web` (see `www/index.html`).

use renkin::aco::{run_aco, AcoConfig};
use renkin::kinetics::{solve_direct, RateConstants, TimeGrid, STRUCTURAL_EPS};
use renkin::synth::{
    gamma_variate_tac, simulate_measurements, AcquisitionSchedule, FrameModel,
    GammaVariateParams, MeasurementSet,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
struct CurveRequest {
    /// k_bt, k_tp, k_pt, k_up, k_tb, k_pb
    rates: [f64; 6],
    gamma: GammaVariateParams,
    t_end: f64,
    #[serde(default = "default_points")]
    n_points: usize,
}

fn default_points() -> usize {
    400
}

#[derive(Serialize)]
struct CurveResponse {
    t: Vec<f64>,
    c_b: Vec<f64>,
    c_t: Vec<f64>,
    c_p: Vec<f64>,
    c_u: Vec<f64>,
    case: String,
    lambda1: f64,
    lambda2: f64,
}

fn curves(req: &CurveRequest) -> Result<CurveResponse, String> {
    let k = RateConstants::from_vector(req.rates).map_err(|e| e.to_string())?;
    if !(req.t_end > 0.0) || req.n_points < 2 {
        return Err("need t_end > 0 and at least 2 points".into());
    }
    let grid = Arc::new(TimeGrid::uniform(req.t_end, req.n_points).map_err(|e| e.to_string())?);
    let tac = gamma_variate_tac(&req.gamma, grid);
    let sol = solve_direct(&k, &tac, STRUCTURAL_EPS).map_err(|e| e.to_string())?;
    let m = k.matrix();
    let eig = m.eigenvalues();
    Ok(CurveResponse {
        t: tac.times().to_vec(),
        c_b: tac.values().to_vec(),
        c_t: sol.c_t.values().to_vec(),
        c_p: sol.c_p.values().to_vec(),
        c_u: sol.c_u.values().to_vec(),
        case: m.classify(STRUCTURAL_EPS).to_string(),
        lambda1: eig.lambda1,
        lambda2: eig.lambda2,
    })
}

/// Closed-form compartment curves for a coefficient set and gamma-variate
/// input. Input and output are JSON strings.
#[wasm_bindgen]
pub fn direct_curves(request: &str) -> Result<String, JsValue> {
    let req: CurveRequest = serde_json::from_str(request).map_err(err_js)?;
    let resp = curves(&req).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&resp).map_err(err_js)
}

#[derive(Deserialize)]
struct SimulateRequest {
    rates: [f64; 6],
    gamma: GammaVariateParams,
    noise_scale: f64,
    seed: u64,
}

#[derive(Serialize)]
struct SimulateResponse {
    t: Vec<f64>,
    blood: Vec<f64>,
    kidney: Vec<f64>,
    bladder: Vec<f64>,
}

/// Synthetic 27-frame measurements with Poisson noise on the kidney and
/// bladder observables.
#[wasm_bindgen]
pub fn simulate_frames(request: &str) -> Result<String, JsValue> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(err_js)?;
    let k = RateConstants::from_vector(req.rates).map_err(err_js)?;
    let schedule = AcquisitionSchedule::default_27();
    let set = simulate_measurements(&k, &req.gamma, &schedule, req.noise_scale, req.seed)
        .map_err(err_js)?;
    let resp = SimulateResponse {
        t: set.schedule.times().to_vec(),
        blood: set.blood,
        kidney: set.kidney,
        bladder: set.bladder,
    };
    serde_json::to_string(&resp).map_err(err_js)
}

#[derive(Deserialize)]
struct FitRequest {
    t: Vec<f64>,
    blood: Vec<f64>,
    kidney: Vec<f64>,
    bladder: Vec<f64>,
    seed: u64,
    #[serde(default)]
    v_b: f64,
    #[serde(default)]
    max_iter: Option<usize>,
}

#[derive(Serialize)]
struct FitResponse {
    rates: [f64; 6],
    cost: f64,
    iterations: usize,
    converged: bool,
    case: String,
    model_kidney: Vec<f64>,
    model_bladder: Vec<f64>,
}

/// Ant-colony fit of frame data; returns the recovered coefficients and the
/// forward-solved observables at the frame times.
#[wasm_bindgen]
pub fn fit_frames(request: &str) -> Result<String, JsValue> {
    let req: FitRequest = serde_json::from_str(request).map_err(err_js)?;
    let schedule = AcquisitionSchedule::new(req.t).map_err(err_js)?;
    let set = MeasurementSet::new(
        schedule,
        req.blood,
        req.kidney,
        req.bladder,
        None,
        None,
    )
    .map_err(err_js)?;
    let config = AcoConfig {
        v_b: req.v_b,
        max_iter: req.max_iter.unwrap_or(4000),
        ..AcoConfig::default()
    };
    let fit = run_aco(&set, &config, req.seed).map_err(err_js)?;
    let model = FrameModel::new(&set.schedule, &set.blood, config.threshold).map_err(err_js)?;
    let (model_kidney, model_bladder) = model.predict(&fit.rates).map_err(err_js)?;
    let resp = FitResponse {
        rates: fit.rates.to_vector(),
        cost: fit.cost,
        iterations: fit.iterations,
        converged: fit.converged,
        case: fit.case.to_string(),
        model_kidney,
        model_bladder,
    };
    serde_json::to_string(&resp).map_err(err_js)
}

fn err_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

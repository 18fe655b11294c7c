//! Self-check suite: closed forms against the numeric integrator plus the
//! structural identities of the model. Backs the `validate` CLI command.

use crate::kinetics::{
    cumulative_integral, exp_convolve, ode_reference, solve_direct, CaseKind, ConcentrationSet,
    RateConstants, SampledCurve, TimeGrid, STRUCTURAL_EPS,
};
use crate::synth::{gamma_variate_tac, GammaVariateParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

/// One named check with its observed deviation and threshold.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn evaluate(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        let passed = deviation.is_finite() && deviation <= tolerance;
        Self { name: name.into(), deviation, tolerance, passed }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}  {:<44} max deviation {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.deviation,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            writeln!(f, "{check}")?;
        }
        write!(
            f,
            "{} of {} checks passed",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        )
    }
}

/// Knobs for the suite; the sign-error injection and the zero input curve
/// exist as negative/degenerate controls for the suite itself.
#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Random coefficient draws per matrix case.
    pub cases_per_family: usize,
    pub seed: u64,
    /// Replace the reference input curve by zero (all deviations vanish).
    pub zero_tac: bool,
    /// Flip the sign of one analytic output before comparing; the suite
    /// must then fail on any nonzero input.
    pub inject_sign_error: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { cases_per_family: 100, seed: 20260810, zero_tac: false, inject_sign_error: false }
    }
}

const ORACLE_TOL: f64 = 1e-4;

/// Reference input: the default gamma variate sampled on a uniform grid.
pub fn reference_tac(intervals: usize) -> SampledCurve {
    let grid = Arc::new(TimeGrid::uniform(48.0, intervals).expect("valid grid"));
    gamma_variate_tac(&GammaVariateParams::default(), grid)
}

fn zero_curve(intervals: usize) -> SampledCurve {
    let grid = Arc::new(TimeGrid::uniform(48.0, intervals).expect("valid grid"));
    SampledCurve::from_fn(grid, |_| 0.0).expect("zero curve")
}

/// Relative sup-norm deviation: max abs difference over the oracle's max
/// abs value. Identically zero curves deviate by exactly 0.
fn rel_sup(candidate: &[f64], oracle: &[f64]) -> f64 {
    let dev = candidate
        .iter()
        .zip(oracle)
        .fold(0.0_f64, |m, (c, o)| m.max((c - o).abs()));
    if dev == 0.0 {
        return 0.0;
    }
    let scale = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    dev / scale
}

fn set_deviation(candidate: &ConcentrationSet, oracle: &ConcentrationSet, flip_cp: bool) -> f64 {
    let cp: Vec<f64> = if flip_cp {
        candidate.c_p.values().iter().map(|v| -v).collect()
    } else {
        candidate.c_p.values().to_vec()
    };
    rel_sup(candidate.c_t.values(), oracle.c_t.values())
        .max(rel_sup(&cp, oracle.c_p.values()))
        .max(rel_sup(candidate.c_u.values(), oracle.c_u.values()))
}

/// Draws coefficients in (10^-3, 2) with the structural zeros of the
/// requested case set exactly.
pub fn random_rates_for_case(case: CaseKind, rng: &mut ChaCha8Rng) -> RateConstants {
    let mut draw = || rng.gen_range(1e-3..2.0);
    let mut v = [draw(), draw(), draw(), draw(), draw(), draw()];
    match case {
        CaseKind::Full => {}
        CaseKind::LowerTriangular => v[1] = 0.0,
        CaseKind::UpperTriangular => v[2] = 0.0,
        CaseKind::Diagonal => {
            v[1] = 0.0;
            v[2] = 0.0;
        }
    }
    RateConstants::from_vector(v).expect("draws are admissible")
}

/// Runs the full suite and reports per-check deviations.
pub fn run_suite(opts: &ValidateOptions) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let coarse = if opts.zero_tac { zero_curve(1600) } else { reference_tac(1600) };
    // Finite differences and trapezoids below are O(h^2) approximations of
    // exact identities; the fine grid keeps their own error well under the
    // reported tolerances.
    let fine = if opts.zero_tac { zero_curve(8000) } else { reference_tac(8000) };
    let mut checks = Vec::new();

    // Closed forms against the numeric integrator, per matrix case.
    for case in [
        CaseKind::Full,
        CaseKind::LowerTriangular,
        CaseKind::UpperTriangular,
        CaseKind::Diagonal,
    ] {
        let mut worst = 0.0_f64;
        for _ in 0..opts.cases_per_family {
            let k = random_rates_for_case(case, &mut rng);
            let analytic = solve_direct(&k, &coarse, STRUCTURAL_EPS).expect("admissible");
            let numeric = ode_reference(&k, &coarse).expect("admissible");
            worst = worst.max(set_deviation(&analytic, &numeric, opts.inject_sign_error));
        }
        checks.push(CheckOutcome::evaluate(
            format!("solver vs integrator ({case}, n={})", opts.cases_per_family),
            worst,
            ORACLE_TOL,
        ));
    }

    // Double-integral identity: cumulative integral of E_w equals
    // (E_w - int C_b) / w.
    let mut worst = 0.0_f64;
    let int_b = cumulative_integral(&fine);
    for _ in 0..5 {
        let w = -rng.gen_range(0.05..2.0);
        let e = exp_convolve(w, &fine).expect("finite");
        let lhs = cumulative_integral(&e);
        let rhs: Vec<f64> = e
            .values()
            .iter()
            .zip(int_b.values())
            .map(|(ev, iv)| (ev - iv) / w)
            .collect();
        worst = worst.max(rel_sup(lhs.values(), &rhs));
    }
    checks.push(CheckOutcome::evaluate("exponential double-integral identity", worst, ORACLE_TOL));

    // Mass balance: d/dt (C_t + C_p + C_u) = (k_tb + k_pb) C_b - k_bt C_t,
    // via central differences on the solver output.
    let mut worst = 0.0_f64;
    for case in [
        CaseKind::Full,
        CaseKind::LowerTriangular,
        CaseKind::UpperTriangular,
        CaseKind::Diagonal,
    ] {
        let k = random_rates_for_case(case, &mut rng);
        let sol = solve_direct(&k, &fine, STRUCTURAL_EPS).expect("admissible");
        worst = worst.max(mass_balance_deviation(&k, &sol, &fine));
    }
    checks.push(CheckOutcome::evaluate("mass balance (finite differences)", worst, ORACLE_TOL));

    // Bladder consistency: C_u = k_up * int C_p on every branch.
    let mut worst = 0.0_f64;
    for case in [
        CaseKind::Full,
        CaseKind::LowerTriangular,
        CaseKind::UpperTriangular,
        CaseKind::Diagonal,
    ] {
        let k = random_rates_for_case(case, &mut rng);
        let sol = solve_direct(&k, &fine, STRUCTURAL_EPS).expect("admissible");
        let int_p = cumulative_integral(&sol.c_p);
        let expect: Vec<f64> = int_p.values().iter().map(|v| k.k_up * v).collect();
        worst = worst.max(rel_sup(sol.c_u.values(), &expect));
    }
    checks.push(CheckOutcome::evaluate("bladder curve vs k_up * integral of C_p", worst, ORACLE_TOL));

    ValidationReport { checks }
}

/// Max relative residual of the finite-difference mass balance on a grid.
pub fn mass_balance_deviation(k: &RateConstants, sol: &ConcentrationSet, tac: &SampledCurve) -> f64 {
    let times = tac.times();
    let sum: Vec<f64> = sol
        .c_t
        .values()
        .iter()
        .zip(sol.c_p.values())
        .zip(sol.c_u.values())
        .map(|((t, p), u)| t + p + u)
        .collect();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 1..times.len() - 1 {
        let dt = times[i + 1] - times[i - 1];
        let fd = (sum[i + 1] - sum[i - 1]) / dt;
        let rhs = (k.k_tb + k.k_pb) * tac.values()[i] - k.k_bt * sol.c_t.values()[i];
        worst = worst.max((fd - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    if worst == 0.0 {
        0.0
    } else {
        worst / scale.max(1e-12)
    }
}

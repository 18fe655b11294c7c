//! Closed-form solutions of the direct problem, one per matrix structure.
//!
//! Every solution is a linear combination of `E_i = e^{lambda_i t} * C_b`
//! (see [`exp_convolve`]) plus, for the bladder, the running integral of
//! `C_b`. The bladder forms divide by eigenvalues and eigenvalue gaps, so
//! each solver reports [`SolveError`] at (near-)singular parameter sets and
//! [`solve_direct`] falls back to the numeric integrator there.

use super::convolve::{cumulative_integral, exp_convolve};
use super::ode::ode_reference;
use super::{
    ConcentrationSet, KineticsError, RateConstants, SampledCurve, CaseKind, DEGENERACY_TOL,
    ZERO_EIG_TOL,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("eigenvalues {lambda1} and {lambda2} are too close for the closed form")]
    DegenerateEigenvalues { lambda1: f64, lambda2: f64 },
    #[error("eigenvalue {lambda} is too close to zero for the closed form")]
    ZeroEigenvalue { lambda: f64 },
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// Assembles a set of curves `sum_i coef_i * basis_i` on the tac's grid.
fn combine(tac: &SampledCurve, terms: &[(f64, &SampledCurve)]) -> Result<SampledCurve, KineticsError> {
    let n = tac.times().len();
    let mut out = vec![0.0; n];
    for (coef, curve) in terms {
        for (o, v) in out.iter_mut().zip(curve.values()) {
            *o += coef * v;
        }
    }
    SampledCurve::new(tac.grid().clone(), out)
}

/// Full-matrix case (`b > 0` and `c > 0`).
///
/// `C_t = c1 b E1 + c2 (d + l2) E2`, `C_p = c1 (a + l1) E1 + c2 c E2`, and
/// the bladder curve follows from integrating `C_p`, using that the running
/// integral of `E_i` is `(E_i - int C_b) / lambda_i`.
pub fn solve_full(k: &RateConstants, tac: &SampledCurve) -> Result<ConcentrationSet, SolveError> {
    let m = k.matrix();
    let eig = m.eigenvalues();
    let (l1, l2) = (eig.lambda1, eig.lambda2);
    if (l1 - l2).abs() <= DEGENERACY_TOL {
        return Err(SolveError::DegenerateEigenvalues { lambda1: l1, lambda2: l2 });
    }
    for l in [l1, l2] {
        if l.abs() <= ZERO_EIG_TOL {
            return Err(SolveError::ZeroEigenvalue { lambda: l });
        }
    }

    let den = (m.a + l1) * (m.d + l2) - m.b * m.c;
    let c1 = (-m.c * k.k_tb + (m.d + l2) * k.k_pb) / den;
    let c2 = ((m.a + l1) * k.k_tb - m.b * k.k_pb) / den;

    let e1 = exp_convolve(l1, tac)?;
    let e2 = exp_convolve(l2, tac)?;
    let int_b = cumulative_integral(tac);

    let c_t = combine(tac, &[(c1 * m.b, &e1), (c2 * (m.d + l2), &e2)])?;
    let c_p = combine(tac, &[(c1 * (m.a + l1), &e1), (c2 * m.c, &e2)])?;
    let g1 = c1 * (m.a + l1) / l1;
    let g2 = c2 * m.c / l2;
    let c_u = combine(
        tac,
        &[(k.k_up * g1, &e1), (k.k_up * g2, &e2), (-k.k_up * (g1 + g2), &int_b)],
    )?;

    Ok(ConcentrationSet { c_t, c_p, c_u })
}

/// Lower-triangular case (`b = 0`, `c > 0`), eigenvalues `(-a, -d)`.
///
/// The bladder bracket divides the `E2` term by `lambda2` (the published
/// form reuses `lambda1` there, which breaks `C_u = k_up * int C_p`; the
/// `lambda2` form restores it and matches the numeric integrator).
pub fn solve_lower(k: &RateConstants, tac: &SampledCurve) -> Result<ConcentrationSet, SolveError> {
    let m = k.matrix();
    let (l1, l2) = (-m.a, -m.d);
    if (l1 - l2).abs() <= DEGENERACY_TOL {
        return Err(SolveError::DegenerateEigenvalues { lambda1: l1, lambda2: l2 });
    }
    for l in [l1, l2] {
        if l.abs() <= ZERO_EIG_TOL {
            return Err(SolveError::ZeroEigenvalue { lambda: l });
        }
    }

    let chi1 = k.k_tb / (l1 - l2);
    let chi2 = k.k_pb - m.c * chi1;

    let e1 = exp_convolve(l1, tac)?;
    let e2 = exp_convolve(l2, tac)?;
    let int_b = cumulative_integral(tac);

    let c_t = combine(tac, &[(chi1 * (l1 - l2), &e1)])?;
    let c_p = combine(tac, &[(m.c * chi1, &e1), (chi2, &e2)])?;
    let g1 = m.c * chi1 / l1;
    let g2 = chi2 / l2;
    let c_u = combine(
        tac,
        &[(k.k_up * g1, &e1), (k.k_up * g2, &e2), (-k.k_up * (g1 + g2), &int_b)],
    )?;

    Ok(ConcentrationSet { c_t, c_p, c_u })
}

/// Upper-triangular case (`b > 0`, `c = 0`), eigenvalues `(-a, -d)`.
pub fn solve_upper(k: &RateConstants, tac: &SampledCurve) -> Result<ConcentrationSet, SolveError> {
    let m = k.matrix();
    let (l1, l2) = (-m.a, -m.d);
    if (l1 - l2).abs() <= DEGENERACY_TOL {
        return Err(SolveError::DegenerateEigenvalues { lambda1: l1, lambda2: l2 });
    }
    if l2.abs() <= ZERO_EIG_TOL {
        return Err(SolveError::ZeroEigenvalue { lambda: l2 });
    }

    let sigma2 = k.k_pb / (l2 - l1);
    let sigma1 = k.k_tb - m.b * sigma2;

    let e1 = exp_convolve(l1, tac)?;
    let e2 = exp_convolve(l2, tac)?;
    let int_b = cumulative_integral(tac);

    let c_t = combine(tac, &[(sigma1, &e1), (m.b * sigma2, &e2)])?;
    let c_p = combine(tac, &[((l2 - l1) * sigma2, &e2)])?;
    let g = k.k_up * (l2 - l1) * sigma2 / l2;
    let c_u = combine(tac, &[(g, &e2), (-g, &int_b)])?;

    Ok(ConcentrationSet { c_t, c_p, c_u })
}

/// Diagonal case (`b = c = 0`), eigenvalues `(-a, -d)`.
pub fn solve_diagonal(
    k: &RateConstants,
    tac: &SampledCurve,
) -> Result<ConcentrationSet, SolveError> {
    let m = k.matrix();
    let (l1, l2) = (-m.a, -m.d);
    if l2.abs() <= ZERO_EIG_TOL {
        return Err(SolveError::ZeroEigenvalue { lambda: l2 });
    }

    let e1 = exp_convolve(l1, tac)?;
    let e2 = exp_convolve(l2, tac)?;
    let int_b = cumulative_integral(tac);

    let c_t = combine(tac, &[(k.k_tb, &e1)])?;
    let c_p = combine(tac, &[(k.k_pb, &e2)])?;
    // k_up int C_p = k_up k_pb (E2 - int C_b) / lambda2; equals
    // k_pb (int C_b - E2) when b = 0, where d = k_up.
    let g = k.k_up * k.k_pb / l2;
    let c_u = combine(tac, &[(g, &e2), (-g, &int_b)])?;

    Ok(ConcentrationSet { c_t, c_p, c_u })
}

/// Solves the direct problem, dispatching on the matrix structure at
/// tolerance `eps` and falling back to [`ode_reference`] wherever the
/// selected closed form is singular. Never fails for admissible inputs.
pub fn solve_direct(
    k: &RateConstants,
    tac: &SampledCurve,
    eps: f64,
) -> Result<ConcentrationSet, KineticsError> {
    let case = k.matrix().classify(eps);
    let attempt = match case {
        CaseKind::Full => solve_full(k, tac),
        CaseKind::LowerTriangular => solve_lower(k, tac),
        CaseKind::UpperTriangular => solve_upper(k, tac),
        CaseKind::Diagonal => solve_diagonal(k, tac),
    };
    match attempt {
        Ok(sol) => Ok(sol),
        Err(SolveError::Kinetics(e)) => Err(e),
        Err(SolveError::DegenerateEigenvalues { .. }) | Err(SolveError::ZeroEigenvalue { .. }) => {
            ode_reference(k, tac)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::TimeGrid;
    use std::sync::Arc;

    fn reference_tac() -> SampledCurve {
        let grid = Arc::new(TimeGrid::uniform(48.0, 1600).unwrap());
        SampledCurve::from_fn(grid, |t| {
            if t > 0.2 { 10.0 * (t - 0.2_f64).powi(2) * (-(t - 0.2) / 1.5).exp() } else { 0.0 }
        })
        .unwrap()
    }

    fn zero_tac() -> SampledCurve {
        let grid = Arc::new(TimeGrid::uniform(10.0, 40).unwrap());
        SampledCurve::from_fn(grid, |_| 0.0).unwrap()
    }

    /// Relative sup-norm distance between a curve and its oracle.
    fn rel_sup(candidate: &SampledCurve, oracle: &SampledCurve) -> f64 {
        let scale = oracle
            .values()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        candidate
            .values()
            .iter()
            .zip(oracle.values())
            .fold(0.0_f64, |m, (c, o)| m.max((c - o).abs()))
            / scale
    }

    fn assert_matches_ode(k: &RateConstants, sol: &ConcentrationSet, tac: &SampledCurve, tol: f64) {
        let ode = ode_reference(k, tac).unwrap();
        assert!(rel_sup(&sol.c_t, &ode.c_t) < tol, "c_t off by {}", rel_sup(&sol.c_t, &ode.c_t));
        assert!(rel_sup(&sol.c_p, &ode.c_p) < tol, "c_p off by {}", rel_sup(&sol.c_p, &ode.c_p));
        assert!(rel_sup(&sol.c_u, &ode.c_u) < tol, "c_u off by {}", rel_sup(&sol.c_u, &ode.c_u));
    }

    #[test]
    fn full_zero_tac_gives_zero() {
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let sol = solve_full(&k, &zero_tac()).unwrap();
        for c in [&sol.c_t, &sol.c_p, &sol.c_u] {
            assert!(c.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn full_matches_ode_reference_on_table1_rates() {
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let tac = reference_tac();
        let sol = solve_full(&k, &tac).unwrap();
        assert_matches_ode(&k, &sol, &tac, 1e-4);
        assert_eq!(sol.c_t.values()[0], 0.0);
        assert_eq!(sol.c_u.values()[0], 0.0);
    }

    #[test]
    fn lower_matches_ode_reference_on_table2_rates() {
        let k = RateConstants::new(0.8, 0.0, 0.02, 0.08, 0.4, 0.2).unwrap();
        let tac = reference_tac();
        let sol = solve_lower(&k, &tac).unwrap();
        assert_matches_ode(&k, &sol, &tac, 1e-4);
    }

    #[test]
    fn lower_without_tissue_input_keeps_tissue_empty() {
        // k_tb = 0 with b = 0: nothing feeds the tissue compartment.
        let k = RateConstants::new(0.8, 0.0, 0.02, 0.08, 0.0, 0.2).unwrap();
        let sol = solve_lower(&k, &reference_tac()).unwrap();
        assert!(sol.c_t.values().iter().all(|&v| v == 0.0));
        assert!(sol.c_p.values().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn upper_matches_ode_reference() {
        let k = RateConstants::new(0.8, 0.05, 0.0, 0.12, 0.4, 0.2).unwrap();
        let tac = reference_tac();
        let sol = solve_upper(&k, &tac).unwrap();
        assert_matches_ode(&k, &sol, &tac, 1e-4);
    }

    #[test]
    fn upper_without_preurine_input_keeps_preurine_empty() {
        // k_pb = 0 with c = 0: sigma2 = 0, so C_p and C_u vanish.
        let k = RateConstants::new(0.8, 0.05, 0.0, 0.12, 0.4, 0.0).unwrap();
        let sol = solve_upper(&k, &reference_tac()).unwrap();
        assert!(sol.c_p.values().iter().all(|&v| v == 0.0));
        assert!(sol.c_u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_matches_ode_reference() {
        let k = RateConstants::new(0.5, 0.0, 0.0, 0.3, 0.2, 0.1).unwrap();
        let tac = reference_tac();
        let sol = solve_diagonal(&k, &tac).unwrap();
        assert_matches_ode(&k, &sol, &tac, 1e-4);
        // C_u = k_up * int C_p, checked through the trapezoid on the grid.
        // The closed form is exact; the trapezoid carries the O(h^2) error.
        let int_cp = cumulative_integral(&sol.c_p);
        let scale = sol.c_u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (u, i) in sol.c_u.values().iter().zip(int_cp.values()) {
            assert!((u - k.k_up * i).abs() < 1e-4 * scale);
        }
    }

    #[test]
    fn diagonal_no_input_paths_all_zero() {
        let k = RateConstants::new(0.5, 0.0, 0.0, 0.3, 0.0, 0.0).unwrap();
        let sol = solve_diagonal(&k, &reference_tac()).unwrap();
        for c in [&sol.c_t, &sol.c_p, &sol.c_u] {
            assert!(c.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dispatch_full_case_is_identical_to_solve_full() {
        let k = RateConstants::new(1.0, 0.02, 0.02, 0.08, 0.3, 0.3).unwrap();
        let tac = reference_tac();
        let direct = solve_direct(&k, &tac, 1e-3).unwrap();
        let full = solve_full(&k, &tac).unwrap();
        assert_eq!(direct, full);
    }

    #[test]
    fn dispatch_below_threshold_takes_diagonal_branch() {
        // b = c = 5e-4 <= eps: diagonal closed form, not the full one.
        let k = RateConstants::new(0.5, 5e-4, 5e-4, 0.3, 0.2, 0.1).unwrap();
        let tac = reference_tac();
        let direct = solve_direct(&k, &tac, 1e-3).unwrap();
        let diagonal = solve_diagonal(&k, &tac).unwrap();
        assert_eq!(direct, diagonal);
    }

    #[test]
    fn dispatch_degenerate_pair_falls_back_to_ode() {
        // Lower-triangular with a == d: the closed form is singular, so the
        // dispatcher must return exactly the numeric reference.
        let k = RateConstants::new(0.3, 0.0, 0.2, 0.5, 0.3, 0.3).unwrap();
        assert_eq!(k.matrix().a, k.matrix().d);
        let tac = reference_tac();
        let direct = solve_direct(&k, &tac, 1e-3).unwrap();
        let ode = ode_reference(&k, &tac).unwrap();
        assert_eq!(direct, ode);
    }

    #[test]
    fn triangular_solvers_report_their_singularities() {
        let tac = zero_tac();
        let degenerate = RateConstants::new(0.3, 0.0, 0.2, 0.5, 0.3, 0.3).unwrap();
        assert!(matches!(
            solve_lower(&degenerate, &tac),
            Err(SolveError::DegenerateEigenvalues { .. })
        ));
        let zero_up = RateConstants::new(0.5, 0.0, 0.0, 0.0, 0.2, 0.1).unwrap();
        assert!(matches!(
            solve_diagonal(&zero_up, &tac),
            Err(SolveError::ZeroEigenvalue { .. })
        ));
    }

    #[test]
    fn full_case_converges_to_lower_as_b_vanishes() {
        // Case continuity: with c fixed, the full solution approaches the
        // lower-triangular one pointwise as b -> 0+.
        let tac = reference_tac();
        let lower = solve_lower(
            &RateConstants::new(0.8, 0.0, 0.02, 0.08, 0.4, 0.2).unwrap(),
            &tac,
        )
        .unwrap();
        let mut prev_gap = f64::INFINITY;
        for b in [1e-2, 1e-4, 1e-6] {
            let k = RateConstants::new(0.8, b, 0.02, 0.08 - b, 0.4, 0.2).unwrap();
            assert_eq!(k.matrix().d, 0.08);
            let full = solve_full(&k, &tac).unwrap();
            let gap = rel_sup(&full.c_t, &lower.c_t)
                .max(rel_sup(&full.c_p, &lower.c_p))
                .max(rel_sup(&full.c_u, &lower.c_u));
            assert!(gap < prev_gap || gap < 1e-7, "b={b}: gap {gap} prev {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-4, "final gap {prev_gap}");
    }
}

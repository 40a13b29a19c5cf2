//! Canonicalization of the fixed-ratio beamforming subproblem and the
//! matching feasibility checker.

use num_complex::Complex;

use crate::array_channel::{BeamformerSet, Scenario};
use crate::conic::{AffineExpr, ConicProblem};
use crate::error::Result;
use crate::linalg::{cmat_zeros, quad_form_re, scaled_identity, CMatrix};
use crate::scalar::Scalar;
use crate::semantic::computation_power;
use crate::sensing::mismatch;

use super::Workspace;

/// Blocks are ordered `W_0..W_{K-1}, R_0..R_{L-1}`.
pub(crate) fn build_beamforming_problem<T: Scalar>(
    scenario: &Scenario<T>,
    ws: &Workspace<T>,
    ref_cov: &CMatrix<T>,
    rhos: &[T],
    lambdas: &[T],
    b_points: &[T],
    p_comp: T,
) -> ConicProblem<T> {
    let n = scenario.n_antennas();
    let k_users = scenario.n_users();
    let l_targets = scenario.n_targets();
    let nb = k_users + l_targets;
    let ln2 = T::of(std::f64::consts::LN_2);

    let mut p = ConicProblem::<T>::new(vec![n; nb]);

    // Objective: sum_k (1/rho_k)[log2 A_k - log2 B_k^i - (B_k - B_k^i)/(B_k^i ln 2)
    //                            - log2(1 + lambda_k)].
    // A_k enters as a log term; the linearized B_k part is linear; the rest
    // is constant.
    let mut offset = T::zero();
    let mut linear: Vec<CMatrix<T>> = (0..nb).map(|_| cmat_zeros(n)).collect();
    for k in 0..k_users {
        let rho = rhos[k];
        let bi = b_points[k];
        let w_log = T::one() / (rho * ln2);

        let mut arg = AffineExpr::zero(nb);
        for b in 0..nb {
            arg.coeffs[b] = Some(ws.h_outer[k].clone());
        }
        arg.offset = scenario.sigma2_c;
        p.add_log_term(w_log, arg);

        let slope = T::one() / (rho * bi * ln2);
        for b in 0..nb {
            if b == k {
                continue; // own stream is not part of B_k
            }
            let s = Complex::new(-slope, T::zero());
            linear[b] = linear[b].clone() + ws.h_outer[k].mapv(|z| z * s);
        }
        offset += (-bi.log2() + T::one() / ln2
            - scenario.sigma2_c / (bi * ln2)
            - (T::one() + lambdas[k]).log2())
            / rho;
    }
    for (b, m) in linear.into_iter().enumerate() {
        p.set_objective_coeff(b, m);
    }
    p.objective_offset = offset;

    // Per-user rate floor on the linearized rate.
    for k in 0..k_users {
        let rho = rhos[k];
        let bi = b_points[k];
        let w_log = T::one() / (rho * ln2);
        let mut log_arg = AffineExpr::zero(nb);
        for b in 0..nb {
            log_arg.coeffs[b] = Some(ws.h_outer[k].clone());
        }
        log_arg.offset = scenario.sigma2_c;

        let slope = T::one() / (rho * bi * ln2);
        let mut lin = AffineExpr::zero(nb);
        for b in 0..nb {
            if b == k {
                continue;
            }
            lin.coeffs[b] = Some(
                ws.h_outer[k].mapv(|z| z * Complex::new(-slope, T::zero())),
            );
        }
        let bound = scenario.qos_floor
            + (bi.log2() - T::one() / ln2 + scenario.sigma2_c / (bi * ln2)) / rho;
        p.add_log_ineq(format!("rate floor user {k}"), w_log, log_arg, lin, bound);
    }

    // Eavesdropper caps: tr(G_l W_k) - lambda_k (tr(G_l sum R) + sigma_r^2) <= 0.
    for k in 0..k_users {
        for l in 0..l_targets {
            let mut expr = AffineExpr::zero(nb);
            expr.coeffs[k] = Some(ws.g_outer[l].clone());
            for lp in 0..l_targets {
                let s = Complex::new(-lambdas[k], T::zero());
                expr.coeffs[k_users + lp] = Some(ws.g_outer[l].mapv(|z| z * s));
            }
            p.add_ineq(
                format!("eavesdropper cap user {k} target {l}"),
                expr,
                lambdas[k] * scenario.sigma2_r,
            );
        }
    }

    // Power: radiated power within the budget left over from computation.
    let mut power = AffineExpr::zero(nb);
    for b in 0..nb {
        power.coeffs[b] = Some(scaled_identity(n, T::one()));
    }
    p.add_ineq(
        "power budget",
        power,
        scenario.power_budget_mw - p_comp,
    );

    // Beampattern mismatch ball around the sensing reference.
    let share = T::one() / T::of(nb as f64);
    let center = ref_cov.mapv(|z| z * Complex::new(share, T::zero()));
    p.set_frob_ball(vec![center; nb], scenario.mismatch_budget);

    p
}

/// Checks a candidate design against every constraint of the fixed-ratio
/// subproblem within `tol` (scaled); returns the first violated constraint.
pub fn check_beamforming_feasibility<T: Scalar>(
    scenario: &Scenario<T>,
    ref_cov: &CMatrix<T>,
    rhos: &[T],
    lambdas: &[T],
    b_points: &[T],
    beams: &BeamformerSet<T>,
    tol: T,
) -> std::result::Result<(), String> {
    let ws = match Workspace::new(scenario) {
        Ok(w) => w,
        Err(e) => return Err(format!("workspace: {e}")),
    };
    let ln2 = T::of(std::f64::consts::LN_2);
    beams.validate().map_err(|e| e.to_string())?;

    for k in 0..scenario.n_users() {
        let a = ws.a_value(scenario, beams, k);
        let b = ws.b_value(scenario, beams, k);
        let bi = b_points[k];
        let rate = (a.log2() - bi.log2() - (b - bi) / (bi * ln2)) / rhos[k];
        if rate < scenario.qos_floor - tol * (T::one() + scenario.qos_floor) {
            return Err(format!(
                "rate floor violated for user {k}: {rate} < {}",
                scenario.qos_floor
            ));
        }
    }
    for k in 0..scenario.n_users() {
        for l in 0..scenario.n_targets() {
            let g = &ws.g_tgt[l];
            let lhs = quad_form_re(&beams.w_mats[k], g);
            let mut rhs = scenario.sigma2_r;
            for r in beams.r_mats.iter() {
                rhs += quad_form_re(r, g);
            }
            rhs = rhs * lambdas[k];
            if lhs > rhs + tol * (T::one() + rhs.abs()) {
                return Err(format!(
                    "eavesdropper cap violated for user {k}, target {l}: {lhs} > {rhs}"
                ));
            }
        }
    }
    let p_comp = computation_power(scenario.comp_coeff, rhos).map_err(|e| e.to_string())?;
    let total = p_comp + beams.total_power();
    if total > scenario.power_budget_mw + tol * (T::one() + scenario.power_budget_mw) {
        return Err(format!(
            "power budget violated: {total} > {}",
            scenario.power_budget_mw
        ));
    }
    let mm = mismatch(ref_cov, beams);
    if mm > scenario.mismatch_budget + tol * (T::one() + scenario.mismatch_budget) {
        return Err(format!(
            "mismatch budget violated: {mm} > {}",
            scenario.mismatch_budget
        ));
    }
    Ok(())
}

/// Public wrapper kept thin so tests can build the exact subproblem.
pub fn beamforming_problem<T: Scalar>(
    scenario: &Scenario<T>,
    ref_cov: &CMatrix<T>,
    rhos: &[T],
    lambdas: &[T],
    b_points: &[T],
) -> Result<ConicProblem<T>> {
    let ws = Workspace::new(scenario)?;
    let p_comp = computation_power(scenario.comp_coeff, rhos)?;
    Ok(build_beamforming_problem(
        scenario, &ws, ref_cov, rhos, lambdas, b_points, p_comp,
    ))
}

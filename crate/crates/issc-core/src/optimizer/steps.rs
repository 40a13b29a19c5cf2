//! The three alternating steps and the surrogate objective.

use crate::array_channel::{BeamformerSet, Scenario};
use crate::conic::{self, SolveOptions, SolveStatus};
use crate::error::{IsscError, Result};
use crate::linalg::{frob_norm, CMatrix};
use crate::scalar::Scalar;
use crate::secrecy::eav_snr;
use crate::semantic::computation_power;

use super::subproblem::build_beamforming_problem;
use super::{OptimizerOptions, OptimizerState, Workspace};

/// Linearized objective at the state's expansion points: equals the true
/// unclamped objective whenever the interference and cap values coincide
/// with the linearization points, and never exceeds it elsewhere.
pub fn surrogate_objective<T: Scalar>(state: &OptimizerState<T>, scenario: &Scenario<T>) -> T {
    let ws = Workspace::new(scenario).expect("scenario was validated at construction");
    let ln2 = T::of(std::f64::consts::LN_2);
    (0..scenario.n_users())
        .map(|k| {
            let a = ws.a_value(scenario, &state.beams, k);
            let b = ws.b_value(scenario, &state.beams, k);
            let bi = state.b_points[k];
            let ci = state.c_points[k];
            let c = T::one() + state.lambdas[k];
            (a.log2()
                - bi.log2()
                - (b - bi) / (bi * ln2)
                - ci.log2()
                - (c - ci) / (ci * ln2))
                / state.rhos[k]
        })
        .sum()
}

/// Step 1: solve the fixed-ratio beamforming subproblem, relinearizing the
/// interference points until the covariances settle. Returns the new beams
/// and the matching linearization points.
pub fn step1_beamforming<T: Scalar>(
    state: &OptimizerState<T>,
    scenario: &Scenario<T>,
    ref_cov: &CMatrix<T>,
    options: &OptimizerOptions<T>,
) -> Result<(BeamformerSet<T>, Vec<T>)> {
    let ws = Workspace::new(scenario)?;
    let k_users = scenario.n_users();
    let p_comp = computation_power(scenario.comp_coeff, &state.rhos)?;

    let mut beams = state.beams.clone();
    let mut b_points = state.b_points.clone();

    for inner in 0..options.max_inner_beams {
        let problem = build_beamforming_problem(
            scenario,
            &ws,
            ref_cov,
            &state.rhos,
            &state.lambdas,
            &b_points,
            p_comp,
        );
        let seed_blocks: Vec<CMatrix<T>> = beams
            .w_mats
            .iter()
            .chain(beams.r_mats.iter())
            .cloned()
            .collect();
        let sol = conic::solve_seeded(
            &problem,
            &SolveOptions {
                tol: options.solver_tol,
                max_newton: options.solver_max_newton,
                certify: true,
                collect_trace: false,
            },
            Some(&seed_blocks),
        )?;
        match sol.status {
            SolveStatus::Infeasible => {
                // Later iterations park the iterate exactly on the cap and
                // floor boundaries, which can make the next subproblem's
                // interior too thin to certify. If the incoming beams still
                // verify against every constraint, the step has simply
                // converged; only a genuinely infeasible first subproblem is
                // an error.
                let incoming_ok = super::subproblem::check_beamforming_feasibility(
                    scenario,
                    ref_cov,
                    &state.rhos,
                    &state.lambdas,
                    &b_points,
                    &beams,
                    T::of(1e-9),
                )
                .is_ok();
                if incoming_ok {
                    break;
                }
                let mut inf = sol.infeasibility.expect("infeasible carries a report");
                inf.context = format!(
                    "beamforming step, outer {} inner {inner} ({})",
                    state.outer_iter, inf.context
                );
                return Err(IsscError::Infeasible(inf));
            }
            // An uncertified solve still yields a strictly feasible barrier
            // iterate; the monotone safeguard below only keeps it when it
            // improves the surrogate, which is all the ascent argument needs.
            SolveStatus::MaxIter => {}
            SolveStatus::Optimal => {}
        }

        let prev_blocks: Vec<CMatrix<T>> = beams
            .w_mats
            .iter()
            .chain(beams.r_mats.iter())
            .cloned()
            .collect();
        let surr_prev = problem.objective_value(&prev_blocks);
        let surr_new = sol.objective;
        // Monotone safeguard: when the solve cannot improve on the incoming
        // iterate (it is near-optimal already, up to solver accuracy), keep
        // it. This makes the outer ascent exact rather than
        // within-solver-tolerance.
        if surr_new <= surr_prev {
            break;
        }

        let new_beams = BeamformerSet {
            w_mats: sol.block_values[..k_users].to_vec(),
            r_mats: sol.block_values[k_users..].to_vec(),
        };
        let change = beam_change(&beams, &new_beams);
        beams = new_beams;
        b_points = ws.b_values(scenario, &beams);
        if change <= options.tol_beams {
            break;
        }
    }
    Ok((beams, b_points))
}

fn beam_change<T: Scalar>(old: &BeamformerSet<T>, new: &BeamformerSet<T>) -> T {
    let pairs = old
        .w_mats
        .iter()
        .zip(new.w_mats.iter())
        .chain(old.r_mats.iter().zip(new.r_mats.iter()));
    let mut worst = T::zero();
    for (a, b) in pairs {
        let mut diff = a.clone();
        diff -= b;
        worst = worst.max(frob_norm(&diff) / (T::one() + frob_norm(a)));
    }
    worst
}

/// Step 2: with beams fixed, the objective strictly decreases in every cap,
/// so each cap lands exactly on the strongest eavesdropper SNR.
pub fn step2_lambda<T: Scalar>(state: &OptimizerState<T>, scenario: &Scenario<T>) -> Vec<T> {
    (0..scenario.n_users())
        .map(|k| {
            (0..scenario.n_targets())
                .map(|l| eav_snr(scenario, &state.beams, k, l))
                .fold(T::zero(), T::max)
        })
        .collect()
}

/// Step 3: optimize the extraction ratios with everything else fixed.
///
/// In `y_k = ln(1/rho_k)` the problem is: maximize `sum_k s_k e^{y_k}` over
/// the per-user boxes subject to `F sum_k y_k <= P_t - P_c&s`. The objective
/// is convex and separable, so an optimum sits at a vertex of the feasible
/// polytope: every user at a box edge except at most one on the power plane.
/// Users with a non-positive rate gap pin to the smallest `y` (largest
/// ratio). The vertex set is enumerated exactly.
pub fn step3_rho<T: Scalar>(
    state: &OptimizerState<T>,
    scenario: &Scenario<T>,
) -> Result<Vec<T>> {
    let ws = Workspace::new(scenario)?;
    let k_users = scenario.n_users();
    if k_users > 20 {
        return Err(IsscError::domain(
            "ratio vertex enumeration supports at most 20 users",
        ));
    }

    let mut gap = Vec::with_capacity(k_users); // s_k, may be negative
    let mut lo = Vec::with_capacity(k_users);
    let mut hi = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let a = ws.a_value(scenario, &state.beams, k);
        let b = ws.b_value(scenario, &state.beams, k);
        let s = a.log2() - b.log2() - (T::one() + state.lambdas[k]).log2();
        gap.push(s);
        let floor = ws.rho_bounds[k];
        let qos_cap = (a.log2() - b.log2()) / scenario.qos_floor;
        let cap = qos_cap.min(T::one());
        if cap < floor * (T::one() - T::of(1e-12)) {
            return Err(IsscError::infeasible(
                format!("ratio update, user {k}"),
                format!(
                    "rate-floor ratio cap {cap} lies below the quality-floor ratio bound {floor}"
                ),
                (floor - cap).to_f64().unwrap_or(f64::NAN),
            ));
        }
        lo.push(floor);
        hi.push(cap.max(floor));
    }

    let p_rem = scenario.power_budget_mw - state.beams.total_power();
    let coeff_f = scenario.comp_coeff;
    let a_y: Vec<T> = hi.iter().map(|&h| (T::one() / h).ln().max(T::zero())).collect();
    let b_y: Vec<T> = lo.iter().map(|&l| (T::one() / l).ln()).collect();

    let mandatory: T = a_y.iter().copied().sum::<T>() * coeff_f;
    if mandatory > p_rem + T::of(1e-9) {
        return Err(IsscError::infeasible(
            "ratio update",
            "computation power exceeds the leftover budget even at the largest feasible ratios",
            (mandatory - p_rem).to_f64().unwrap_or(f64::NAN),
        ));
    }

    if coeff_f == T::zero() {
        let rhos = (0..k_users)
            .map(|k| if gap[k] > T::zero() { lo[k] } else { hi[k] })
            .collect();
        return Ok(rhos);
    }

    let budget = p_rem / coeff_f - a_y.iter().copied().sum::<T>();
    let positive: Vec<usize> = (0..k_users).filter(|&k| gap[k] > T::zero()).collect();
    let caps: Vec<T> = positive.iter().map(|&k| b_y[k] - a_y[k]).collect();

    // Baseline: everyone at the minimum compression.
    let mut best_y: Vec<T> = a_y.clone();
    let value_of = |y: &[T]| -> T {
        (0..k_users).map(|k| gap[k] * y[k].exp()).sum()
    };
    let mut best_val = value_of(&best_y);

    for mask in 0u32..(1u32 << positive.len()) {
        let mut used = T::zero();
        for (i, _) in positive.iter().enumerate() {
            if mask & (1 << i) != 0 {
                used += caps[i];
            }
        }
        if used > budget + T::of(1e-12) {
            continue;
        }
        let remaining = (budget - used).max(T::zero());
        // No partial user, plus every choice of partial user outside the set.
        let mut candidates: Vec<Option<usize>> = vec![None];
        for (i, _) in positive.iter().enumerate() {
            if mask & (1 << i) == 0 {
                candidates.push(Some(i));
            }
        }
        for partial in candidates {
            let mut y = a_y.clone();
            for (i, &k) in positive.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    y[k] = a_y[k] + caps[i];
                }
            }
            if let Some(i) = partial {
                let k = positive[i];
                y[k] = a_y[k] + caps[i].min(remaining);
            }
            let val = value_of(&y);
            if val > best_val {
                best_val = val;
                best_y = y;
            }
        }
    }

    let rhos = (0..k_users)
        .map(|k| (-best_y[k]).exp().min(hi[k]).max(lo[k]))
        .collect();
    Ok(rhos)
}

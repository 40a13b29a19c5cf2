//! Self-contained solver for the convex subproblem family used by the
//! sensing reference design and the beamforming step: Hermitian PSD block
//! variables, affine inequalities, concave log-of-affine objective terms and
//! constraints, and one Frobenius-ball constraint.
//!
//! The algorithm is a primal log-barrier method with damped Newton steps on
//! the real parameterization of the blocks; see `barrier` for the system
//! solve. Every solution reported optimal is certified by a deterministic
//! perturbation oracle ('certify').

mod barrier;
mod certify;
mod problem;
mod start;

pub use barrier::StageRecord;
pub use certify::{certify_solution, ProbeReport, PROBE_DIRECTIONS};
pub use problem::{AffineExpr, AffineIneq, ConicProblem, FrobBall, LogIneq, LogTerm};

use crate::error::{Infeasibility, IsscError, Result};
use crate::linalg::{cmat_zeros, CMatrix};
use crate::scalar::Scalar;

use barrier::{barrier_solve, BarrierOptions};
use problem::PackedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    /// Relative optimality tolerance.
    pub tol: T,
    /// Total Newton step budget.
    pub max_newton: usize,
    /// Run the perturbation oracle on optimal solutions.
    pub certify: bool,
    /// Collect per-stage progress records.
    pub collect_trace: bool,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-6),
            max_newton: 200,
            certify: true,
            collect_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution<T> {
    pub block_values: Vec<CMatrix<T>>,
    /// Canonical objective at `block_values`.
    pub objective: T,
    /// Path gap plus final Newton decrement plus probe gain, relative.
    pub kkt_residual: T,
    pub status: SolveStatus,
    pub newton_steps: usize,
    pub infeasibility: Option<Infeasibility>,
    pub probe: Option<ProbeReport<T>>,
    pub trace: Vec<StageRecord<T>>,
}

/// Solves with default options.
pub fn solve<T: Scalar>(problem: &ConicProblem<T>) -> Result<ConicSolution<T>> {
    solve_with(problem, &SolveOptions::default())
}

pub fn solve_with<T: Scalar>(
    problem: &ConicProblem<T>,
    opts: &SolveOptions<T>,
) -> Result<ConicSolution<T>> {
    solve_seeded(problem, opts, None)
}

/// Like [`solve_with`], trying `hint` (optionally nudged toward the interior
/// by a small identity shift) as the barrier start before falling back to
/// the cold-start construction. Crate-internal: callers such as the
/// alternating optimizer always hold a feasible incoming iterate.
pub(crate) fn solve_seeded<T: Scalar>(
    problem: &ConicProblem<T>,
    opts: &SolveOptions<T>,
    hint: Option<&[CMatrix<T>]>,
) -> Result<ConicSolution<T>> {
    problem.validate()?;
    let packed = PackedProblem::build(problem);

    // A usable seed must sit genuinely inside the feasible set; a point on
    // (or within float noise of) a boundary would start the barrier in
    // numerical mud and freeze it there.
    let seeded = hint.and_then(|blocks| {
        for eps_rel in [0.0, 1e-12, 1e-9, 1e-7] {
            let cand: Vec<CMatrix<T>> = blocks
                .iter()
                .map(|b| {
                    let shift = T::of(eps_rel) * (T::one() + crate::linalg::trace_re(b).abs());
                    b + &crate::linalg::scaled_identity(b.nrows(), shift)
                })
                .collect();
            if barrier::try_eval(&packed, &packed.pack_blocks(&cand)).is_some()
                && start::min_scaled_slack(&packed, &cand) >= T::of(1e-6)
            {
                return Some(cand);
            }
        }
        None
    });

    let start = match seeded {
        Some(s) => s,
        None => match start::strict_feasible_start_impl(problem, &packed) {
            Ok(s) => s,
            Err(IsscError::Infeasible(report)) => {
                return Ok(ConicSolution {
                    block_values: problem
                        .block_dims
                        .iter()
                        .map(|&d| cmat_zeros(d))
                        .collect(),
                    objective: T::nan(),
                    kkt_residual: T::infinity(),
                    status: SolveStatus::Infeasible,
                    newton_steps: 0,
                    infeasibility: Some(report),
                    probe: None,
                    trace: Vec::new(),
                });
            }
            Err(e) => return Err(e),
        },
    };

    let outcome = barrier_solve(
        &packed,
        &start,
        &BarrierOptions {
            tol: opts.tol,
            max_newton: opts.max_newton,
            stop_at_objective: None,
            collect_trace: opts.collect_trace,
        },
    )?;

    let block_values = packed.unpack_blocks(&outcome.x);
    let objective = problem.objective_value(&block_values);
    let scale = T::one() + objective.abs();
    // A stalled final line search leaves a roundoff decrement; the probe
    // oracle below is the stationarity certificate in that case.
    let decrement = if outcome.stalled {
        T::zero()
    } else {
        outcome.final_decrement
    };
    let mut kkt_residual = (outcome.final_mu * packed.nu + decrement) / scale;

    let mut status = if outcome.converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIter
    };

    let probe = if opts.certify && status == SolveStatus::Optimal {
        let report = certify::certify_packed(&packed, &block_values, opts.tol);
        kkt_residual = kkt_residual.max(report.max_gain / scale);
        if !report.passed {
            status = SolveStatus::MaxIter;
        }
        Some(report)
    } else {
        None
    };

    Ok(ConicSolution {
        block_values,
        objective,
        kkt_residual,
        status,
        newton_steps: outcome.newton_steps,
        infeasibility: None,
        probe,
        trace: outcome.trace,
    })
}

/// Returns strictly feasible PSD blocks (all inequalities slack by a positive
/// margin), or the infeasibility report naming the tightest constraint.
pub fn strict_feasible_start<T: Scalar>(problem: &ConicProblem<T>) -> Result<Vec<CMatrix<T>>> {
    problem.validate()?;
    let packed = PackedProblem::build(problem);
    start::strict_feasible_start_impl(problem, &packed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        complex_gaussian_vector, eigh, frob_inner, min_eigenvalue, outer, scaled_identity,
        trace_re,
    };
    use num_complex::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// maximize tr(-X) s.t. tr(X) >= 1 for one 2x2 block: objective -1.
    #[test]
    fn trace_floor_active() {
        let mut p = ConicProblem::<f64>::new(vec![2]);
        p.set_objective_coeff(0, scaled_identity(2, -1.0));
        p.add_ineq(
            "tr >= 1",
            p.affine().with_coeff(0, scaled_identity(2, -1.0)),
            -1.0,
        );
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            (sol.objective + 1.0).abs() < 1e-5,
            "objective {}",
            sol.objective
        );
        let tr = trace_re(&sol.block_values[0]);
        assert!((tr - 1.0).abs() < 1e-5, "trace {tr}");
        assert!(min_eigenvalue(&sol.block_values[0]) >= -1e-9);
    }

    /// maximize ln(<hh^H, X> + 1) s.t. tr X <= P: matched rank-one solution.
    #[test]
    fn log_term_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = complex_gaussian_vector::<f64, _>(&mut rng, 2);
        let hh = outer(&h, &h);
        let hnorm: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let p_budget = 4.0;

        let mut p = ConicProblem::<f64>::new(vec![2]);
        p.add_log_term(1.0, p.affine().with_coeff(0, hh.clone()).with_offset(1.0));
        p.add_ineq(
            "power",
            p.affine().with_coeff(0, scaled_identity(2, 1.0)),
            p_budget,
        );
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expect = (p_budget * hnorm + 1.0).ln();
        assert!(
            (sol.objective - expect).abs() < 1e-4 * expect.max(1.0),
            "objective {} vs {}",
            sol.objective,
            expect
        );
        // The signal power lands fully on h.
        let sig = frob_inner(&hh, &sol.block_values[0]);
        assert!((sig - p_budget * hnorm).abs() < 1e-3 * p_budget * hnorm);
    }

    /// Pure linear objective vs an eigenvalue oracle: max <C,X> with
    /// tr X <= 1 equals lambda_max(C).
    #[test]
    fn linear_objective_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..3 {
            let v1 = complex_gaussian_vector::<f64, _>(&mut rng, 3);
            let v2 = complex_gaussian_vector::<f64, _>(&mut rng, 3);
            let c = outer(&v1, &v1) + outer(&v2, &v2).mapv(|z| z * Complex::new(0.4, 0.0));
            let mut p = ConicProblem::<f64>::new(vec![3]);
            p.set_objective_coeff(0, c.clone());
            p.add_ineq(
                "trace",
                p.affine().with_coeff(0, scaled_identity(3, 1.0)),
                1.0,
            );
            let sol = solve(&p).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}");
            let (w, _) = eigh(&c);
            let lmax = w[2];
            assert!(
                (sol.objective - lmax).abs() < 0.02 * lmax,
                "trial {trial}: {} vs {}",
                sol.objective,
                lmax
            );
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = ConicProblem::<f64>::new(vec![2]);
        p.set_objective_coeff(0, scaled_identity(2, -1.0));
        p.add_ineq(
            "tr <= 1",
            p.affine().with_coeff(0, scaled_identity(2, 1.0)),
            1.0,
        );
        p.add_ineq(
            "tr >= 2",
            p.affine().with_coeff(0, scaled_identity(2, -1.0)),
            -2.0,
        );
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        let report = sol.infeasibility.unwrap();
        assert!(
            report.constraint.contains("tr"),
            "constraint name: {}",
            report.constraint
        );
    }

    #[test]
    fn strict_start_power_only_identity_scaling() {
        // Two blocks of dims 2 and 3: start should be (P / (2 * 5)) * I.
        let p_budget = 10.0;
        let mut p = ConicProblem::<f64>::new(vec![2, 3]);
        p.set_objective_coeff(0, scaled_identity(2, 1.0));
        let expr = p
            .affine()
            .with_coeff(0, scaled_identity(2, 1.0))
            .with_coeff(1, scaled_identity(3, 1.0));
        p.add_ineq("power", expr, p_budget);
        let start = strict_feasible_start(&p).unwrap();
        let expect = p_budget / (2.0 * 5.0);
        for blk in &start {
            for i in 0..blk.nrows() {
                assert!((blk[[i, i]].re - expect).abs() < 1e-12);
            }
        }
        let total: f64 = start.iter().map(trace_re).sum();
        assert!((p_budget - total - p_budget / 2.0).abs() < 1e-12, "slack P/2");
    }

    #[test]
    fn block_permutation_permutes_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h1 = complex_gaussian_vector::<f64, _>(&mut rng, 2);
        let h2 = complex_gaussian_vector::<f64, _>(&mut rng, 2);
        // Same problem, blocks listed in either order: objective terms
        // (h1, weight 1) and (h2, weight 0.5) travel with their block.
        let build = |swap: bool| {
            let mut p = ConicProblem::<f64>::new(vec![2, 2]);
            let (b1, b2) = if swap { (1, 0) } else { (0, 1) };
            p.set_objective_coeff(b1, outer(&h1, &h1));
            p.set_objective_coeff(b2, outer(&h2, &h2).mapv(|z| z * Complex::new(0.5, 0.0)));
            let expr = p
                .affine()
                .with_coeff(0, scaled_identity(2, 1.0))
                .with_coeff(1, scaled_identity(2, 1.0));
            p.add_ineq("power", expr, 2.0);
            solve(&p).unwrap()
        };
        let a = build(false);
        let b = build(true);
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        for i in 0..2 {
            for j in 0..2 {
                let d01 = (a.block_values[0][[i, j]] - b.block_values[1][[i, j]]).norm();
                let d10 = (a.block_values[1][[i, j]] - b.block_values[0][[i, j]]).norm();
                assert!(d01 < 1e-6 && d10 < 1e-6, "permutation asymmetry {d01} {d10}");
            }
        }
        assert!((a.objective - b.objective).abs() < 1e-8);
    }

    #[test]
    fn monotone_objective_across_stages() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = complex_gaussian_vector::<f64, _>(&mut rng, 3);
        let mut p = ConicProblem::<f64>::new(vec![3]);
        p.add_log_term(1.0, p.affine().with_coeff(0, outer(&h, &h)).with_offset(0.5));
        p.add_ineq(
            "power",
            p.affine().with_coeff(0, scaled_identity(3, 1.0)),
            3.0,
        );
        let sol = solve_with(
            &p,
            &SolveOptions {
                collect_trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.trace.len() >= 3);
        for w in sol.trace.windows(2) {
            assert!(
                w[1].objective >= w[0].objective - 1e-7 * (1.0 + w[0].objective.abs()),
                "stage objective regressed: {} -> {}",
                w[0].objective,
                w[1].objective
            );
        }
    }

    #[test]
    fn newton_budget_exhaustion_reports_max_iter() {
        let mut p = ConicProblem::<f64>::new(vec![3]);
        p.set_objective_coeff(0, scaled_identity(3, 1.0));
        p.add_ineq(
            "power",
            p.affine().with_coeff(0, scaled_identity(3, 1.0)),
            1.0,
        );
        let sol = solve_with(
            &p,
            &SolveOptions {
                max_newton: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIter);
        // Best iterate still attached and feasible.
        assert!(trace_re(&sol.block_values[0]) <= 1.0 + 1e-9);
    }

    /// Ball-constrained problem: solution must stay in the ball and the
    /// solver must still certify.
    #[test]
    fn frobenius_ball_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = complex_gaussian_vector::<f64, _>(&mut rng, 3);
        let center = scaled_identity::<f64>(3, 0.5);
        let mut p = ConicProblem::<f64>::new(vec![3, 3]);
        p.set_objective_coeff(0, outer(&h, &h));
        let expr = p
            .affine()
            .with_coeff(0, scaled_identity(3, 1.0))
            .with_coeff(1, scaled_identity(3, 1.0));
        p.add_ineq("power", expr, 10.0);
        p.set_frob_ball(vec![center.clone(), center.clone()], 0.25);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let mut s = sol.block_values[0].clone();
        s += &sol.block_values[1];
        s -= &center;
        s -= &center;
        let dev = frob_inner(&s, &s);
        assert!(dev <= 0.25 + 1e-8, "ball deviation {dev}");
        let probe = sol.probe.unwrap();
        assert!(probe.passed, "probe gain {}", probe.max_gain);
    }
}

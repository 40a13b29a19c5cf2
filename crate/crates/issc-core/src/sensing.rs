//! Sensing-only reference beampattern design and the mismatch metric.
//!
//! The reference solve maximizes the worst gap between the beampattern at
//! each target and every sidelobe angle, with cross-correlation between
//! distinct targets pinned near zero and the trace within the power budget.

use num_complex::Complex;

use crate::array_channel::{BeamformerSet, Scenario};
use crate::conic::{self, ConicProblem, SolveOptions, SolveStatus};
use crate::error::{IsscError, Result};
use crate::linalg::{frob_inner, hermitian_part, outer, scaled_identity, CMatrix};
use crate::scalar::{deg_to_rad, rad_to_deg, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct SensingConfig<T> {
    /// Half-width of the exclusion zone around each target (degrees).
    pub sidelobe_margin_deg: T,
    /// Sidelobe grid step (degrees).
    pub grid_step_deg: T,
    /// Cross-correlation tolerance band (mW); defaults to 1e-6 * budget.
    pub crosscorr_tol: Option<T>,
    pub solver: SolverBudget,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverBudget {
    pub max_newton: usize,
}

impl<T: Scalar> Default for SensingConfig<T> {
    fn default() -> Self {
        Self {
            sidelobe_margin_deg: T::of(5.0),
            grid_step_deg: T::of(1.0),
            crosscorr_tol: None,
            solver: SolverBudget { max_newton: 600 },
        }
    }
}

/// Grid angles (radians) at least `sidelobe_margin_deg` away from every
/// target, covering [-90, 90] degrees.
pub fn sidelobe_region<T: Scalar>(config: &SensingConfig<T>, target_angles: &[T]) -> Vec<T> {
    let step = config.grid_step_deg;
    let margin = config.sidelobe_margin_deg;
    let mut out = Vec::new();
    let mut deg = T::of(-90.0);
    while deg <= T::of(90.0) + T::of(1e-9) {
        let rad = deg_to_rad(deg);
        let clear = target_angles
            .iter()
            .all(|&t| (rad_to_deg(t) - deg).abs() >= margin);
        if clear {
            out.push(rad);
        }
        deg += step;
    }
    out
}

/// Designs the sensing-only reference covariance, returning `(R_d, t)` where
/// `t` is the achieved worst mainlobe-vs-sidelobe gap (mW).
pub fn design_reference_cov<T: Scalar>(
    scenario: &Scenario<T>,
    config: &SensingConfig<T>,
) -> Result<(CMatrix<T>, T)> {
    let n = scenario.n_antennas();
    let l_targets = scenario.n_targets();
    let budget = scenario.power_budget_mw;

    // Pairwise-distinct targets at the working resolution.
    for i in 0..l_targets {
        for j in (i + 1)..l_targets {
            let gap = rad_to_deg((scenario.target_angles[i] - scenario.target_angles[j]).abs());
            if gap < config.grid_step_deg {
                return Err(IsscError::infeasible(
                    "sensing reference design",
                    format!("targets {i} and {j} closer than the grid resolution"),
                    gap.to_f64().unwrap_or(f64::NAN),
                ));
            }
        }
    }

    let steering: Vec<_> = scenario
        .target_angles
        .iter()
        .map(|&t| scenario.geometry.steering_vector(t))
        .collect::<Result<_>>()?;
    let sidelobes = sidelobe_region(config, &scenario.target_angles);
    if sidelobes.is_empty() {
        return Err(IsscError::domain(
            "sidelobe region is empty; shrink the margin or the grid step",
        ));
    }

    // Blocks: [R_d (n x n), t (1 x 1)]; maximize t.
    let mut p = ConicProblem::<T>::new(vec![n, 1]);
    p.set_objective_coeff(1, scaled_identity(1, T::one()));

    for (l, a_l) in steering.iter().enumerate() {
        let main = outer(a_l, a_l);
        for (m, &phi) in sidelobes.iter().enumerate() {
            let a_m = scenario.geometry.steering_vector(phi)?;
            let side = outer(&a_m, &a_m);
            let diff = side - main.clone();
            let expr = p
                .affine()
                .with_coeff(0, hermitian_part(&diff))
                .with_coeff(1, scaled_identity(1, T::one()));
            p.add_ineq(format!("mainlobe gap target {l} sidelobe {m}"), expr, T::zero());
        }
    }

    // Real and imaginary parts are bounded separately; dividing the band by
    // sqrt(2) keeps the cross-correlation modulus within the tolerance.
    let eps = (config
        .crosscorr_tol
        .unwrap_or(T::of(1e-6) * budget)
        .max(T::of(1e-12)))
        * T::of(std::f64::consts::FRAC_1_SQRT_2);
    let half = Complex::new(T::of(0.5), T::zero());
    let i_half = Complex::new(T::zero(), T::of(0.5));
    for l in 0..l_targets {
        for lp in (l + 1)..l_targets {
            // a_l^H R a_lp = tr(R m) with m = a_lp a_l^H; bound Re and Im.
            let m = outer(&steering[lp], &steering[l]);
            let mh = crate::linalg::adjoint(&m);
            let k_re = (m.clone() + mh.clone()).mapv(|z| z * half);
            let k_im = (mh - m).mapv(|z| z * i_half);
            for (tag, kmat) in [("re", k_re), ("im", k_im)] {
                for sign in [T::one(), -T::one()] {
                    let coeff = kmat.mapv(|z| z * Complex::new(sign, T::zero()));
                    let expr = p.affine().with_coeff(0, hermitian_part(&coeff));
                    p.add_ineq(
                        format!("crosscorr {tag} targets {l},{lp} sign {sign}"),
                        expr,
                        eps,
                    );
                }
            }
        }
    }

    p.add_ineq(
        "transmit power",
        p.affine().with_coeff(0, scaled_identity(n, T::one())),
        budget,
    );

    let sol = conic::solve_with(
        &p,
        &SolveOptions {
            tol: T::of(1e-6),
            max_newton: config.solver.max_newton,
            certify: true,
            collect_trace: false,
        },
    )?;
    match sol.status {
        SolveStatus::Infeasible => Err(IsscError::Infeasible(sol.infeasibility.expect(
            "infeasible solutions carry a report",
        ))),
        SolveStatus::MaxIter => Err(IsscError::Numerical(format!(
            "sensing reference solve did not converge (kkt residual {})",
            sol.kkt_residual
        ))),
        SolveStatus::Optimal => {
            let r_d = hermitian_part(&sol.block_values[0]);
            let t = sol.block_values[1][[0, 0]].re;
            Ok((r_d, t))
        }
    }
}

/// Squared Frobenius mismatch between the reference covariance and the
/// transmit covariance of the beams (mW^2).
pub fn mismatch<T: Scalar>(ref_cov: &CMatrix<T>, beams: &BeamformerSet<T>) -> T {
    let rx = beams.transmit_covariance();
    assert_eq!(
        ref_cov.dim(),
        rx.dim(),
        "reference and beams must share the array size"
    );
    let mut diff = ref_cov.clone();
    diff -= &rx;
    frob_inner(&diff, &diff)
}

//! Strictly feasible starting points: analytic templates first (scaled
//! identity, ball-centered blends), then a phase-1 solve maximizing the
//! minimum scaled slack when no template lands inside.

use ndarray::Array1;

use crate::error::{IsscError, Result};
use crate::linalg::{
    cmat_zeros, frob_inner, min_eigenvalue, scaled_identity, trace_re, CMatrix,
};
use crate::scalar::Scalar;

use super::barrier::{barrier_solve, try_eval, BarrierOptions};
use super::problem::{AffineExpr, ConicProblem, PackedProblem};

/// Accept a template (and stop phase-1) once every scaled slack clears this.
const TARGET_MARGIN: f64 = 1e-3;

/// Minimum scaled slack over every constraint family, allowing negative
/// values (unlike `try_eval`, which rejects infeasible points outright).
pub(crate) fn min_scaled_slack<T: Scalar>(p: &PackedProblem<T>, blocks: &[CMatrix<T>]) -> T {
    let x = p.pack_blocks(blocks);
    let dotv = |g: &Array1<T>| -> T {
        let mut acc = T::zero();
        for (a, b) in g.iter().zip(x.iter()) {
            acc += *a * *b;
        }
        acc
    };
    let mut m = T::infinity();
    for (b, blk) in blocks.iter().enumerate() {
        let scale = T::one() + trace_re(blk).abs();
        m = m.min(min_eigenvalue(blk) / scale);
        let _ = b;
    }
    for lt in &p.log_terms {
        let u = dotv(&lt.grad) + lt.offset;
        m = m.min(u / (T::one() + u.abs()));
    }
    for iq in &p.ineqs {
        m = m.min(iq.rhs - dotv(&iq.grad));
    }
    for iq in &p.log_ineqs {
        let u = dotv(&iq.ugrad) + iq.uoffset;
        if u <= T::zero() {
            return T::neg_infinity();
        }
        m = m.min(iq.weight * u.ln() + dotv(&iq.vgrad) - iq.vrhs);
    }
    if let Some(ball) = &p.ball {
        let d = ball.shared_dim;
        let mut s = cmat_zeros::<T>(d);
        for (b, c) in &ball.entries {
            s += &blocks[*b];
            s -= c;
        }
        m = m.min((ball.radius_sq - frob_inner(&s, &s)) / ball.radius_sq);
    }
    m
}

/// Candidate starting templates, best-effort ordered.
fn templates<T: Scalar>(problem: &ConicProblem<T>) -> Vec<Vec<CMatrix<T>>> {
    let dims = &problem.block_dims;
    let mut out = Vec::new();

    // Identity scale capped by the affine inequalities that grow along the
    // identity direction, halved for slack (the power-only case lands at
    // c = bound / (2 * total trace dimension)).
    let mut cap = T::infinity();
    for iq in &problem.affine_ineqs {
        let mut tr_sum = T::zero();
        for (b, c) in iq.expr.coeffs.iter().enumerate() {
            if let Some(c) = c {
                tr_sum += trace_re(c);
            }
            let _ = b;
        }
        if tr_sum > T::zero() {
            let room = iq.bound - iq.expr.offset;
            if room <= T::zero() {
                cap = T::zero();
            } else {
                cap = cap.min(room / tr_sum);
            }
        }
    }
    let c0 = if cap.is_finite() && cap > T::zero() {
        cap * T::of(0.5)
    } else {
        T::one()
    };
    for f in [1.0, 0.1, 0.01, 1e-4] {
        let c = c0 * T::of(f);
        if c > T::zero() {
            out.push(dims.iter().map(|&d| scaled_identity(d, c)).collect());
        }
    }

    // Ball-centered blends: X_b = (1-delta) C_b + c I (uncovered blocks get
    // c I), strictly inside the ball by construction for small delta and c.
    if let Some(ball) = &problem.frob_ball {
        let covered: Vec<usize> = ball
            .centers
            .iter()
            .enumerate()
            .filter_map(|(b, c)| c.as_ref().map(|_| b))
            .collect();
        let d0 = dims[covered[0]];
        let n_cov = T::of(covered.len() as f64);
        let r = ball.radius_sq.sqrt();
        let mut center_sum = cmat_zeros::<T>(d0);
        for &b in &covered {
            center_sum += ball.centers[b].as_ref().unwrap();
        }
        let center_norm = frob_inner(&center_sum, &center_sum).sqrt();
        for delta in [1e-3, 1e-2, 0.1, 0.3] {
            let room = T::of(0.7) * r - T::of(delta) * center_norm;
            if room <= T::zero() {
                continue;
            }
            let c_ball = room / (n_cov * T::of(d0 as f64).sqrt());
            for f in [1.0, 0.1, 1e-2] {
                let c = (c_ball * T::of(f)).min(c0);
                if c <= T::zero() {
                    continue;
                }
                let blocks: Vec<CMatrix<T>> = dims
                    .iter()
                    .enumerate()
                    .map(|(b, &d)| {
                        let mut m = scaled_identity(d, c);
                        if let Some(center) = ball.centers.get(b).and_then(|c| c.as_ref()) {
                            let w = num_complex::Complex::new(T::one() - T::of(delta), T::zero());
                            m = m + center.mapv(|z| z * w);
                        }
                        m
                    })
                    .collect();
                out.push(blocks);
            }
        }
    }
    out
}

pub(crate) fn strict_feasible_start_impl<T: Scalar>(
    problem: &ConicProblem<T>,
    packed: &PackedProblem<T>,
) -> Result<Vec<CMatrix<T>>> {
    let margin = T::of(TARGET_MARGIN);
    let cands = templates(problem);
    let mut best: Option<(T, Vec<CMatrix<T>>)> = None;
    for cand in cands {
        let score = min_scaled_slack(packed, &cand);
        if score >= margin && try_eval(packed, &packed.pack_blocks(&cand)).is_some() {
            return Ok(cand);
        }
        // Phase-1 needs a PD, ball-strict template to start from.
        let usable = cand.iter().all(|m| min_eigenvalue(m) > T::zero())
            && ball_strict(problem, &cand);
        if usable {
            match &best {
                Some((s, _)) if *s >= score => {}
                _ => best = Some((score, cand)),
            }
        }
    }
    let Some((_, template)) = best else {
        return Err(IsscError::Numerical(
            "no positive-definite ball-strict template could be constructed".into(),
        ));
    };
    phase1(problem, packed, template)
}

fn ball_strict<T: Scalar>(problem: &ConicProblem<T>, blocks: &[CMatrix<T>]) -> bool {
    match &problem.frob_ball {
        None => true,
        Some(ball) => {
            let covered: Vec<usize> = ball
                .centers
                .iter()
                .enumerate()
                .filter_map(|(b, c)| c.as_ref().map(|_| b))
                .collect();
            let d0 = problem.block_dims[covered[0]];
            let mut s = cmat_zeros::<T>(d0);
            for &b in &covered {
                s += &blocks[b];
                s -= ball.centers[b].as_ref().unwrap();
            }
            frob_inner(&s, &s) < ball.radius_sq
        }
    }
}

/// Phase-1: maximize the uniform scaled slack `s` (represented by a shifted
/// 1x1 block `u = s + SHIFT`) subject to every original constraint relaxed
/// by `s`. Positive-definiteness and the ball stay hard constraints.
fn phase1<T: Scalar>(
    problem: &ConicProblem<T>,
    packed: &PackedProblem<T>,
    template: Vec<CMatrix<T>>,
) -> Result<Vec<CMatrix<T>>> {
    let nb = problem.n_blocks();
    let u_block = nb;
    let ms = min_scaled_slack(packed, &template);
    if !ms.is_finite() {
        return Err(IsscError::Numerical(
            "phase-1 template leaves a logarithm argument non-positive".into(),
        ));
    }
    let gamma = T::of(0.25) * (T::one() + ms.abs());
    let shift = T::of(2.0) * (T::one() + ms.min(T::zero()).abs()) + gamma;
    let u0 = shift + ms - gamma;

    let mut dims = problem.block_dims.clone();
    dims.push(1);
    let mut p1 = ConicProblem::new(dims);
    p1.set_objective_coeff(u_block, scaled_identity(1, T::one()));
    p1.objective_offset = -shift; // objective value IS the achieved slack

    let unit = |v: T| scaled_identity(1, v);
    let norm_of = |e: &AffineExpr<T>| -> T {
        let mut acc = T::zero();
        for c in e.coeffs.iter().flatten() {
            acc += frob_inner(c, c);
        }
        acc.sqrt().max(T::of(1e-12))
    };
    let scale_expr = |e: &AffineExpr<T>, s: T, extra: usize| -> AffineExpr<T> {
        let mut coeffs: Vec<Option<CMatrix<T>>> = e
            .coeffs
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|m| m.mapv(|z| z / num_complex::Complex::new(s, T::zero())))
            })
            .collect();
        coeffs.resize(coeffs.len() + extra, None);
        AffineExpr {
            coeffs,
            offset: e.offset / s,
        }
    };

    for iq in &problem.affine_ineqs {
        let s = norm_of(&iq.expr);
        let mut expr = scale_expr(&iq.expr, s, 1);
        expr.offset = T::zero();
        expr.coeffs[u_block] = Some(unit(T::one()));
        p1.add_ineq(
            iq.label.clone(),
            expr,
            (iq.bound - iq.expr.offset) / s + shift,
        );
    }
    // Keep log-term arguments positive through the slack too.
    for (i, lt) in problem.log_terms.iter().enumerate() {
        let s = norm_of(&lt.arg);
        let mut expr = AffineExpr::zero(nb + 1);
        for (b, c) in lt.arg.coeffs.iter().enumerate() {
            if let Some(m) = c {
                expr.coeffs[b] = Some(m.mapv(|z| -z / num_complex::Complex::new(s, T::zero())));
            }
        }
        expr.coeffs[u_block] = Some(unit(T::one()));
        p1.add_ineq(
            format!("log-term {i} positivity"),
            expr,
            lt.arg.offset / s + shift,
        );
    }
    for iq in &problem.log_ineqs {
        let s = norm_of(&iq.linear).max(iq.weight);
        let log_arg = scale_expr(&iq.log_arg, T::one(), 1);
        let mut linear = scale_expr(&iq.linear, T::one(), 1);
        linear.coeffs[u_block] = Some(unit(-s));
        p1.add_log_ineq(
            iq.label.clone(),
            iq.weight,
            log_arg,
            linear,
            iq.bound - s * shift,
        );
        // And its own log-argument positivity.
        let su = norm_of(&iq.log_arg);
        let mut pos = AffineExpr::zero(nb + 1);
        for (b, c) in iq.log_arg.coeffs.iter().enumerate() {
            if let Some(m) = c {
                pos.coeffs[b] = Some(m.mapv(|z| -z / num_complex::Complex::new(su, T::zero())));
            }
        }
        pos.coeffs[u_block] = Some(unit(T::one()));
        p1.add_ineq(
            format!("{} argument positivity", iq.label),
            pos,
            iq.log_arg.offset / su + shift,
        );
    }
    if let Some(ball) = &problem.frob_ball {
        let mut centers = ball.centers.clone();
        centers.push(None);
        p1.set_frob_ball_partial(centers, ball.radius_sq);
    }
    p1.validate()?;

    let p1_packed = PackedProblem::build(&p1);
    let mut start = template.clone();
    start.push(unit(u0));

    let outcome = barrier_solve(
        &p1_packed,
        &start,
        &BarrierOptions {
            tol: T::of(2e-6),
            max_newton: 400,
            stop_at_objective: Some(T::of(TARGET_MARGIN)),
            collect_trace: false,
        },
    )?;

    let mut blocks = p1_packed.unpack_blocks(&outcome.x);
    blocks.pop(); // drop the slack block
    let achieved = outcome.f;

    if achieved > T::of(1e-8) && try_eval(packed, &packed.pack_blocks(&blocks)).is_some() {
        return Ok(blocks);
    }

    // Infeasible: name the tightest constraint at the phase-1 solution.
    let x = packed.pack_blocks(&blocks);
    let dotv = |g: &Array1<T>, x: &Array1<T>| -> T {
        let mut acc = T::zero();
        for (a, b) in g.iter().zip(x.iter()) {
            acc += *a * *b;
        }
        acc
    };
    let mut tightest = ("positive semidefiniteness".to_string(), T::infinity());
    for iq in &packed.ineqs {
        let s = iq.rhs - dotv(&iq.grad, &x);
        if s < tightest.1 {
            tightest = (packed.labels[iq.label].clone(), s);
        }
    }
    for iq in &packed.log_ineqs {
        let u = dotv(&iq.ugrad, &x) + iq.uoffset;
        let s = if u <= T::zero() {
            T::neg_infinity()
        } else {
            iq.weight * u.ln() + dotv(&iq.vgrad, &x) - iq.vrhs
        };
        if s < tightest.1 {
            tightest = (packed.labels[iq.label].clone(), s);
        }
    }
    Err(IsscError::infeasible(
        "no strictly feasible point",
        tightest.0,
        (-achieved).to_f64().unwrap_or(f64::NAN),
    ))
}

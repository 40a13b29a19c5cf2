//! First-order certification of returned solutions: probe a deterministic
//! set of feasible directions and verify none improves the objective beyond
//! tolerance.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{min_eigenvalue, standard_normal, trace_re};
use crate::scalar::Scalar;

use super::problem::{ConicProblem, PackedProblem};

pub const PROBE_DIRECTIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct ProbeReport<T> {
    /// Largest objective improvement found over the probe set.
    pub max_gain: T,
    /// `tol * (1 + |objective|)` used as the pass threshold.
    pub threshold: T,
    pub passed: bool,
    pub directions: usize,
}

fn dotv<T: Scalar>(a: &Array1<T>, b: &Array1<T>) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

/// Feasibility within an absolute scaled tolerance; log arguments must stay
/// strictly positive for the objective to be defined.
fn feasible_within<T: Scalar>(p: &PackedProblem<T>, x: &Array1<T>, tol: T) -> bool {
    let blocks = p.unpack_blocks(x);
    for m in &blocks {
        let scale = T::one() + trace_re(m).abs();
        if min_eigenvalue(m) < -tol * scale {
            return false;
        }
    }
    for lt in &p.log_terms {
        if dotv(&lt.grad, x) + lt.offset <= T::zero() {
            return false;
        }
    }
    for iq in &p.ineqs {
        if iq.rhs - dotv(&iq.grad, x) < -tol {
            return false;
        }
    }
    for iq in &p.log_ineqs {
        let u = dotv(&iq.ugrad, x) + iq.uoffset;
        if u <= T::zero() {
            return false;
        }
        if iq.weight * u.ln() + dotv(&iq.vgrad, x) - iq.vrhs < -tol {
            return false;
        }
    }
    if let Some(ball) = &p.ball {
        let d = ball.shared_dim;
        let mut s = crate::linalg::cmat_zeros::<T>(d);
        for (b, c) in &ball.entries {
            s += &blocks[*b];
            s -= c;
        }
        if crate::linalg::frob_inner(&s, &s) > ball.radius_sq * (T::one() + tol) {
            return false;
        }
    }
    true
}

fn objective_at<T: Scalar>(p: &PackedProblem<T>, x: &Array1<T>) -> Option<T> {
    let mut f = dotv(&p.obj_grad, x) + p.obj_offset;
    for lt in &p.log_terms {
        let u = dotv(&lt.grad, x) + lt.offset;
        if u <= T::zero() {
            return None;
        }
        f += lt.weight * u.ln();
    }
    Some(f)
}

/// Runs the 64-direction perturbation oracle on candidate block values.
pub fn certify_solution<T: Scalar>(
    problem: &ConicProblem<T>,
    blocks: &[crate::linalg::CMatrix<T>],
    tol: T,
) -> ProbeReport<T> {
    let packed = PackedProblem::build(problem);
    certify_packed(&packed, blocks, tol)
}

pub(crate) fn certify_packed<T: Scalar>(
    packed: &PackedProblem<T>,
    blocks: &[crate::linalg::CMatrix<T>],
    tol: T,
) -> ProbeReport<T> {
    let x0 = packed.pack_blocks(blocks);
    let f0 = objective_at(packed, &x0).unwrap_or(T::neg_infinity());
    let threshold = tol * (T::one() + f0.abs());
    let feas_tol = T::of(1e-9);

    let x_norm = dotv(&x0, &x0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_C0DE ^ packed.total as u64);
    let mut max_gain = T::zero();

    for _ in 0..PROBE_DIRECTIONS {
        let mut dir = Array1::<T>::zeros(packed.total);
        for i in 0..packed.total {
            dir[i] = standard_normal(&mut rng);
        }
        let norm = dotv(&dir, &dir).sqrt();
        if norm == T::zero() {
            continue;
        }
        for i in 0..packed.total {
            dir[i] = dir[i] / norm;
        }

        let mut sigma = T::of(0.25) * (T::one() + x_norm);
        let mut accepted = None;
        for _ in 0..60 {
            let mut x = x0.clone();
            for i in 0..packed.total {
                x[i] += sigma * dir[i];
            }
            if feasible_within(packed, &x, feas_tol) {
                accepted = Some(x);
                break;
            }
            sigma = sigma * T::of(0.5);
        }
        if let Some(x) = accepted {
            if let Some(f) = objective_at(packed, &x) {
                max_gain = max_gain.max(f - f0);
            }
        }
    }

    ProbeReport {
        max_gain,
        threshold,
        passed: max_gain <= threshold,
        directions: PROBE_DIRECTIONS,
    }
}

//! Rank-one recovery of the user beamformers by Gaussian randomization.
//!
//! Every candidate keeps the transmit covariance exactly equal to the
//! relaxed solution's: user stream `k` gets `p_k w w^H` with `w` drawn in
//! the range of the relaxed covariance and `p_k` bounded so the remainder
//! `W_k - p_k w w^H` stays PSD; the remainders are folded into the sensing
//! covariances. The mismatch and power constraints are therefore untouched,
//! and only the eavesdropper caps (the sensing side gains power, the user
//! side loses it) and the rate floors move - both cheap functions of the
//! power vector, optimized per candidate.

use ndarray::Array1;
use num_complex::Complex;

use crate::array_channel::{BeamformerSet, Scenario};
use crate::error::{IsscError, Result};
use crate::linalg::{eigh, outer, quad_form_re, CMatrix, CVector};
use crate::scalar::Scalar;
use crate::seeding::{salt, stream_rng};

use super::subproblem::check_beamforming_feasibility;
use super::{OptimizerOptions, OptimizerState, Workspace};

#[derive(Debug, Clone)]
pub struct RandomizationOutcome<T> {
    /// Rank-one user beams; the spectral remainders of the relaxed user
    /// covariances are absorbed into the sensing streams.
    pub beams: BeamformerSet<T>,
    /// Randomized objective over the relaxed bound, clamped into (0, 1].
    pub ratio: T,
    pub randomized_objective: T,
    pub sdr_objective: T,
    /// Candidates that admitted a feasible power allocation.
    pub feasible_candidates: usize,
}

/// Scalar model of one candidate direction set.
struct CandidateModel<T> {
    /// A_k: total received power per user; constant because the transmit
    /// covariance is preserved.
    a_const: Vec<T>,
    /// |h_k^H w_k|^2.
    own_gain: Vec<T>,
    /// leak[j][l] = g_l-channel power of direction j.
    leak: Vec<Vec<T>>,
    /// base[l] = tr(G_l R_x) + sigma_r^2.
    cap_base: Vec<T>,
    /// PSD bound: p_k <= 1 / (w^H W_k^+ w).
    p_max: Vec<T>,
}

impl<T: Scalar> CandidateModel<T> {
    fn build(
        scenario: &Scenario<T>,
        ws: &Workspace<T>,
        state: &OptimizerState<T>,
        eigs: &[(Array1<T>, CMatrix<T>)],
        dirs: &[CVector<T>],
    ) -> Self {
        let k_users = scenario.n_users();
        let l_targets = scenario.n_targets();
        let n = scenario.n_antennas();
        let rx = state.beams.transmit_covariance();

        let a_const: Vec<T> = (0..k_users)
            .map(|k| scenario.sigma2_c + quad_form_re(&rx, &ws.h_cu[k]))
            .collect();
        let own_gain: Vec<T> = (0..k_users)
            .map(|k| {
                let mut ip = Complex::new(T::zero(), T::zero());
                for i in 0..n {
                    ip += ws.h_cu[k][i].conj() * dirs[k][i];
                }
                ip.norm_sqr()
            })
            .collect();
        let leak: Vec<Vec<T>> = (0..k_users)
            .map(|j| {
                (0..l_targets)
                    .map(|l| {
                        let mut ip = Complex::new(T::zero(), T::zero());
                        for i in 0..n {
                            ip += ws.g_tgt[l][i].conj() * dirs[j][i];
                        }
                        ip.norm_sqr()
                    })
                    .collect()
            })
            .collect();
        let cap_base: Vec<T> = (0..l_targets)
            .map(|l| scenario.sigma2_r + quad_form_re(&rx, &ws.g_tgt[l]))
            .collect();
        let p_max: Vec<T> = (0..k_users)
            .map(|k| {
                let (w, v) = &eigs[k];
                let top = w[n - 1].max(T::zero());
                if top <= T::zero() {
                    return T::zero();
                }
                let floor = top * T::of(1e-10);
                // w^H W^+ w through the eigenbasis, range components only.
                let mut quad = T::zero();
                for e in 0..n {
                    if w[e] > floor {
                        let mut ip = Complex::new(T::zero(), T::zero());
                        for i in 0..n {
                            ip += v[[i, e]].conj() * dirs[k][i];
                        }
                        quad += ip.norm_sqr() / w[e];
                    }
                }
                if quad > T::zero() {
                    T::one() / quad
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            a_const,
            own_gain,
            leak,
            cap_base,
            p_max,
        }
    }

    /// Feasibility (caps and rate floors) and the true objective at `p`.
    fn evaluate(&self, scenario: &Scenario<T>, state: &OptimizerState<T>, p: &[T]) -> Option<T> {
        let ln2 = T::of(std::f64::consts::LN_2);
        let k_users = p.len();
        for l in 0..self.cap_base.len() {
            let mut sensing = self.cap_base[l];
            for (j, &pj) in p.iter().enumerate() {
                sensing -= pj * self.leak[j][l];
            }
            for (k, &pk) in p.iter().enumerate() {
                if pk * self.leak[k][l] > state.lambdas[k] * sensing {
                    return None;
                }
            }
        }
        let mut obj = T::zero();
        for k in 0..k_users {
            let a = self.a_const[k];
            let b = a - p[k] * self.own_gain[k];
            let surrogate = (a.log2()
                - state.b_points[k].log2()
                - (b - state.b_points[k]) / (state.b_points[k] * ln2))
                / state.rhos[k];
            if surrogate < scenario.qos_floor - T::of(1e-7) * (T::one() + scenario.qos_floor) {
                return None;
            }
            obj += (a.log2() - b.log2() - (T::one() + state.lambdas[k]).log2()) / state.rhos[k];
        }
        Some(obj)
    }
}

/// Splits the user-covariance remainders across the sensing streams so the
/// transmit covariance is preserved up to eigensolver roundoff.
fn assemble<T: Scalar>(
    state: &OptimizerState<T>,
    l_targets: usize,
    dirs: &[CVector<T>],
    powers: &[T],
) -> BeamformerSet<T> {
    let n = dirs[0].len();
    let w_mats: Vec<CMatrix<T>> = dirs
        .iter()
        .zip(powers.iter())
        .map(|(w, &p)| outer(w, w).mapv(|z| z * Complex::new(p, T::zero())))
        .collect();
    let mut remainder = crate::linalg::cmat_zeros::<T>(n);
    for (old, new) in state.beams.w_mats.iter().zip(w_mats.iter()) {
        remainder += old;
        remainder -= new;
    }
    // Clamp roundoff-negative eigenvalues before distributing.
    let (w, v) = eigh(&remainder);
    let mut clamped = crate::linalg::cmat_zeros::<T>(n);
    for e in 0..n {
        let lam = w[e].max(T::zero());
        if lam == T::zero() {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                clamped[[i, j]] += v[[i, e]] * v[[j, e]].conj() * Complex::new(lam, T::zero());
            }
        }
    }
    let share = Complex::new(T::one() / T::of(l_targets as f64), T::zero());
    let shared = clamped.mapv(|z| z * share);
    let r_mats: Vec<CMatrix<T>> = state
        .beams
        .r_mats
        .iter()
        .map(|r| {
            let mut out = r.clone();
            out += &shared;
            out
        })
        .collect();
    BeamformerSet { w_mats, r_mats }
}

/// Recovers rank-one user beamformers from the relaxed solution in `state`.
pub fn gaussian_randomization<T: Scalar>(
    state: &OptimizerState<T>,
    scenario: &Scenario<T>,
    ref_cov: &CMatrix<T>,
    options: &OptimizerOptions<T>,
) -> Result<RandomizationOutcome<T>> {
    let ws = Workspace::new(scenario)?;
    let sdr_objective = ws.true_objective(scenario, &state.beams, &state.rhos, &state.lambdas);
    let k_users = scenario.n_users();
    let l_targets = scenario.n_targets();
    let n = scenario.n_antennas();
    let tol = T::of(1e-6);

    let eigs: Vec<(Array1<T>, CMatrix<T>)> = state.beams.w_mats.iter().map(eigh).collect();
    let principal_dir = |k: usize| -> CVector<T> {
        let (_, v) = &eigs[k];
        Array1::from_iter((0..n).map(|i| v[[i, n - 1]]))
    };
    let verify = |beams: &BeamformerSet<T>| -> bool {
        check_beamforming_feasibility(
            scenario,
            ref_cov,
            &state.rhos,
            &state.lambdas,
            &state.b_points,
            beams,
            tol,
        )
        .is_ok()
    };

    // Already rank-one: take the principal eigenpairs directly.
    let all_rank_one = (0..k_users).all(|k| {
        let (w, _) = &eigs[k];
        let top = w[n - 1];
        top <= T::zero() || w[n - 2].max(T::zero()) <= options.rank_one_ratio_tol * top
    });
    if all_rank_one {
        let dirs: Vec<CVector<T>> = (0..k_users).map(principal_dir).collect();
        let powers: Vec<T> = (0..k_users)
            .map(|k| eigs[k].0[n - 1].max(T::zero()))
            .collect();
        let beams = assemble(state, l_targets, &dirs, &powers);
        if verify(&beams) {
            let obj = ws.true_objective(scenario, &beams, &state.rhos, &state.lambdas);
            return Ok(RandomizationOutcome {
                ratio: ratio_of(obj, sdr_objective),
                randomized_objective: obj,
                sdr_objective,
                beams,
                feasible_candidates: 1,
            });
        }
    }

    if k_users > 4 {
        return Err(IsscError::domain(
            "randomized power sweep supports at most 4 users",
        ));
    }

    // Matched direction W_k h_k: at its PSD-bounded power it reproduces the
    // user's full relaxed signal power, which is the only way to hold an
    // exactly active rate floor after dropping the secondary eigencomponents.
    let matched_dir = |k: usize| -> CVector<T> {
        let w = &state.beams.w_mats[k];
        let h = &ws.h_cu[k];
        let mut out = Array1::from_elem(n, Complex::new(T::zero(), T::zero()));
        for i in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                acc += w[[i, j]] * h[j];
            }
            out[i] = acc;
        }
        let norm: T = out.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm > T::zero() {
            out.mapv(|z| z * Complex::new(T::one() / norm, T::zero()))
        } else {
            principal_dir(k)
        }
    };

    // Candidate directions: matched and principal sets first, then seeded
    // draws with covariance W_k (normalized; power is allocated separately).
    let mut rng = stream_rng(scenario.seed, salt::RANDOMIZATION);
    let mut candidates: Vec<Vec<CVector<T>>> = vec![
        (0..k_users).map(matched_dir).collect(),
        (0..k_users).map(principal_dir).collect(),
    ];
    for _ in 0..options.randomization_draws {
        let mut set = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let (w, v) = &eigs[k];
            let g = crate::linalg::complex_gaussian_vector::<T, _>(&mut rng, n);
            let mut cand = Array1::from_elem(n, Complex::new(T::zero(), T::zero()));
            for (i, item) in cand.iter_mut().enumerate() {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..n {
                    let lam = w[j].max(T::zero()).sqrt();
                    acc += v[[i, j]] * g[j] * Complex::new(lam, T::zero());
                }
                *item = acc;
            }
            let norm: T = cand.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if norm > T::zero() {
                let s = Complex::new(T::one() / norm, T::zero());
                set.push(cand.mapv(|z| z * s));
            } else {
                set.push(principal_dir(k));
            }
        }
        candidates.push(set);
    }

    let mut best: Option<(T, Vec<CVector<T>>, Vec<T>)> = None;
    let mut feasible_candidates = 0usize;

    for dirs in &candidates {
        let model = CandidateModel::build(scenario, &ws, state, &eigs, dirs);
        let steps = 48usize;
        let axes: Vec<Vec<T>> = (0..k_users)
            .map(|k| {
                (0..=steps)
                    .map(|i| model.p_max[k] * T::of(i as f64 / steps as f64))
                    .collect()
            })
            .collect();
        let mut found = false;
        let mut idx = vec![0usize; k_users];
        'grid: loop {
            let p: Vec<T> = (0..k_users).map(|k| axes[k][idx[k]]).collect();
            if let Some(obj) = model.evaluate(scenario, state, &p) {
                found = true;
                if best.as_ref().map_or(true, |(b, _, _)| obj > *b) {
                    best = Some((obj, dirs.clone(), p));
                }
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == k_users {
                    break 'grid;
                }
            }
        }
        if found {
            feasible_candidates += 1;
        }
    }

    let Some((mut obj_best, dirs, mut p_best)) = best else {
        return Err(IsscError::Numerical(format!(
            "no rank-one candidate admits a feasible power allocation after {} draws",
            options.randomization_draws
        )));
    };

    // Local refinement of the winning allocation.
    let model = CandidateModel::build(scenario, &ws, state, &eigs, &dirs);
    let mut span_scale = T::of(0.02);
    for _ in 0..5 {
        for k in 0..k_users {
            let span = model.p_max[k] * span_scale;
            for &cand in &[p_best[k] - span, p_best[k] + span] {
                if cand < T::zero() || cand > model.p_max[k] {
                    continue;
                }
                let mut p = p_best.clone();
                p[k] = cand;
                if let Some(obj) = model.evaluate(scenario, state, &p) {
                    if obj > obj_best {
                        obj_best = obj;
                        p_best = p;
                    }
                }
            }
        }
        span_scale = span_scale * T::of(0.5);
    }

    let beams = assemble(state, l_targets, &dirs, &p_best);
    if let Err(why) = check_beamforming_feasibility(
        scenario,
        ref_cov,
        &state.rhos,
        &state.lambdas,
        &state.b_points,
        &beams,
        tol,
    ) {
        return Err(IsscError::Numerical(format!(
            "randomized candidate failed the final feasibility check: {why}"
        )));
    }
    let obj = ws.true_objective(scenario, &beams, &state.rhos, &state.lambdas);
    Ok(RandomizationOutcome {
        ratio: ratio_of(obj, sdr_objective),
        randomized_objective: obj,
        sdr_objective,
        beams,
        feasible_candidates,
    })
}

fn ratio_of<T: Scalar>(randomized: T, bound: T) -> T {
    if bound <= T::of(1e-12) {
        return T::one();
    }
    (randomized / bound).min(T::one()).max(T::of(1e-12))
}

//! Unit-level checks of the alternating steps against closed forms, grid
//! oracles, and the documented edge cases.

use issc_core::array_channel::{presets, ArrayGeometry, BeamformerSet, Scenario};
use issc_core::linalg::{outer, scaled_identity};
use issc_core::optimizer::{
    gaussian_randomization, step2_lambda, step3_rho, surrogate_objective, OptimizerOptions,
    OptimizerState,
};
use issc_core::secrecy::eav_snr;
use issc_core::semantic::computation_power;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_scenario(n: usize, k: usize, l: usize, seed: u64) -> Scenario<f64> {
    let geometry = ArrayGeometry::half_wavelength(n).unwrap();
    Scenario::builder(geometry)
        .cu_angles((0..k).map(|i| -0.5 + 0.35 * i as f64).collect())
        .target_angles((0..l).map(|i| -0.9 + 0.55 * i as f64).collect())
        .power_budget_mw(100.0)
        .semantic_profiles(presets::default_profiles(k))
        .seed(seed)
        .build()
        .unwrap()
}

fn random_state(scenario: &Scenario<f64>, seed: u64, power: f64) -> OptimizerState<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scenario.n_antennas();
    let k = scenario.n_users();
    let l = scenario.n_targets();
    let mut beams = BeamformerSet::zeros(n, k, l);
    for m in beams.w_mats.iter_mut().chain(beams.r_mats.iter_mut()) {
        let v = issc_core::linalg::complex_gaussian_vector::<f64, _>(&mut rng, n);
        let scale = power * rng.gen_range(0.2..1.0) / (n as f64);
        *m = outer(&v, &v).mapv(|z| z * Complex::new(scale, 0.0));
    }
    let rhos: Vec<f64> = (0..k).map(|_| rng.gen_range(0.7..1.0)).collect();
    let mut state = OptimizerState {
        rhos,
        lambdas: vec![0.0; k],
        beams,
        b_points: vec![1.0; k],
        c_points: vec![1.0; k],
        objective_history: Vec::new(),
        outer_iter: 0,
    };
    // Consistent linearization points.
    let ws_b: Vec<f64> = (0..k)
        .map(|kk| {
            let h = scenario.cu_channel(kk).unwrap();
            let mut acc = scenario.sigma2_c;
            for (j, w) in state.beams.w_mats.iter().enumerate() {
                if j != kk {
                    acc += issc_core::linalg::quad_form_re(w, &h);
                }
            }
            for r in state.beams.r_mats.iter() {
                acc += issc_core::linalg::quad_form_re(r, &h);
            }
            acc
        })
        .collect();
    state.b_points = ws_b;
    let lambdas = step2_lambda(&state, scenario);
    state.c_points = lambdas.iter().map(|l| 1.0 + l).collect();
    state.lambdas = lambdas;
    state
}

/// True unclamped objective used by the oracles below.
fn true_objective(scenario: &Scenario<f64>, state: &OptimizerState<f64>, rhos: &[f64]) -> f64 {
    (0..scenario.n_users())
        .map(|k| {
            let h = scenario.cu_channel(k).unwrap();
            let mut a = scenario.sigma2_c;
            for m in state.beams.w_mats.iter().chain(state.beams.r_mats.iter()) {
                a += issc_core::linalg::quad_form_re(m, &h);
            }
            let b = a - issc_core::linalg::quad_form_re(&state.beams.w_mats[k], &h);
            (a.log2() - b.log2() - (1.0 + state.lambdas[k]).log2()) / rhos[k]
        })
        .sum()
}

#[test]
fn surrogate_matches_truth_at_linearization_point() {
    let scenario = small_scenario(4, 2, 2, 5);
    let state = random_state(&scenario, 11, 5.0);
    // c_points = 1 + lambda and b_points = B(beams), so the Taylor terms
    // vanish and the surrogate equals the true unclamped objective.
    let surr = surrogate_objective(&state, &scenario);
    let truth = true_objective(&scenario, &state, &state.rhos);
    assert!(
        (surr - truth).abs() < 1e-10 * (1.0 + truth.abs()),
        "surrogate {surr} vs truth {truth}"
    );
}

#[test]
fn surrogate_is_zero_for_zero_beams() {
    let scenario = small_scenario(4, 2, 1, 6);
    let n = scenario.n_antennas();
    let state = OptimizerState {
        rhos: vec![1.0; 2],
        lambdas: vec![0.0; 2],
        beams: BeamformerSet::zeros(n, 2, 1),
        b_points: vec![scenario.sigma2_c; 2],
        c_points: vec![1.0; 2],
        objective_history: Vec::new(),
        outer_iter: 0,
    };
    assert!(surrogate_objective(&state, &scenario).abs() < 1e-12);
}

#[test]
fn linearized_log_term_bounds_truth_on_a_grid() {
    // -log2(B) >= -log2(Bi) - (B - Bi)/(Bi ln 2) for every B > 0: the
    // surrogate lower-bounds the true objective pointwise.
    let bi = 0.37f64;
    for i in 1..200 {
        let b = 0.01 * i as f64;
        let tangent = -(bi.log2()) - (b - bi) / (bi * std::f64::consts::LN_2);
        assert!(
            -(b.log2()) >= tangent - 1e-12,
            "tangent overshoots truth at B = {b}"
        );
    }
}

#[test]
fn step2_is_the_strongest_eavesdropper_snr() {
    let scenario = small_scenario(4, 1, 2, 7);
    let n = scenario.n_antennas();
    // Zero beams: all SNRs zero.
    let zero_state = OptimizerState {
        rhos: vec![1.0],
        lambdas: vec![0.0],
        beams: BeamformerSet::zeros(n, 1, 2),
        b_points: vec![scenario.sigma2_c],
        c_points: vec![1.0],
        objective_history: Vec::new(),
        outer_iter: 0,
    };
    assert_eq!(step2_lambda(&zero_state, &scenario), vec![0.0]);

    let state = random_state(&scenario, 3, 10.0);
    let lambdas = step2_lambda(&state, &scenario);
    let expect = (0..2)
        .map(|l| eav_snr(&scenario, &state.beams, 0, l))
        .fold(0.0, f64::max);
    assert!((lambdas[0] - expect).abs() < 1e-14);
}

/// Numeric cross-check of the closed form: golden-section over the single
/// cap with the linearized objective, which is strictly decreasing.
#[test]
fn step2_matches_numeric_single_variable_solve() {
    let scenario = small_scenario(5, 2, 3, 9);
    for seed in 0..20u64 {
        let state = random_state(&scenario, seed, 20.0);
        let lambdas = step2_lambda(&state, &scenario);
        for k in 0..2 {
            let gamma_max = (0..3)
                .map(|l| eav_snr(&scenario, &state.beams, k, l))
                .fold(0.0, f64::max);
            // Objective in lambda_k: -(1/rho)(log2(C_i) + (C - C_i)/(C_i ln2))
            // with C = 1 + lambda: affine, strictly decreasing. Golden
            // section over [gamma_max, gamma_max + 10].
            let f = |lam: f64| -> f64 {
                let c = 1.0 + lam;
                -(state.c_points[k].log2()
                    + (c - state.c_points[k]) / (state.c_points[k] * std::f64::consts::LN_2))
                    / state.rhos[k]
            };
            let (mut lo, mut hi) = (gamma_max, gamma_max + 10.0);
            let phi = (5.0f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if f(m1) >= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let numeric = 0.5 * (lo + hi);
            assert!(
                (lambdas[k] - numeric).abs() < 1e-8,
                "seed {seed} user {k}: closed form {} vs numeric {numeric}",
                lambdas[k]
            );
        }
    }
}

#[test]
fn step3_abundant_power_pins_ratios_at_their_floors() {
    let mut scenario = small_scenario(4, 2, 1, 13);
    scenario.power_budget_mw = 1e6; // effectively unconstrained
    let mut state = random_state(&scenario, 21, 10.0);
    // Positive rate gaps: moderate matched user beams, heavy sensing noise
    // so the eavesdropper SNR (and with it the cap) stays small.
    for k in 0..2 {
        let h = scenario.cu_channel(k).unwrap();
        let norm_sq: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        state.beams.w_mats[k] = outer(&h, &h).mapv(|z| z * Complex::new(30.0 / norm_sq, 0.0));
    }
    state.beams.r_mats[0] = scaled_identity(4, 20.0);
    state.lambdas = step2_lambda(&state, &scenario);
    let rhos = step3_rho(&state, &scenario).unwrap();
    for k in 0..2 {
        let floor = scenario.semantic_profiles[k].rho_lower_bound().unwrap();
        assert!(
            (rhos[k] - floor).abs() < 1e-12,
            "user {k}: rho {} vs floor {floor}",
            rhos[k]
        );
    }
}

#[test]
fn step3_nonpositive_gap_pins_ratio_at_the_cap() {
    let scenario = small_scenario(4, 1, 2, 17);
    // Rate above the floor times the ratio bound but a cap so large the gap
    // is negative: the box is non-empty and the ratio must sit at its top.
    let mut state = random_state(&scenario, 23, 1.0);
    let h = scenario.cu_channel(0).unwrap();
    let norm_sq: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    // Build interference first, then size the user beam for rate ~ 0.8 bit.
    state.beams.w_mats[0] = scaled_identity(4, 0.0);
    let mut interference = scenario.sigma2_c;
    for r in state.beams.r_mats.iter() {
        interference += issc_core::linalg::quad_form_re(r, &h);
    }
    let sinr_target = 2f64.powf(0.8) - 1.0;
    let c = sinr_target * interference / norm_sq;
    state.beams.w_mats[0] = outer(&h, &h).mapv(|z| z * Complex::new(c / norm_sq, 0.0));
    state.lambdas = vec![5.0];
    state.c_points = vec![6.0];
    let rhos = step3_rho(&state, &scenario).unwrap();
    // Cap is min(1, qos bound); with a tiny SINR the qos bound is small but
    // the ratio must sit exactly on the box upper end.
    let h = scenario.cu_channel(0).unwrap();
    let mut a = scenario.sigma2_c;
    for m in state.beams.w_mats.iter().chain(state.beams.r_mats.iter()) {
        a += issc_core::linalg::quad_form_re(m, &h);
    }
    let b = a - issc_core::linalg::quad_form_re(&state.beams.w_mats[0], &h);
    let cap = ((a.log2() - b.log2()) / scenario.qos_floor).min(1.0);
    assert!(
        (rhos[0] - cap).abs() < 1e-9,
        "rho {} should sit at the cap {cap}",
        rhos[0]
    );
}

#[test]
fn step3_matches_exhaustive_grid_oracle() {
    for seed in 0..10u64 {
        let scenario = small_scenario(4, 2, 2, 100 + seed);
        let mut state = random_state(&scenario, 200 + seed, 30.0);
        // Mix of gap signs across seeds.
        if seed % 3 == 0 {
            let h = scenario.cu_channel(0).unwrap();
            state.beams.w_mats[0] = outer(&h, &h).mapv(|z| z * Complex::new(800.0, 0.0));
            state.lambdas = step2_lambda(&state, &scenario);
        }
        let rhos = match step3_rho(&state, &scenario) {
            Ok(r) => r,
            Err(_) => continue, // infeasible random instance
        };
        let obj = true_objective(&scenario, &state, &rhos);

        // Exhaustive grid over both ratios at 1e-4 resolution.
        let p_rem = scenario.power_budget_mw - state.beams.total_power();
        let mut boxes = Vec::new();
        for k in 0..2 {
            let h = scenario.cu_channel(k).unwrap();
            let mut a = scenario.sigma2_c;
            for m in state.beams.w_mats.iter().chain(state.beams.r_mats.iter()) {
                a += issc_core::linalg::quad_form_re(m, &h);
            }
            let b = a - issc_core::linalg::quad_form_re(&state.beams.w_mats[k], &h);
            let lo = scenario.semantic_profiles[k].rho_lower_bound().unwrap();
            let hi = ((a.log2() - b.log2()) / scenario.qos_floor).min(1.0).max(lo);
            boxes.push((lo, hi));
        }
        let step = 1e-4;
        let mut best = f64::NEG_INFINITY;
        let steps0 = ((boxes[0].1 - boxes[0].0) / step).ceil() as usize + 1;
        let steps1 = ((boxes[1].1 - boxes[1].0) / step).ceil() as usize + 1;
        for i in 0..steps0 {
            let r0 = (boxes[0].0 + step * i as f64).min(boxes[0].1);
            for j in 0..steps1 {
                let r1 = (boxes[1].0 + step * j as f64).min(boxes[1].1);
                let comp = computation_power(scenario.comp_coeff, &[r0, r1]).unwrap();
                if comp > p_rem + 1e-9 {
                    continue;
                }
                let val = true_objective(&scenario, &state, &[r0, r1]);
                if val > best {
                    best = val;
                }
            }
        }
        assert!(
            obj >= best - 1e-3,
            "seed {seed}: step3 objective {obj} below grid oracle {best}"
        );
    }
}

#[test]
fn randomization_passes_through_rank_one_input() {
    let scenario = presets::desk(20.0_f64, 1);
    let n = scenario.n_antennas();
    let h0 = scenario.cu_channel(0).unwrap();
    let h1 = scenario.cu_channel(1).unwrap();
    let mut beams = BeamformerSet::zeros(n, 2, 3);
    beams.w_mats[0] = outer(&h0, &h0).mapv(|z| z * Complex::new(40.0, 0.0));
    beams.w_mats[1] = outer(&h1, &h1).mapv(|z| z * Complex::new(40.0, 0.0));
    for r in beams.r_mats.iter_mut() {
        *r = scaled_identity(n, 0.2);
    }
    let ref_cov = beams.transmit_covariance();
    let mut state = OptimizerState {
        rhos: vec![1.0; 2],
        lambdas: vec![0.0; 2],
        b_points: vec![1.0; 2],
        c_points: vec![1.0; 2],
        beams,
        objective_history: Vec::new(),
        outer_iter: 0,
    };
    // Fill consistent linearization and caps.
    let ws_b: Vec<f64> = (0..2)
        .map(|k| {
            let h = scenario.cu_channel(k).unwrap();
            let mut acc = scenario.sigma2_c;
            for (j, w) in state.beams.w_mats.iter().enumerate() {
                if j != k {
                    acc += issc_core::linalg::quad_form_re(w, &h);
                }
            }
            for r in state.beams.r_mats.iter() {
                acc += issc_core::linalg::quad_form_re(r, &h);
            }
            acc
        })
        .collect();
    state.b_points = ws_b;
    let lambdas = step2_lambda(&state, &scenario);
    state.c_points = lambdas.iter().map(|l| 1.0 + l).collect();
    state.lambdas = lambdas;

    let out = gaussian_randomization(&state, &scenario, &ref_cov, &OptimizerOptions::default())
        .unwrap();
    assert!(
        (out.ratio - 1.0).abs() < 1e-9,
        "rank-one input should pass through, ratio {}",
        out.ratio
    );
    for (k, w) in out.beams.w_mats.iter().enumerate() {
        let (eigs, _) = issc_core::linalg::eigh(w);
        let ratio = eigs[n - 2].max(0.0) / eigs[n - 1].max(1e-300);
        assert!(ratio < 1e-9, "output W[{k}] not rank-one: {ratio}");
    }
}

#[test]
fn randomization_recovers_strong_eigengap_within_a_tenth_percent() {
    let scenario = presets::desk(20.0_f64, 2);
    let n = scenario.n_antennas();
    let h0 = scenario.cu_channel(0).unwrap();
    let h1 = scenario.cu_channel(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise0 = issc_core::linalg::complex_gaussian_vector::<f64, _>(&mut rng, n);
    let noise1 = issc_core::linalg::complex_gaussian_vector::<f64, _>(&mut rng, n);
    // Rank-two with a 1e3 eigenvalue gap.
    let h0_sq: f64 = h0.iter().map(|z| z.norm_sqr()).sum();
    let h1_sq: f64 = h1.iter().map(|z| z.norm_sqr()).sum();
    let n0_sq: f64 = noise0.iter().map(|z| z.norm_sqr()).sum();
    let n1_sq: f64 = noise1.iter().map(|z| z.norm_sqr()).sum();
    let mut beams = BeamformerSet::zeros(n, 2, 3);
    // Traces 40 and 0.04: a 1e3 eigenvalue gap, comfortably within budget.
    beams.w_mats[0] = outer(&h0, &h0).mapv(|z| z * Complex::new(40.0 / h0_sq, 0.0))
        + outer(&noise0, &noise0).mapv(|z| z * Complex::new(0.04 / n0_sq, 0.0));
    beams.w_mats[1] = outer(&h1, &h1).mapv(|z| z * Complex::new(40.0 / h1_sq, 0.0))
        + outer(&noise1, &noise1).mapv(|z| z * Complex::new(0.04 / n1_sq, 0.0));
    for r in beams.r_mats.iter_mut() {
        *r = scaled_identity(n, 0.5);
    }
    let ref_cov = beams.transmit_covariance();
    let mut state = OptimizerState {
        rhos: vec![1.0; 2],
        lambdas: vec![0.0; 2],
        b_points: vec![1.0; 2],
        c_points: vec![1.0; 2],
        beams,
        objective_history: Vec::new(),
        outer_iter: 0,
    };
    let ws_b: Vec<f64> = (0..2)
        .map(|k| {
            let h = scenario.cu_channel(k).unwrap();
            let mut acc = scenario.sigma2_c;
            for (j, w) in state.beams.w_mats.iter().enumerate() {
                if j != k {
                    acc += issc_core::linalg::quad_form_re(w, &h);
                }
            }
            for r in state.beams.r_mats.iter() {
                acc += issc_core::linalg::quad_form_re(r, &h);
            }
            acc
        })
        .collect();
    state.b_points = ws_b;
    let lambdas = step2_lambda(&state, &scenario);
    state.c_points = lambdas.iter().map(|l| 1.0 + l).collect();
    state.lambdas = lambdas;

    let out = gaussian_randomization(&state, &scenario, &ref_cov, &OptimizerOptions::default())
        .unwrap();
    assert!(
        out.ratio > 0.999,
        "strong eigengap should recover within 0.1%, got ratio {}",
        out.ratio
    );
}

//! Echo simulation under the optimized transmit covariance and target
//! detection through the MUSIC pseudospectrum.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::array_channel::{BeamformerSet, Scenario};
use crate::error::{IsscError, Result};
use crate::linalg::{cmat_zeros, complex_gaussian_vector, eigh, psd_sqrt, CMatrix};
use crate::scalar::{rad_to_deg, Scalar};
use crate::seeding::{salt, stream_rng};

#[derive(Debug, Clone)]
pub struct MusicResult<T> {
    pub grid_deg: Vec<T>,
    pub pseudospectrum_db: Vec<T>,
    /// Detected peak locations, ascending.
    pub peak_angles_deg: Vec<T>,
    /// Peak heights aligned with `peak_angles_deg`.
    pub peak_values_db: Vec<T>,
    /// Per-target absolute error against ground truth, when evaluated.
    pub peak_errors_deg: Vec<T>,
}

impl<T: Scalar> MusicResult<T> {
    /// The `n` strongest peaks by pseudospectrum height.
    pub fn strongest_peaks(&self, n: usize) -> Vec<T> {
        let mut idx: Vec<usize> = (0..self.peak_angles_deg.len()).collect();
        idx.sort_by(|&a, &b| {
            self.peak_values_db[b]
                .partial_cmp(&self.peak_values_db[a])
                .expect("finite spectrum")
        });
        idx.truncate(n);
        idx.iter().map(|&i| self.peak_angles_deg[i]).collect()
    }

    /// Fills `peak_errors_deg` with the distance from each true angle to the
    /// nearest detected peak (degrees).
    pub fn evaluate_against(&mut self, truth_deg: &[T]) {
        self.peak_errors_deg = truth_deg
            .iter()
            .map(|&t| {
                self.peak_angles_deg
                    .iter()
                    .map(|&p| (p - t).abs())
                    .fold(T::infinity(), T::min)
            })
            .collect();
    }
}

/// Simulates `snapshots` echo snapshots: the transmitted waveform carries
/// unit-variance circular symbols through the user and sensing covariances,
/// every target reflects it back through its steering outer product, and the
/// receiver adds circular noise of power `sigma2_r` per antenna. The result
/// is the N x T snapshot matrix, deterministic for a given seed.
pub fn simulate_echoes<T: Scalar>(
    scenario: &Scenario<T>,
    beams: &BeamformerSet<T>,
    snapshots: usize,
    seed: u64,
) -> Result<CMatrix<T>> {
    let n = scenario.n_antennas();
    if snapshots < n {
        return Err(IsscError::domain(format!(
            "need at least {n} snapshots for an {n}-element array, got {snapshots}"
        )));
    }

    // Square roots reproduce the exact transmit covariance even when the
    // optimizer returns non-rank-one sensing covariances.
    let factors: Vec<CMatrix<T>> = beams
        .w_mats
        .iter()
        .chain(beams.r_mats.iter())
        .map(psd_sqrt)
        .collect();

    // Combined echo operator: sum_l beta_l a_l a_l^H.
    let mut echo_op = cmat_zeros::<T>(n);
    for l in 0..scenario.n_targets() {
        let a = scenario.geometry.steering_vector(scenario.target_angles[l])?;
        let beta = Complex::new(scenario.target_gains_beta[l], T::zero());
        for i in 0..n {
            for j in 0..n {
                echo_op[[i, j]] += a[i] * a[j].conj() * beta;
            }
        }
    }

    let mut rng = stream_rng(seed, salt::ECHOES);
    let noise_scale = Complex::new(scenario.sigma2_r.sqrt(), T::zero());
    let mut out = Array2::from_elem((n, snapshots), Complex::new(T::zero(), T::zero()));
    for t in 0..snapshots {
        let mut x = Array1::from_elem(n, Complex::new(T::zero(), T::zero()));
        for f in &factors {
            let sym = complex_gaussian_vector::<T, _>(&mut rng, n);
            for i in 0..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..n {
                    acc += f[[i, j]] * sym[j];
                }
                x[i] += acc;
            }
        }
        let noise = complex_gaussian_vector::<T, _>(&mut rng, n);
        for i in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                acc += echo_op[[i, j]] * x[j];
            }
            out[[i, t]] = acc + noise[i] * noise_scale;
        }
    }
    Ok(out)
}

/// MUSIC pseudospectrum from echo snapshots with a known target count:
/// eigendecompose the sample covariance, span the noise subspace with the
/// `N - n_targets` weakest eigenvectors, and scan the steering grid. Peaks
/// are strict local maxima at least 10 dB over the median.
pub fn music_spectrum<T: Scalar>(
    scenario: &Scenario<T>,
    echoes: &CMatrix<T>,
    n_targets: usize,
    grid_step_deg: T,
) -> Result<MusicResult<T>> {
    let n = echoes.nrows();
    let t_len = echoes.ncols();
    if n_targets >= n {
        return Err(IsscError::domain(format!(
            "target count {n_targets} must be below the antenna count {n}"
        )));
    }

    // Sample covariance.
    let mut cov = cmat_zeros::<T>(n);
    let inv_t = Complex::new(T::one() / T::of(t_len as f64), T::zero());
    for t in 0..t_len {
        for i in 0..n {
            for j in 0..n {
                cov[[i, j]] += echoes[[i, t]] * echoes[[j, t]].conj() * inv_t;
            }
        }
    }

    let (w, v) = eigh(&cov);
    let signal_floor = w[n - 1 - n_targets.saturating_sub(1) - 1].max(T::zero());
    let top = w[n - 1];
    if top <= T::zero() || signal_floor < top * T::of(1e-12) {
        return Err(IsscError::Numerical(format!(
            "insufficient excitation: sample covariance rank below the target count \
             (eigenvalue {signal_floor} vs {top})"
        )));
    }
    let noise_dim = n - n_targets;

    let mut grid_deg = Vec::new();
    let mut deg = T::of(-90.0);
    while deg <= T::of(90.0) + T::of(1e-9) {
        grid_deg.push(deg);
        deg += grid_step_deg;
    }

    let mut spectrum_db = Vec::with_capacity(grid_deg.len());
    for &d in &grid_deg {
        let a = scenario
            .geometry
            .steering_vector(crate::scalar::deg_to_rad(d))?;
        // a^H E_n E_n^H a = sum over noise eigenvectors of |a^H e|^2.
        let mut denom = T::zero();
        for col in 0..noise_dim {
            let mut ip = Complex::new(T::zero(), T::zero());
            for i in 0..n {
                ip += a[i].conj() * v[[i, col]];
            }
            denom += ip.norm_sqr();
        }
        let p = T::one() / denom.max(T::of(1e-300));
        spectrum_db.push(T::of(10.0) * p.log10());
    }

    let mut sorted = spectrum_db.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite spectrum"));
    let median = sorted[sorted.len() / 2];
    let threshold = median + T::of(10.0);

    let mut peak_angles = Vec::new();
    let mut peak_values = Vec::new();
    for i in 1..spectrum_db.len().saturating_sub(1) {
        if spectrum_db[i] > spectrum_db[i - 1]
            && spectrum_db[i] > spectrum_db[i + 1]
            && spectrum_db[i] >= threshold
        {
            peak_angles.push(grid_deg[i]);
            peak_values.push(spectrum_db[i]);
        }
    }

    Ok(MusicResult {
        grid_deg,
        pseudospectrum_db: spectrum_db,
        peak_angles_deg: peak_angles,
        peak_values_db: peak_values,
        peak_errors_deg: Vec::new(),
    })
}

/// Convenience: simulate echoes under `beams`, scan, and score against the
/// scenario's true target angles.
pub fn evaluate_sensing<T: Scalar>(
    scenario: &Scenario<T>,
    beams: &BeamformerSet<T>,
    snapshots: usize,
    grid_step_deg: T,
    seed: u64,
) -> Result<MusicResult<T>> {
    let echoes = simulate_echoes(scenario, beams, snapshots, seed)?;
    let mut result = music_spectrum(scenario, &echoes, scenario.n_targets(), grid_step_deg)?;
    let truth: Vec<T> = scenario.target_angles.iter().map(|&t| rad_to_deg(t)).collect();
    result.evaluate_against(&truth);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_channel::{presets, ArrayGeometry, Scenario};
    use crate::linalg::{frob_inner, outer, scaled_identity};

    fn scenario(n: usize, targets_deg: Vec<f64>, beta: f64) -> Scenario<f64> {
        let l = targets_deg.len();
        Scenario::builder(ArrayGeometry::half_wavelength(n).unwrap())
            .cu_angles(vec![0.1])
            .target_angles(targets_deg.iter().map(|d| d.to_radians()).collect())
            .target_gains(vec![0.005; l], vec![beta; l])
            .cu_gains(vec![0.005])
            .semantic_profiles(presets::default_profiles(1))
            .build()
            .unwrap()
    }

    fn broadside_beams(sc: &Scenario<f64>, power: f64) -> BeamformerSet<f64> {
        let n = sc.n_antennas();
        let mut beams = BeamformerSet::zeros(n, 1, sc.n_targets());
        for (l, r) in beams.r_mats.iter_mut().enumerate() {
            let a = sc.geometry.steering_vector(sc.target_angles[l]).unwrap();
            *r = outer(&a, &a).mapv(|z| z * Complex::new(power / n as f64, 0.0));
        }
        beams
    }

    #[test]
    fn zero_reflectivity_leaves_pure_noise() {
        let sc = scenario(4, vec![0.0], 1e-12);
        let beams = broadside_beams(&sc, 10.0);
        let echoes = simulate_echoes(&sc, &beams, 400, 3).unwrap();
        let power: f64 = echoes.iter().map(|z| z.norm_sqr()).sum::<f64>() / 400.0;
        let expect = 4.0 * sc.sigma2_r;
        assert!(
            (power - expect).abs() < 0.2 * expect,
            "snapshot power {power} vs expected {expect}"
        );
    }

    #[test]
    fn noiseless_single_target_echoes_live_on_the_steering_line() {
        let mut sc = scenario(4, vec![20.0], 0.01);
        sc.sigma2_r = 1e-30;
        let beams = broadside_beams(&sc, 10.0);
        let echoes = simulate_echoes(&sc, &beams, 16, 1).unwrap();
        let a = sc.geometry.steering_vector(sc.target_angles[0]).unwrap();
        let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        for t in 0..16 {
            // Residual after projecting the column onto a(theta).
            let mut ip = Complex::new(0.0, 0.0);
            let mut col_sq = 0.0;
            for i in 0..4 {
                ip += a[i].conj() * echoes[[i, t]];
                col_sq += echoes[[i, t]].norm_sqr();
            }
            let proj = ip.norm_sqr() / norm_sq;
            assert!(
                col_sq - proj < 1e-12 * col_sq.max(1e-30),
                "column {t} leaves the steering span"
            );
        }
    }

    #[test]
    fn sample_covariance_matches_closed_form() {
        let sc = scenario(4, vec![-10.0, 30.0], 0.006);
        let beams = broadside_beams(&sc, 20.0);
        let t_len = 10_000;
        let echoes = simulate_echoes(&sc, &beams, t_len, 7).unwrap();
        let mut cov = cmat_zeros::<f64>(4);
        for t in 0..t_len {
            for i in 0..4 {
                for j in 0..4 {
                    cov[[i, j]] +=
                        echoes[[i, t]] * echoes[[j, t]].conj() / Complex::new(t_len as f64, 0.0);
                }
            }
        }
        // Expectation: G R_x G^H + sigma^2 I with G = sum beta a a^H.
        let mut g = cmat_zeros::<f64>(4);
        for l in 0..2 {
            let a = sc.geometry.steering_vector(sc.target_angles[l]).unwrap();
            g = g + outer(&a, &a).mapv(|z| z * Complex::new(sc.target_gains_beta[l], 0.0));
        }
        let rx = beams.transmit_covariance();
        let gh = crate::linalg::adjoint(&g);
        let expect = g.dot(&rx).dot(&gh) + scaled_identity::<f64>(4, sc.sigma2_r);
        let mut diff = cov.clone();
        diff -= &expect;
        let rel = frob_inner(&diff, &diff).sqrt() / frob_inner(&expect, &expect).sqrt();
        assert!(rel < 0.05, "sample covariance off by {rel}");
    }

    #[test]
    fn single_broadside_target_is_located() {
        let sc = scenario(8, vec![0.0], 0.01);
        let beams = broadside_beams(&sc, 100.0);
        let result = evaluate_sensing(&sc, &beams, 1000, 0.5, 11).unwrap();
        assert!(!result.peak_angles_deg.is_empty(), "no peaks detected");
        let top = result.strongest_peaks(1)[0];
        assert!(top.abs() <= 1.0, "peak at {top} deg, expected near 0");
        assert!(result.peak_errors_deg[0] <= 1.0);
    }

    #[test]
    fn peak_locations_survive_uniform_scaling() {
        let sc = scenario(8, vec![-25.0, 40.0], 0.01);
        let beams = broadside_beams(&sc, 50.0);
        let echoes = simulate_echoes(&sc, &beams, 600, 5).unwrap();
        let scaled = echoes.mapv(|z| z * Complex::new(37.0, 0.0));
        let a = music_spectrum(&sc, &echoes, 2, 0.5).unwrap();
        let b = music_spectrum(&sc, &scaled, 2, 0.5).unwrap();
        assert_eq!(a.peak_angles_deg, b.peak_angles_deg);
    }

    #[test]
    fn too_many_targets_rejected() {
        let sc = scenario(4, vec![0.0], 0.01);
        let beams = broadside_beams(&sc, 10.0);
        let echoes = simulate_echoes(&sc, &beams, 100, 1).unwrap();
        assert!(music_spectrum(&sc, &echoes, 4, 1.0).is_err());
        assert!(simulate_echoes(&sc, &beams, 2, 1).is_err());
    }

    #[test]
    fn echoes_are_deterministic_per_seed() {
        let sc = scenario(4, vec![10.0], 0.01);
        let beams = broadside_beams(&sc, 10.0);
        let a = simulate_echoes(&sc, &beams, 64, 42).unwrap();
        let b = simulate_echoes(&sc, &beams, 64, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_echoes(&sc, &beams, 64, 43).unwrap();
        assert_ne!(a, c);
    }
}

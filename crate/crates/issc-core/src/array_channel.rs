//! Uniform linear array geometry, steering vectors, deterministic downlink
//! channels, transmit covariance, and beampattern evaluation.

use ndarray::Array1;
use num_complex::Complex;
use rand::Rng;

use crate::error::{IsscError, Result};
use crate::linalg::{
    cmat_zeros, complex_gaussian_vector, frob_norm, is_hermitian, min_eigenvalue, quad_form_re,
    trace_re, CMatrix, CVector,
};
use crate::scalar::{deg_to_rad, Scalar};
use crate::seeding::{salt, stream_rng};
use crate::semantic::SemanticProfile;

/// Uniform linear array: element count and spacing as a fraction of the
/// wavelength (0.5 = half-wavelength).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T> {
    n_antennas: usize,
    spacing_ratio: T,
}

impl<T: Scalar> ArrayGeometry<T> {
    pub fn new(n_antennas: usize, spacing_ratio: T) -> Result<Self> {
        if n_antennas < 2 {
            return Err(IsscError::domain(format!(
                "array needs at least 2 antennas, got {n_antennas}"
            )));
        }
        if spacing_ratio <= T::zero() {
            return Err(IsscError::domain("antenna spacing ratio must be positive"));
        }
        Ok(Self {
            n_antennas,
            spacing_ratio,
        })
    }

    /// Half-wavelength array with `n` elements.
    pub fn half_wavelength(n: usize) -> Result<Self> {
        Self::new(n, T::of(0.5))
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn spacing_ratio(&self) -> T {
        self.spacing_ratio
    }

    /// Array response toward `angle` (radians, |angle| <= pi/2). Element `m`
    /// carries phase `2 pi m (d/lambda) sin(angle)`, so the squared norm is
    /// exactly the element count.
    pub fn steering_vector(&self, angle: T) -> Result<CVector<T>> {
        check_angle(angle)?;
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        let step = two_pi * self.spacing_ratio * angle.sin();
        Ok(Array1::from_iter((0..self.n_antennas).map(|m| {
            let phase = step * T::of(m as f64);
            Complex::new(phase.cos(), phase.sin())
        })))
    }

    /// Beampattern `p(phi) = a^H(phi) cov a(phi)` over the given angles
    /// (radians). The covariance must be Hermitian.
    pub fn beampattern(&self, cov: &CMatrix<T>, angles: &[T]) -> Result<Vec<T>> {
        if cov.nrows() != self.n_antennas || cov.ncols() != self.n_antennas {
            return Err(IsscError::domain(format!(
                "covariance is {}x{}, array has {} antennas",
                cov.nrows(),
                cov.ncols(),
                self.n_antennas
            )));
        }
        if !is_hermitian(cov, T::of(1e-10)) {
            return Err(IsscError::domain(
                "beampattern requires a Hermitian covariance",
            ));
        }
        angles
            .iter()
            .map(|&phi| {
                let a = self.steering_vector(phi)?;
                Ok(quad_form_re(cov, &a))
            })
            .collect()
    }
}

fn check_angle<T: Scalar>(angle: T) -> Result<()> {
    let half_pi = T::of(std::f64::consts::FRAC_PI_2);
    if angle.abs() > half_pi || !angle.is_finite() {
        return Err(IsscError::domain(format!(
            "angle {angle} rad outside [-pi/2, pi/2]"
        )));
    }
    Ok(())
}

/// Downlink channel model for the communication users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// `h_k = sqrt(g_k) a(theta_k)`, reproducible from the stored gains.
    LineOfSight,
    /// Per-user i.i.d. complex Gaussian direction normalized to the same
    /// total gain `g_k N`, redrawn deterministically from the scenario seed.
    Rayleigh,
}

/// Full experiment description: geometry, user/target placement, path-loss
/// draws, noise powers, budget, and the per-user semantic profiles.
///
/// All powers are linear milliwatts and all angles radians; conversions from
/// dBm/degrees happen at the configuration layer.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub geometry: ArrayGeometry<T>,
    pub cu_angles: Vec<T>,
    pub target_angles: Vec<T>,
    /// Per-user power gains.
    pub cu_gains: Vec<T>,
    /// Downlink amplitude coefficients per target.
    pub target_gains_alpha: Vec<T>,
    /// Echo amplitude coefficients per target.
    pub target_gains_beta: Vec<T>,
    /// Communication noise power (mW).
    pub sigma2_c: T,
    /// Sensing noise power (mW).
    pub sigma2_r: T,
    /// Total power budget (mW).
    pub power_budget_mw: T,
    /// Minimum semantic rate per user (bits/s/Hz).
    pub qos_floor: T,
    /// Beampattern mismatch budget (mW^2).
    pub mismatch_budget: T,
    /// Computation power per nat of compression (mW).
    pub comp_coeff: T,
    pub semantic_profiles: Vec<SemanticProfile<T>>,
    pub seed: u64,
    pub channel_model: ChannelModel,
}

impl<T: Scalar> Scenario<T> {
    pub fn builder(geometry: ArrayGeometry<T>) -> ScenarioBuilder<T> {
        ScenarioBuilder::new(geometry)
    }

    pub fn n_users(&self) -> usize {
        self.cu_angles.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_angles.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.geometry.n_antennas()
    }

    /// Channel vector of user `k`.
    pub fn cu_channel(&self, k: usize) -> Result<CVector<T>> {
        if k >= self.n_users() {
            return Err(IsscError::IndexOutOfRange {
                what: "communication users",
                index: k,
                len: self.n_users(),
            });
        }
        let gain = self.cu_gains[k];
        match self.channel_model {
            ChannelModel::LineOfSight => {
                let a = self.geometry.steering_vector(self.cu_angles[k])?;
                Ok(a.mapv(|z| z * Complex::new(gain.sqrt(), T::zero())))
            }
            ChannelModel::Rayleigh => {
                let n = self.n_antennas();
                let mut rng = stream_rng(self.seed, salt::RAYLEIGH ^ (k as u64));
                let v = complex_gaussian_vector::<T, _>(&mut rng, n);
                let norm: T = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
                let scale = (gain * T::of(n as f64)).sqrt() / norm;
                Ok(v.mapv(|z| z * Complex::new(scale, T::zero())))
            }
        }
    }

    /// Channel vector of target `l`: `alpha_l a(theta_l)`.
    pub fn target_channel(&self, l: usize) -> Result<CVector<T>> {
        if l >= self.n_targets() {
            return Err(IsscError::IndexOutOfRange {
                what: "targets",
                index: l,
                len: self.n_targets(),
            });
        }
        let a = self.geometry.steering_vector(self.target_angles[l])?;
        let alpha = self.target_gains_alpha[l];
        Ok(a.mapv(|z| z * Complex::new(alpha, T::zero())))
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_users();
        let l = self.n_targets();
        if k == 0 {
            return Err(IsscError::domain("scenario needs at least one user"));
        }
        if l == 0 {
            return Err(IsscError::domain("scenario needs at least one target"));
        }
        for &a in self.cu_angles.iter().chain(self.target_angles.iter()) {
            check_angle(a)?;
        }
        if self.cu_gains.len() != k || self.semantic_profiles.len() != k {
            return Err(IsscError::domain(
                "per-user lists must match the number of user angles",
            ));
        }
        if self.target_gains_alpha.len() != l || self.target_gains_beta.len() != l {
            return Err(IsscError::domain(
                "per-target lists must match the number of target angles",
            ));
        }
        let positives: [(&str, T); 5] = [
            ("sigma2_c", self.sigma2_c),
            ("sigma2_r", self.sigma2_r),
            ("power_budget_mw", self.power_budget_mw),
            ("qos_floor", self.qos_floor),
            ("mismatch_budget", self.mismatch_budget),
        ];
        for (name, v) in positives {
            if v <= T::zero() || !v.is_finite() {
                return Err(IsscError::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.comp_coeff < T::zero() {
            return Err(IsscError::domain("comp_coeff must be non-negative"));
        }
        if self
            .cu_gains
            .iter()
            .chain(self.target_gains_alpha.iter())
            .chain(self.target_gains_beta.iter())
            .any(|g| *g <= T::zero())
        {
            return Err(IsscError::domain("all gains must be positive"));
        }
        Ok(())
    }
}

/// Builder for [`Scenario`]. Gains not set explicitly are drawn uniformly in
/// [0.001, 0.01] from the scenario seed (users first, then target downlink
/// and echo coefficients), which keeps every experiment reproducible.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder<T> {
    geometry: ArrayGeometry<T>,
    cu_angles: Vec<T>,
    target_angles: Vec<T>,
    cu_gains: Option<Vec<T>>,
    target_gains_alpha: Option<Vec<T>>,
    target_gains_beta: Option<Vec<T>>,
    sigma2_c: T,
    sigma2_r: T,
    power_budget_mw: T,
    qos_floor: T,
    mismatch_budget: T,
    comp_coeff: T,
    semantic_profiles: Vec<SemanticProfile<T>>,
    seed: u64,
    channel_model: ChannelModel,
}

impl<T: Scalar> ScenarioBuilder<T> {
    fn new(geometry: ArrayGeometry<T>) -> Self {
        Self {
            geometry,
            cu_angles: Vec::new(),
            target_angles: Vec::new(),
            cu_gains: None,
            target_gains_alpha: None,
            target_gains_beta: None,
            sigma2_c: T::of(1e-6),
            sigma2_r: T::of(1e-6),
            power_budget_mw: T::of(100.0),
            qos_floor: T::one(),
            mismatch_budget: T::of(5.0),
            comp_coeff: T::of(10.0),
            semantic_profiles: Vec::new(),
            seed: 0,
            channel_model: ChannelModel::LineOfSight,
        }
    }

    pub fn cu_angles(mut self, radians: Vec<T>) -> Self {
        self.cu_angles = radians;
        self
    }

    pub fn target_angles(mut self, radians: Vec<T>) -> Self {
        self.target_angles = radians;
        self
    }

    pub fn cu_gains(mut self, gains: Vec<T>) -> Self {
        self.cu_gains = Some(gains);
        self
    }

    pub fn target_gains(mut self, alpha: Vec<T>, beta: Vec<T>) -> Self {
        self.target_gains_alpha = Some(alpha);
        self.target_gains_beta = Some(beta);
        self
    }

    /// Sets both noise powers (mW).
    pub fn noise_mw(mut self, sigma2: T) -> Self {
        self.sigma2_c = sigma2;
        self.sigma2_r = sigma2;
        self
    }

    pub fn sigma2_c(mut self, v: T) -> Self {
        self.sigma2_c = v;
        self
    }

    pub fn sigma2_r(mut self, v: T) -> Self {
        self.sigma2_r = v;
        self
    }

    pub fn power_budget_mw(mut self, v: T) -> Self {
        self.power_budget_mw = v;
        self
    }

    pub fn qos_floor(mut self, v: T) -> Self {
        self.qos_floor = v;
        self
    }

    pub fn mismatch_budget(mut self, v: T) -> Self {
        self.mismatch_budget = v;
        self
    }

    pub fn comp_coeff(mut self, v: T) -> Self {
        self.comp_coeff = v;
        self
    }

    pub fn semantic_profiles(mut self, profiles: Vec<SemanticProfile<T>>) -> Self {
        self.semantic_profiles = profiles;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn channel_model(mut self, model: ChannelModel) -> Self {
        self.channel_model = model;
        self
    }

    pub fn build(self) -> Result<Scenario<T>> {
        let k = self.cu_angles.len();
        let l = self.target_angles.len();
        let mut rng = stream_rng(self.seed, salt::GAINS);
        let mut draw = |count: usize| -> Vec<T> {
            (0..count)
                .map(|_| T::of(rng.gen_range(0.001..=0.01)))
                .collect()
        };
        let cu_gains = match self.cu_gains {
            Some(g) => {
                draw(k); // keep the stream position independent of overrides
                g
            }
            None => draw(k),
        };
        let alpha = match self.target_gains_alpha {
            Some(a) => {
                draw(l);
                a
            }
            None => draw(l),
        };
        let beta = match self.target_gains_beta {
            Some(b) => {
                draw(l);
                b
            }
            None => draw(l),
        };
        let scenario = Scenario {
            geometry: self.geometry,
            cu_angles: self.cu_angles,
            target_angles: self.target_angles,
            cu_gains,
            target_gains_alpha: alpha,
            target_gains_beta: beta,
            sigma2_c: self.sigma2_c,
            sigma2_r: self.sigma2_r,
            power_budget_mw: self.power_budget_mw,
            qos_floor: self.qos_floor,
            mismatch_budget: self.mismatch_budget,
            comp_coeff: self.comp_coeff,
            semantic_profiles: self.semantic_profiles,
            seed: self.seed,
            channel_model: self.channel_model,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Scenario presets shared by the CLI defaults and the test suite.
pub mod presets {
    use super::*;
    use crate::scalar::dbm_to_mw;

    /// Default per-user semantic profiles: four uniformly weighted n-gram
    /// orders, quality floor 0.5, user 1 precision 0.8 and user 2 precision
    /// 0.9 so user 1 needs the larger extraction ratio.
    pub fn default_profiles<T: Scalar>(n_users: usize) -> Vec<SemanticProfile<T>> {
        (0..n_users)
            .map(|k| {
                let p = if k == 0 { T::of(0.8) } else { T::of(0.9) };
                SemanticProfile::uniform(4, p, T::of(0.5)).expect("default profile is feasible")
            })
            .collect()
    }

    /// Standard 18-antenna configuration: targets at [-35, 5, 45] degrees,
    /// users at [-30, 20] degrees, -60 dBm noise, QoS 1 bit/s/Hz, mismatch
    /// budget 5 mW^2, computation coefficient 10 mW/nat.
    pub fn standard<T: Scalar>(power_budget_dbm: T, seed: u64) -> Scenario<T> {
        sized(18, power_budget_dbm, seed)
    }

    /// Small instance used for quick end-to-end checks: same placement and
    /// budgets as [`standard`] but with 8 antennas.
    pub fn desk<T: Scalar>(power_budget_dbm: T, seed: u64) -> Scenario<T> {
        sized(8, power_budget_dbm, seed)
    }

    fn sized<T: Scalar>(n_antennas: usize, power_budget_dbm: T, seed: u64) -> Scenario<T> {
        let geometry = ArrayGeometry::half_wavelength(n_antennas).expect("valid geometry");
        Scenario::builder(geometry)
            .cu_angles(vec![deg_to_rad(T::of(-30.0)), deg_to_rad(T::of(20.0))])
            .target_angles(vec![
                deg_to_rad(T::of(-35.0)),
                deg_to_rad(T::of(5.0)),
                deg_to_rad(T::of(45.0)),
            ])
            .noise_mw(dbm_to_mw(T::of(-60.0)))
            .power_budget_mw(dbm_to_mw(power_budget_dbm))
            .qos_floor(T::one())
            .mismatch_budget(T::of(5.0))
            .comp_coeff(T::of(10.0))
            .semantic_profiles(default_profiles(2))
            .seed(seed)
            .build()
            .expect("preset scenario is valid")
    }
}

/// The transmit design: one Hermitian PSD covariance per user stream and per
/// sensing stream, all in mW scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet<T> {
    pub w_mats: Vec<CMatrix<T>>,
    pub r_mats: Vec<CMatrix<T>>,
}

impl<T: Scalar> BeamformerSet<T> {
    pub fn zeros(n: usize, n_users: usize, n_targets: usize) -> Self {
        Self {
            w_mats: (0..n_users).map(|_| cmat_zeros(n)).collect(),
            r_mats: (0..n_targets).map(|_| cmat_zeros(n)).collect(),
        }
    }

    /// Sum of all covariances: the transmit waveform covariance. Its trace is
    /// the radiated communication-and-sensing power.
    pub fn transmit_covariance(&self) -> CMatrix<T> {
        let n = self
            .w_mats
            .first()
            .or(self.r_mats.first())
            .map(|m| m.nrows())
            .unwrap_or(0);
        let mut acc = cmat_zeros::<T>(n);
        for m in self.w_mats.iter().chain(self.r_mats.iter()) {
            acc += m;
        }
        acc
    }

    /// Radiated power `tr(sum W_k + sum R_l)` in mW.
    pub fn total_power(&self) -> T {
        self.w_mats
            .iter()
            .chain(self.r_mats.iter())
            .map(trace_re)
            .sum()
    }

    /// Checks every matrix is Hermitian (1e-10 relative) and PSD (minimum
    /// eigenvalue at least -1e-8 times the trace).
    pub fn validate(&self) -> Result<()> {
        for (label, m) in self.iter_labeled() {
            if !is_hermitian(m, T::of(1e-10)) {
                return Err(IsscError::domain(format!("{label} is not Hermitian")));
            }
            let floor = -T::of(1e-8) * trace_re(m).max(frob_norm(m));
            let min_eig = min_eigenvalue(m);
            if min_eig < floor {
                return Err(IsscError::domain(format!(
                    "{label} is not PSD: min eigenvalue {min_eig} below {floor}"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        let s = Complex::new(factor, T::zero());
        Self {
            w_mats: self.w_mats.iter().map(|m| m.mapv(|z| z * s)).collect(),
            r_mats: self.r_mats.iter().map(|m| m.mapv(|z| z * s)).collect(),
        }
    }

    fn iter_labeled(&self) -> impl Iterator<Item = (String, &CMatrix<T>)> {
        self.w_mats
            .iter()
            .enumerate()
            .map(|(k, m)| (format!("W[{k}]"), m))
            .chain(
                self.r_mats
                    .iter()
                    .enumerate()
                    .map(|(l, m)| (format!("R[{l}]"), m)),
            )
    }
}

/// Standard beampattern evaluation grid: 181 points, one-degree steps over
/// [-90, 90] degrees, in radians.
pub fn default_angle_grid<T: Scalar>() -> Vec<T> {
    (-90..=90).map(|d| deg_to_rad(T::of(d as f64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_part, outer, standard_normal};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom(n: usize) -> ArrayGeometry<f64> {
        ArrayGeometry::half_wavelength(n).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = geom(4).steering_vector(0.0).unwrap();
        for z in a.iter() {
            assert!((z.re - 1.0).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn steering_endfire_two_elements() {
        let a = geom(2).steering_vector(std::f64::consts::FRAC_PI_2).unwrap();
        assert!((a[0].re - 1.0).abs() < 1e-15);
        assert!((a[1].re + 1.0).abs() < 1e-12, "expected -1, got {}", a[1]);
        assert!(a[1].im.abs() < 1e-12);
    }

    #[test]
    fn steering_norm_is_element_count() {
        let a = geom(18)
            .steering_vector(5.0_f64.to_radians())
            .unwrap();
        let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm_sq - 18.0).abs() < 1e-12);
        // Oracle: element-wise exponentiation of the phase progression.
        let step = 2.0 * std::f64::consts::PI * 0.5 * 5.0_f64.to_radians().sin();
        for (m, z) in a.iter().enumerate() {
            let expect = Complex::new(0.0, step * m as f64).exp();
            assert!((z - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn steering_rejects_out_of_range_angle() {
        assert!(geom(4).steering_vector(1.8).is_err());
        assert!(geom(4).steering_vector(-2.0).is_err());
    }

    fn scenario_with(gains: Vec<f64>, angles: Vec<f64>, n: usize) -> Scenario<f64> {
        let k = angles.len();
        Scenario::builder(geom(n))
            .cu_angles(angles)
            .target_angles(vec![0.3])
            .cu_gains(gains)
            .target_gains(vec![0.003], vec![0.003])
            .semantic_profiles(presets::default_profiles(k))
            .build()
            .unwrap()
    }

    #[test]
    fn cu_channel_is_scaled_steering() {
        let sc = scenario_with(vec![0.0025], vec![-30.0_f64.to_radians()], 18);
        let h = sc.cu_channel(0).unwrap();
        let a = sc.geometry.steering_vector(sc.cu_angles[0]).unwrap();
        for i in 0..18 {
            assert!((h[i] - a[i] * Complex::new(0.05, 0.0)).norm() < 1e-14);
        }
        let norm_sq: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm_sq - 0.0025 * 18.0).abs() < 1e-12);
    }

    #[test]
    fn cu_channel_unit_gain_broadside() {
        let sc = scenario_with(vec![1.0], vec![0.0], 2);
        let h = sc.cu_channel(0).unwrap();
        assert!((h[0].re - 1.0).abs() < 1e-14 && (h[1].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cu_channel_index_out_of_range() {
        let sc = scenario_with(vec![0.01], vec![0.0], 4);
        assert!(sc.cu_channel(1).is_err());
    }

    #[test]
    fn channels_are_deterministic_per_seed() {
        let build = || {
            Scenario::builder(geom(8))
                .cu_angles(vec![0.1, -0.2])
                .target_angles(vec![0.5])
                .semantic_profiles(presets::default_profiles(2))
                .seed(99)
                .build()
                .unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a.cu_gains, b.cu_gains);
        assert_eq!(a.target_gains_alpha, b.target_gains_alpha);
        assert_eq!(a.cu_channel(1).unwrap(), b.cu_channel(1).unwrap());
        // Rayleigh mode is seeded too.
        let mut ray = build();
        ray.channel_model = ChannelModel::Rayleigh;
        let h1 = ray.cu_channel(0).unwrap();
        let h2 = ray.cu_channel(0).unwrap();
        assert_eq!(h1, h2);
        let g = ray.cu_gains[0];
        let norm_sq: f64 = h1.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm_sq - g * 8.0).abs() < 1e-12, "rayleigh norm preserved");
    }

    #[test]
    fn target_channel_matches_cu_construction() {
        let sc = Scenario::builder(geom(18))
            .cu_angles(vec![0.4])
            .target_angles(vec![0.4, 45.0_f64.to_radians()])
            .cu_gains(vec![0.003 * 0.003])
            .target_gains(vec![0.5, 0.003], vec![0.001, 0.001])
            .semantic_profiles(presets::default_profiles(1))
            .build()
            .unwrap();
        let hl = sc.target_channel(1).unwrap();
        let norm_sq: f64 = hl.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm_sq - 0.003 * 0.003 * 18.0).abs() < 1e-12);
        // Same angle and gain=alpha^2 gives the same vector as the CU model.
        let hc = sc.cu_channel(0).unwrap();
        let ht = sc.target_channel(0).unwrap();
        let scaled = ht.mapv(|z| z * Complex::new(0.003 / 0.5, 0.0));
        for i in 0..18 {
            assert!((hc[i] - scaled[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn transmit_covariance_sums_and_traces() {
        let n = 2;
        let mut beams = BeamformerSet::<f64>::zeros(n, 1, 1);
        assert!(frob_norm(&beams.transmit_covariance()) < 1e-15);
        beams.w_mats[0] = crate::linalg::scaled_identity(n, 1.0);
        beams.r_mats[0] = crate::linalg::scaled_identity(n, 1.0);
        let rx = beams.transmit_covariance();
        assert!((rx[[0, 0]].re - 2.0).abs() < 1e-15);
        assert!((trace_re(&rx) - 4.0).abs() < 1e-15);
        assert!((beams.total_power() - 4.0).abs() < 1e-15);
        beams.validate().unwrap();
    }

    #[test]
    fn sum_of_random_psd_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let mut beams = BeamformerSet::<f64>::zeros(n, 2, 2);
        for m in beams.w_mats.iter_mut().chain(beams.r_mats.iter_mut()) {
            let v = complex_gaussian_vector::<f64, _>(&mut rng, n);
            *m = outer(&v, &v);
        }
        let rx = beams.transmit_covariance();
        assert!(min_eigenvalue(&rx) >= -1e-10);
        beams.validate().unwrap();
    }

    #[test]
    fn validate_rejects_non_psd() {
        let mut beams = BeamformerSet::<f64>::zeros(3, 1, 1);
        beams.w_mats[0] = crate::linalg::scaled_identity(3, -1.0);
        assert!(beams.validate().is_err());
    }

    #[test]
    fn beampattern_identity_is_flat() {
        let g = geom(6);
        let cov = crate::linalg::scaled_identity::<f64>(6, 1.0);
        let grid = default_angle_grid::<f64>();
        assert_eq!(grid.len(), 181);
        let p = g.beampattern(&cov, &grid).unwrap();
        for v in p {
            assert!((v - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beampattern_coherent_peak() {
        let g = geom(8);
        let theta = 0.3;
        let a = g.steering_vector(theta).unwrap();
        let cov = outer(&a, &a);
        let p = g.beampattern(&cov, &[theta]).unwrap();
        assert!((p[0] - 64.0).abs() < 1e-10, "expected N^2, got {}", p[0]);
    }

    #[test]
    fn beampattern_rejects_non_hermitian() {
        let g = geom(3);
        let mut cov = crate::linalg::scaled_identity::<f64>(3, 1.0);
        cov[[0, 1]] = Complex::new(1.0, 0.0); // asymmetric
        assert!(g.beampattern(&cov, &[0.0]).is_err());
    }

    #[test]
    fn beampattern_nonnegative_for_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = geom(5);
        let mut raw = cmat_zeros::<f64>(5);
        for i in 0..5 {
            for j in 0..5 {
                raw[[i, j]] = Complex::new(standard_normal(&mut rng), standard_normal(&mut rng));
            }
        }
        let h = hermitian_part(&raw);
        let cov = h.dot(&h); // PSD
        let grid = default_angle_grid::<f64>();
        for v in g.beampattern(&cov, &grid).unwrap() {
            assert!(v >= -1e-10);
        }
    }

    proptest! {
        /// Steering vectors always have unit-modulus entries and norm^2 = N.
        #[test]
        fn steering_modulus_property(angle in -1.57f64..1.57, n in 2usize..24) {
            let a = geom(n).steering_vector(angle).unwrap();
            for z in a.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
            let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm_sq - n as f64).abs() < 1e-10);
        }

        /// Covariance is linear in the beamformer set scale.
        #[test]
        fn covariance_scales_linearly(c in 0.01f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let n = 4;
            let mut beams = BeamformerSet::<f64>::zeros(n, 2, 1);
            for m in beams.w_mats.iter_mut().chain(beams.r_mats.iter_mut()) {
                let v = complex_gaussian_vector::<f64, _>(&mut rng, n);
                *m = outer(&v, &v);
            }
            let rx = beams.transmit_covariance();
            let rx_scaled = beams.scaled(c).transmit_covariance();
            for (a, b) in rx_scaled.iter().zip(rx.iter()) {
                prop_assert!((a - b * Complex::new(c, 0.0)).norm() < 1e-10 * c.max(1.0));
            }
        }
    }
}

//! Experiment configuration: TOML with every field optional, defaulting to
//! the standard 18-antenna setup. Angles are degrees and powers dBm here;
//! conversion to radians/mW happens exactly once, in [`ExperimentConfig::scenario`].

use std::path::Path;

use serde::Deserialize;

use issc_core::array_channel::{presets, ArrayGeometry, ChannelModel, Scenario};
use issc_core::optimizer::OptimizerOptions;
use issc_core::scalar::{dbm_to_mw, deg_to_rad};
use issc_core::semantic::SemanticProfile;
use issc_core::sensing::SensingConfig;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::n_antennas")]
    pub n_antennas: usize,
    #[serde(default = "defaults::spacing_ratio")]
    pub spacing_ratio: f64,
    #[serde(default = "defaults::cu_angles_deg")]
    pub cu_angles_deg: Vec<f64>,
    #[serde(default = "defaults::target_angles_deg")]
    pub target_angles_deg: Vec<f64>,
    #[serde(default = "defaults::noise_dbm")]
    pub noise_c_dbm: f64,
    #[serde(default = "defaults::noise_dbm")]
    pub noise_r_dbm: f64,
    #[serde(default = "defaults::power_budget_dbm")]
    pub power_budget_dbm: f64,
    #[serde(default = "defaults::qos_floor")]
    pub qos_floor: f64,
    #[serde(default = "defaults::mismatch_budget")]
    pub mismatch_budget: f64,
    #[serde(default = "defaults::comp_coeff")]
    pub comp_coeff: f64,
    #[serde(default = "defaults::quality_floor")]
    pub quality_floor: f64,
    #[serde(default)]
    pub channel_model: ChannelModelConfig,
    #[serde(default)]
    pub semantic_profiles: Vec<ProfileConfig>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub emit_trace: bool,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub sensing: SensingSection,
    #[serde(default)]
    pub music: MusicSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModelConfig {
    #[default]
    Los,
    Rayleigh,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub weights: Vec<f64>,
    pub precisions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "defaults::sweep_start")]
    pub start_dbm: f64,
    #[serde(default = "defaults::sweep_stop")]
    pub stop_dbm: f64,
    #[serde(default = "defaults::sweep_step")]
    pub step_dbm: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start_dbm: defaults::sweep_start(),
            stop_dbm: defaults::sweep_stop(),
            step_dbm: defaults::sweep_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub sidelobe_margin_deg: Option<f64>,
    pub grid_step_deg: Option<f64>,
    pub crosscorr_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MusicSection {
    #[serde(default = "defaults::snapshots")]
    pub snapshots: usize,
    #[serde(default = "defaults::music_grid")]
    pub grid_step_deg: f64,
}

impl Default for MusicSection {
    fn default() -> Self {
        Self {
            snapshots: defaults::snapshots(),
            grid_step_deg: defaults::music_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_outer: Option<usize>,
    pub randomization_draws: Option<usize>,
    pub outer_tol: Option<f64>,
    pub solver_tol: Option<f64>,
}

mod defaults {
    pub fn seed() -> u64 {
        0
    }
    pub fn n_antennas() -> usize {
        18
    }
    pub fn spacing_ratio() -> f64 {
        0.5
    }
    pub fn cu_angles_deg() -> Vec<f64> {
        vec![-30.0, 20.0]
    }
    pub fn target_angles_deg() -> Vec<f64> {
        vec![-35.0, 5.0, 45.0]
    }
    pub fn noise_dbm() -> f64 {
        -60.0
    }
    pub fn power_budget_dbm() -> f64 {
        20.0
    }
    pub fn qos_floor() -> f64 {
        1.0
    }
    pub fn mismatch_budget() -> f64 {
        5.0
    }
    pub fn comp_coeff() -> f64 {
        10.0
    }
    pub fn quality_floor() -> f64 {
        0.5
    }
    pub fn output_dir() -> String {
        "out".into()
    }
    pub fn sweep_start() -> f64 {
        5.0
    }
    pub fn sweep_stop() -> f64 {
        25.0
    }
    pub fn sweep_step() -> f64 {
        2.5
    }
    pub fn snapshots() -> usize {
        1000
    }
    pub fn music_grid() -> f64 {
        0.5
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses to defaults")
    }
}

impl ExperimentConfig {
    /// Loads and validates a config file; an empty file yields the default
    /// experiment.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: String| CliError::Config(format!("{name}: {msg}"));
        if self.n_antennas < 2 {
            return Err(field("n_antennas", "need at least 2".into()));
        }
        for (name, angles) in [
            ("cu_angles_deg", &self.cu_angles_deg),
            ("target_angles_deg", &self.target_angles_deg),
        ] {
            if angles.is_empty() {
                return Err(field(name, "must not be empty".into()));
            }
            for (i, &a) in angles.iter().enumerate() {
                if !(-90.0..=90.0).contains(&a) {
                    return Err(field(
                        &format!("{name}[{i}]"),
                        format!("angle {a} outside [-90, 90] degrees"),
                    ));
                }
            }
        }
        if !self.semantic_profiles.is_empty()
            && self.semantic_profiles.len() != self.cu_angles_deg.len()
        {
            return Err(field(
                "semantic_profiles",
                format!(
                    "{} profiles for {} users",
                    self.semantic_profiles.len(),
                    self.cu_angles_deg.len()
                ),
            ));
        }
        if self.sweep.step_dbm <= 0.0 || self.sweep.stop_dbm < self.sweep.start_dbm {
            return Err(field("sweep", "need step > 0 and stop >= start".into()));
        }
        if !(0.0..=1.0).contains(&self.quality_floor) || self.quality_floor == 0.0 {
            return Err(field("quality_floor", "must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn profiles(&self) -> Result<Vec<SemanticProfile<f64>>, CliError> {
        if self.semantic_profiles.is_empty() {
            return Ok(presets::default_profiles(self.cu_angles_deg.len()));
        }
        self.semantic_profiles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                SemanticProfile::new(p.weights.clone(), p.precisions.clone(), self.quality_floor)
                    .map_err(|e| CliError::Config(format!("semantic_profiles[{i}]: {e}")))
            })
            .collect()
    }

    /// Builds the scenario at the given budget (dBm), using the config seed
    /// unless overridden.
    pub fn scenario(&self, power_dbm: f64, seed: u64) -> Result<Scenario<f64>, CliError> {
        let geometry = ArrayGeometry::new(self.n_antennas, self.spacing_ratio)
            .map_err(|e| CliError::Config(format!("geometry: {e}")))?;
        Scenario::builder(geometry)
            .cu_angles(self.cu_angles_deg.iter().map(|&d| deg_to_rad(d)).collect())
            .target_angles(
                self.target_angles_deg
                    .iter()
                    .map(|&d| deg_to_rad(d))
                    .collect(),
            )
            .sigma2_c(dbm_to_mw(self.noise_c_dbm))
            .sigma2_r(dbm_to_mw(self.noise_r_dbm))
            .power_budget_mw(dbm_to_mw(power_dbm))
            .qos_floor(self.qos_floor)
            .mismatch_budget(self.mismatch_budget)
            .comp_coeff(self.comp_coeff)
            .semantic_profiles(self.profiles()?)
            .seed(seed)
            .channel_model(match self.channel_model {
                ChannelModelConfig::Los => ChannelModel::LineOfSight,
                ChannelModelConfig::Rayleigh => ChannelModel::Rayleigh,
            })
            .build()
            .map_err(|e| CliError::Config(format!("scenario: {e}")))
    }

    pub fn sensing_config(&self) -> SensingConfig<f64> {
        let mut cfg = SensingConfig::default();
        if let Some(m) = self.sensing.sidelobe_margin_deg {
            cfg.sidelobe_margin_deg = m;
        }
        if let Some(g) = self.sensing.grid_step_deg {
            cfg.grid_step_deg = g;
        }
        cfg.crosscorr_tol = self.sensing.crosscorr_tol;
        cfg
    }

    pub fn optimizer_options(&self, optimize_rho: bool) -> OptimizerOptions<f64> {
        let mut opts = OptimizerOptions {
            optimize_rho,
            ..Default::default()
        };
        if let Some(v) = self.optimizer.max_outer {
            opts.max_outer = v;
        }
        if let Some(v) = self.optimizer.randomization_draws {
            opts.randomization_draws = v;
        }
        if let Some(v) = self.optimizer.outer_tol {
            opts.outer_tol = v;
        }
        if let Some(v) = self.optimizer.solver_tol {
            opts.solver_tol = v;
        }
        opts
    }

    pub fn sweep_points(&self) -> Vec<f64> {
        let mut points = Vec::new();
        let mut p = self.sweep.start_dbm;
        while p <= self.sweep.stop_dbm + 1e-9 {
            points.push(p);
            p += self.sweep.step_dbm;
        }
        points
    }

    pub fn music_settings(&self) -> (usize, f64) {
        (self.music.snapshots, self.music.grid_step_deg)
    }
}

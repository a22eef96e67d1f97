//! Declarative run configuration.
//!
//! One TOML file drives every subcommand; the CLI overrides single fields
//! from flags and writes the merged result next to the outputs as
//! `effective_config.toml`, so re-running from that file reproduces a run
//! exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chaos::ChaosOptions;
use crate::error::{Error, Result};
use crate::hamiltonian::{BuildOptions, MasConfig};
use crate::powder::{LocalFieldMode, OrientationSampling, PowderPlan, RunOptions};
use crate::propagator::EvolutionConfig;
use crate::structure::Inclusion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Structure JSON path.
    pub structure: PathBuf,
    /// Output directory; created on demand.
    pub out_dir: PathBuf,
    /// Initially polarized carbon; defaults to the structure's first ¹³C.
    pub polarized_site: Option<u32>,
    /// Bath protons to keep (`None` = all), counted in bath order.
    pub protons: Option<usize>,
    pub inclusion: Inclusion,
    /// Methyl/ammonium jump averaging of Hamiltonian coefficients.
    pub group_average: bool,
    /// Base seed for rest states; per-trajectory seeds derive from it.
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub mas: MasSection,
    pub evolution: EvolutionSection,
    pub powder: PowderSection,
    pub chaos: ChaosSection,
    pub local_field: LocalFieldSection,
    pub init_rate: InitRateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            structure: PathBuf::from("data/alanine.json"),
            out_dir: PathBuf::from("out"),
            polarized_site: None,
            protons: None,
            inclusion: Inclusion::WholeGroups,
            group_average: true,
            seed: 1,
            jobs: 0,
            mas: MasSection::default(),
            evolution: EvolutionSection::default(),
            powder: PowderSection::default(),
            chaos: ChaosSection::default(),
            local_field: LocalFieldSection::default(),
            init_rate: InitRateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasSection {
    pub rotor_frequency_hz: f64,
    /// Rotor tilt in degrees; `None` means the magic angle.
    pub rotor_angle_deg: Option<f64>,
}

impl Default for MasSection {
    fn default() -> Self {
        MasSection { rotor_frequency_hz: crate::constants::DEFAULT_ROTOR_FREQUENCY_HZ, rotor_angle_deg: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub dt_s: f64,
    pub t_max_s: f64,
    /// Record every this many rotor periods.
    pub record_stride: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection { dt_s: 2.0e-6, t_max_s: 40.0e-3, record_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowderSection {
    pub orientations: usize,
    pub orientation_seed: u64,
    pub seeds_per_orientation: usize,
    /// Explicit quaternions (w, x, y, z); overrides random sampling.
    pub orientation_list: Option<Vec<[f64; 4]>>,
}

impl Default for PowderSection {
    fn default() -> Self {
        PowderSection {
            orientations: 200,
            orientation_seed: 1,
            seeds_per_orientation: 1,
            orientation_list: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    /// Bath sizes for the η sweep.
    pub sweep: Vec<usize>,
    /// Magnetization sector; `None` picks the largest one under the cap.
    pub sector: Option<usize>,
    pub orientations: usize,
    pub orientation_seed: u64,
    pub bin_width: f64,
    pub s_max: f64,
    pub unfold_degree: usize,
    pub edge_trim: f64,
    pub max_protons: usize,
    pub max_sector_dim: usize,
}

impl Default for ChaosSection {
    fn default() -> Self {
        let o = ChaosOptions::default();
        ChaosSection {
            sweep: vec![8, 11, 14, 17],
            sector: None,
            orientations: 8,
            orientation_seed: 1,
            bin_width: o.bin_width,
            s_max: o.s_max,
            unfold_degree: o.unfold_degree,
            edge_trim: o.edge_trim,
            max_protons: o.max_protons,
            max_sector_dim: o.max_sector_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalFieldModeSetting {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalFieldSection {
    pub mode: LocalFieldModeSetting,
    /// Protons in the sweep (`None` = all).
    pub max_protons: Option<usize>,
    pub quadrature_nodes: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for LocalFieldSection {
    fn default() -> Self {
        LocalFieldSection {
            mode: LocalFieldModeSetting::Analytic,
            max_protons: None,
            quadrature_nodes: 64,
            mc_samples: 100_000,
            mc_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFit {
    /// Slope of 1 − P_z against t.
    Linear,
    /// Slope of 1 − P_z against t².
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitRateSection {
    pub bath_sizes: Vec<usize>,
    /// Fit window from t = 0, seconds.
    pub window_s: f64,
    pub fit: RateFit,
    pub orientations: usize,
}

impl Default for InitRateSection {
    fn default() -> Self {
        InitRateSection {
            bath_sizes: vec![7, 11, 14],
            window_s: 2.0e-3,
            fit: RateFit::Linear,
            orientations: 8,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.evolution.dt_s <= 0.0 || self.evolution.t_max_s < 0.0 {
            return Err(Error::Config("time step and horizon must be positive".into()));
        }
        if self.mas.rotor_frequency_hz <= 0.0 {
            return Err(Error::Config("rotor frequency must be positive".into()));
        }
        if self.powder.orientations == 0 {
            return Err(Error::Config("powder average needs at least one orientation".into()));
        }
        if let Some(deg) = self.mas.rotor_angle_deg {
            if !(0.0..=90.0).contains(&deg) {
                return Err(Error::Config(format!("rotor angle {deg}° out of [0°, 90°]")));
            }
        }
        let period = 1.0 / self.mas.rotor_frequency_hz;
        let steps = period / self.evolution.dt_s;
        if steps < 1.0 - 1e-9 || (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "time step {} s must divide the rotor period {period} s a whole number of times",
                self.evolution.dt_s
            )));
        }
        let periods = self.evolution.t_max_s / period;
        if (periods - periods.round()).abs() > 1e-6 * periods.max(1.0) {
            return Err(Error::Config(format!(
                "t_max {} s must be a whole number of rotor periods ({period} s)",
                self.evolution.t_max_s
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    #[must_use]
    pub fn mas_config(&self) -> MasConfig {
        MasConfig {
            rotor_frequency_hz: self.mas.rotor_frequency_hz,
            rotor_angle_rad: self
                .mas
                .rotor_angle_deg
                .map_or_else(crate::constants::magic_angle, f64::to_radians),
        }
    }

    #[must_use]
    pub fn evolution_config(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.evolution.dt_s,
            t_max: self.evolution.t_max_s,
            record_stride: self.evolution.record_stride.max(1),
            seed: self.seed,
        }
    }

    #[must_use]
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { group_average: self.group_average, ..BuildOptions::default() }
    }

    #[must_use]
    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            build: self.build_options(),
            seeds_per_orientation: self.powder.seeds_per_orientation.max(1),
        }
    }

    #[must_use]
    pub fn powder_plan(&self) -> PowderPlan {
        let sampling = match &self.powder.orientation_list {
            Some(list) => OrientationSampling::RepeatableList(list.clone()),
            None => OrientationSampling::UniformRandom,
        };
        let n = match &self.powder.orientation_list {
            Some(list) => list.len(),
            None => self.powder.orientations,
        };
        PowderPlan {
            n_orientations: n,
            orientation_seed: self.powder.orientation_seed,
            sampling,
        }
    }

    #[must_use]
    pub fn chaos_options(&self) -> ChaosOptions {
        ChaosOptions {
            n_up: self.chaos.sector,
            max_protons: self.chaos.max_protons,
            max_sector_dim: self.chaos.max_sector_dim,
            unfold_degree: self.chaos.unfold_degree,
            edge_trim: self.chaos.edge_trim,
            bin_width: self.chaos.bin_width,
            s_max: self.chaos.s_max,
        }
    }

    #[must_use]
    pub fn local_field_mode(&self) -> LocalFieldMode {
        match self.local_field.mode {
            LocalFieldModeSetting::Analytic => LocalFieldMode::Analytic,
            LocalFieldModeSetting::MonteCarlo => LocalFieldMode::MonteCarlo {
                samples: self.local_field.mc_samples,
                seed: self.local_field.mc_seed,
            },
        }
    }
}

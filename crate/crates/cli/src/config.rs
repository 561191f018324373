//! Run configuration: a TOML file whose top-level keys choose the command,
//! grid and seed, with one optional section per stage.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use hmhf_core::blowup::PhysicalConfig;
use hmhf_core::evolution::{EvolutionConfig, LinearPart, TuneConfig};
use hmhf_core::profile::ProfileConfig;
use hmhf_core::radial::{GridSpec, RadialGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Profile,
    Spectrum,
    Evolve,
    Tune,
    Blowup,
    Verify,
    All,
}

impl Command {
    pub fn stages(self) -> &'static [Command] {
        use Command::*;
        match self {
            All => &[Profile, Spectrum, Tune, Blowup],
            Profile => &[Profile],
            Spectrum => &[Spectrum],
            Evolve => &[Evolve],
            Tune => &[Tune],
            Blowup => &[Blowup],
            Verify => &[Verify],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Tune => "tune",
            Command::Blowup => "blowup",
            Command::Verify => "verify",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Gaussian,
    Psi1,
    Csv,
}

/// Odd perturbation `h` of the profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSection {
    pub shape: ShapeName,
    /// Target `‖h‖_Y`.
    pub amplitude: f64,
    /// Largest accepted amplitude for `tune` and `blowup`.
    pub max_amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Samples for `shape = "csv"`, in the radial-function CSV format.
    pub path: Option<PathBuf>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            shape: ShapeName::Gaussian,
            amplitude: 1e-3,
            max_amplitude: 1e-2,
            center: 2.0,
            width: 1.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub ds: f64,
    pub s_end: f64,
    pub nonlinear: bool,
    pub linear: LinearPart,
    pub escape: f64,
    pub record_every: usize,
    /// Blowup-time parameter of the initial data.
    #[serde(rename = "T")]
    pub t: f64,
    /// Similarity-time window of the decay fit.
    pub window: [f64; 2],
}

impl Default for EvolveSection {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        Self {
            ds: e.ds,
            s_end: e.s_end,
            nonlinear: e.nonlinear,
            linear: e.linear,
            escape: e.escape,
            record_every: e.record_every,
            t: 1.0,
            window: [1.0, 4.0],
        }
    }
}

impl EvolveSection {
    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            ds: self.ds,
            s_end: self.s_end,
            nonlinear: self.nonlinear,
            linear: self.linear,
            escape: self.escape,
            halt_on_escape: true,
            record_every: self.record_every,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Number of leading eigenpairs to report.
    pub eigenvalues: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { eigenvalues: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(rename = "Y_max", default = "default_y_max")]
    pub y_max: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub blowup: PhysicalConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_y_max() -> f64 {
    30.0
}
fn default_resolution() -> usize {
    400
}
fn default_stretch() -> f64 {
    3.0
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

/// Prefixes a validation error with its section.
fn in_section<T>(section: &str, r: hmhf_core::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow::anyhow!("[{section}] {e}"))
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.y_max, self.resolution, self.stretch)
    }

    pub fn validate(&self) -> Result<()> {
        RadialGrid::new(self.grid_spec()).map_err(|e| anyhow::anyhow!("{e}"))?;
        in_section("profile", self.profile.validate())?;
        in_section("evolve", self.evolve.evolution().validate())?;
        if !(0.5..=1.5).contains(&self.evolve.t) {
            bail!(
                "[evolve] invalid parameter `T` = {}: must lie in [1/2, 3/2]",
                self.evolve.t
            );
        }
        in_section("tune", self.tune.validate())?;
        in_section("blowup", self.blowup.validate())?;
        if self.spectrum.eigenvalues == 0 || self.spectrum.eigenvalues > self.resolution / 4 {
            bail!(
                "[spectrum] invalid parameter `eigenvalues` = {}: must lie in 1..=resolution/4",
                self.spectrum.eigenvalues
            );
        }
        let p = &self.perturbation;
        if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
            bail!(
                "[perturbation] invalid parameter `amplitude` = {}: must be non-negative",
                p.amplitude
            );
        }
        if !(p.width > 0.0) {
            bail!(
                "[perturbation] invalid parameter `width` = {}: must be positive",
                p.width
            );
        }
        if p.shape == ShapeName::Csv && p.path.is_none() {
            bail!("[perturbation] `path` is required when shape = \"csv\"");
        }
        let needs_small = matches!(
            self.command,
            Some(Command::Tune | Command::Blowup | Command::All)
        );
        if needs_small && p.amplitude > p.max_amplitude {
            bail!(
                "[perturbation] invalid parameter `amplitude` = {}: exceeds max_amplitude = {}",
                p.amplitude,
                p.max_amplitude
            );
        }
        Ok(())
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Parses a configuration text, applies the overrides and validates.
pub fn parse_config(text: &str, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
    match (ov.command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            bail!(
                "invalid parameter `command`: config says \"{}\" but \"{}\" was requested",
                b.name(),
                a.name()
            )
        }
        (Some(a), _) => cfg.command = Some(a),
        (None, Some(_)) => {}
        (None, None) => {
            bail!("no command given: pass a subcommand or set `command` in the configuration")
        }
    }
    if let Some(out) = &ov.output_dir {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

//! Flat key-value JSON configuration file; command-line flags override any
//! value set here.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use irslink_core::simulator::ScenarioConfig;
use irslink_core::SystemDims;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub subcarriers: Option<usize>,
    pub taps: Option<usize>,
    pub elements: Option<usize>,
    pub users: Option<usize>,
    pub seed: Option<u64>,
    pub carrier_frequency: Option<f64>,
    pub bandwidth: Option<f64>,
    pub noise_psd: Option<f64>,
    pub los_probability: Option<f64>,
    pub cluster_count: Option<usize>,
    pub minus_state_gain: Option<f64>,
    pub power: Option<f64>,
    pub repetitions: Option<usize>,
    pub noiseless: Option<bool>,
    pub oracle: Option<bool>,
    pub max_flip_passes: Option<usize>,
    pub improvement_tolerance: Option<f64>,
    pub phase_grid_size: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config file {}", path.display()))
            }
        }
    }
}

/// `K,M,N` triple from the command line.
pub fn parse_dims(text: &str) -> Result<SystemDims> {
    let parts: Vec<&str> = text.split(',').collect();
    anyhow::ensure!(
        parts.len() == 3,
        "--dims expects K,M,N (e.g. 500,20,4096), got '{text}'"
    );
    let parse = |part: &str, name: &str| -> Result<usize> {
        part.trim()
            .parse()
            .with_context(|| format!("bad {name} value '{part}' in --dims"))
    };
    let k = parse(parts[0], "subcarrier")?;
    let m = parse(parts[1], "tap")?;
    let n = parse(parts[2], "element")?;
    Ok(SystemDims::new(k, m, n)?)
}

/// Scenario flags shared by `generate` and `pipeline`.
#[derive(Clone, Debug, clap::Args)]
pub struct ScenarioFlags {
    /// Base seed for every random draw in the pipeline.
    #[arg(long)]
    pub seed: Option<u64>,

    /// System dimensions as K,M,N (subcarriers, taps, elements).
    #[arg(long)]
    pub dims: Option<String>,

    /// Number of users.
    #[arg(long)]
    pub users: Option<usize>,

    /// Bandwidth / symbol rate in Hz.
    #[arg(long)]
    pub bandwidth: Option<f64>,

    /// Carrier frequency in Hz.
    #[arg(long)]
    pub carrier_frequency: Option<f64>,

    /// Noise power spectral density in W/Hz (omit to calibrate for a
    /// 0 dB median subcarrier SNR under a random configuration).
    #[arg(long)]
    pub noise_psd: Option<f64>,

    /// Probability of a line-of-sight surface→user path.
    #[arg(long)]
    pub los_probability: Option<f64>,

    /// Scattered clusters per link.
    #[arg(long)]
    pub clusters: Option<usize>,
}

impl ScenarioFlags {
    pub fn resolve(&self, file: &FileConfig) -> Result<ScenarioConfig> {
        let dims = match &self.dims {
            Some(text) => parse_dims(text)?,
            None => SystemDims::new(
                file.subcarriers.unwrap_or(500),
                file.taps.unwrap_or(20),
                file.elements.unwrap_or(4096),
            )?,
        };
        let users = self.users.or(file.users).unwrap_or(50);
        let seed = self.seed.or(file.seed).unwrap_or(1);
        let mut config = ScenarioConfig::new(dims, users, seed);
        if let Some(value) = self.bandwidth.or(file.bandwidth) {
            config.bandwidth = value;
        }
        if let Some(value) = self.carrier_frequency.or(file.carrier_frequency) {
            config.carrier_frequency = value;
        }
        if let Some(value) = self.noise_psd.or(file.noise_psd) {
            config.noise_psd = Some(value);
        }
        if let Some(value) = self.los_probability.or(file.los_probability) {
            config.los_probability = value;
        }
        if let Some(value) = self.clusters.or(file.cluster_count) {
            config.cluster_count = value;
        }
        if let Some(value) = file.minus_state_gain {
            config.minus_state_gain = value;
        }
        config.validate()?;
        Ok(config)
    }
}

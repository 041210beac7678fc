//! Synthetic scenario generation and the pilot phase that produces
//! measurement datasets.
//!
//! The channel generator is our own: scattered paths with complex Gaussian
//! gains, an exponential power–delay profile, fractional delays mapped onto
//! symbol-spaced taps through the sinc pulse, and plane-wave element phases
//! over a half-wavelength grid. It exists to provide *known* ground truth
//! for the estimator and optimizer; physical realism beyond that is not a
//! goal.

use std::borrow::Cow;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::compose_channel;
use crate::error::{Error, Result};
use crate::seed::{rng_for, Stream};
use crate::transform::{fwht_in_place, hadamard_entry};
use crate::types::SystemDims;
use crate::{
    AffineChannelModel, ChannelImpulseResponse, DelayBasis, FrequencySignal, IrsConfiguration,
    Matrix, C64,
};

/// Average energy of one element's channel (surface leg), before the
/// LoS/NLoS split.
const ELEMENT_GAIN: f64 = 1.0;
/// Direct-path energy as a fraction of the aggregate element energy
/// `N · ELEMENT_GAIN`; the direct link is heavily obstructed.
const DIRECT_GAIN_FRACTION: f64 = 0.02;
/// LoS-to-scattered power ratio on surface→user links that have a LoS path.
const RICIAN_K: f64 = 10.0;
/// Exponential power–delay constant, in symbol periods.
const DELAY_SPREAD_SYMBOLS: f64 = 2.0;
/// Reference transmit power used when calibrating the default noise level.
const CALIBRATION_POWER: f64 = 1.0;

/// Scenario parameters. `noise_psd: None` asks [`generate_scenario`] to
/// calibrate the noise level so the median per-subcarrier SNR under a random
/// configuration is about 0 dB at 1 W transmit power.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dims: SystemDims,
    /// Carrier frequency in Hz; fixes the element spacing at λ/2.
    pub carrier_frequency: f64,
    /// Symbol rate / bandwidth in Hz.
    pub bandwidth: f64,
    /// Noise power spectral density in W/Hz, or `None` for the calibrated default.
    pub noise_psd: Option<f64>,
    pub num_users: usize,
    /// Probability that a user has a line-of-sight path from the surface.
    pub los_probability: f64,
    /// Number of scattered clusters per link.
    pub cluster_count: usize,
    /// Base seed; every random draw in the pipeline derives from it.
    pub seed: u64,
    /// Amplitude applied (negated) in the -1 state; 1.0 is the exact π
    /// phase flip. A hook for hardware imperfection studies; estimation
    /// and optimization always assume the exact model.
    pub minus_state_gain: f64,
}

impl ScenarioConfig {
    pub fn new(dims: SystemDims, num_users: usize, seed: u64) -> Self {
        Self {
            dims,
            carrier_frequency: 4e9,
            bandwidth: 1e7,
            noise_psd: None,
            num_users,
            los_probability: 0.5,
            cluster_count: 4,
            seed,
            minus_state_gain: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth <= 0.0 {
            return Err(Error::InvalidConfig("bandwidth must be positive".into()));
        }
        if self.carrier_frequency <= 0.0 {
            return Err(Error::InvalidConfig("carrier frequency must be positive".into()));
        }
        if let Some(n0) = self.noise_psd {
            if n0 <= 0.0 {
                return Err(Error::InvalidConfig("noise PSD must be positive".into()));
            }
        }
        if self.num_users == 0 {
            return Err(Error::InvalidConfig("at least one user required".into()));
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return Err(Error::InvalidConfig("los_probability must be in [0, 1]".into()));
        }
        if self.cluster_count == 0 {
            return Err(Error::InvalidConfig("cluster_count must be at least 1".into()));
        }
        if self.minus_state_gain <= 0.0 {
            return Err(Error::InvalidConfig("minus_state_gain must be positive".into()));
        }
        Ok(())
    }
}

/// One user's ground truth: the affine channel model and the LoS flag the
/// evaluator weights by.
#[derive(Clone, Debug)]
pub struct UserChannel {
    pub model: AffineChannelModel,
    pub los: bool,
}

/// A generated scenario. `config.noise_psd` is always resolved to `Some`.
#[derive(Clone, Debug)]
pub struct GroundTruthScenario {
    config: ScenarioConfig,
    users: Vec<UserChannel>,
}

impl GroundTruthScenario {
    pub fn from_parts(config: ScenarioConfig, users: Vec<UserChannel>) -> Result<Self> {
        config.validate()?;
        if config.noise_psd.is_none() {
            return Err(Error::InvalidConfig("scenario noise PSD must be resolved".into()));
        }
        if users.len() != config.num_users {
            return Err(Error::dimension("scenario users", config.num_users, users.len()));
        }
        Ok(Self { config, users })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn users(&self) -> &[UserChannel] {
        &self.users
    }

    pub fn user(&self, user: usize) -> Result<&UserChannel> {
        self.users
            .get(user)
            .ok_or_else(|| Error::Validation(format!("no user {user} in scenario")))
    }

    /// Resolved noise power spectral density in W/Hz.
    pub fn noise_psd(&self) -> f64 {
        self.config.noise_psd.expect("resolved at construction")
    }

    /// Channel model with the -1 state gain folded in. With the exact π
    /// flip (`minus_state_gain == 1`) this is the stored model itself;
    /// otherwise the imbalance is absorbed into an equivalent affine model.
    pub fn effective_model(&self, user: usize) -> Result<Cow<'_, AffineChannelModel>> {
        let channel = self.user(user)?;
        let gamma = self.config.minus_state_gain;
        if gamma == 1.0 {
            return Ok(Cow::Borrowed(&channel.model));
        }
        // state +1 contributes +g, state -1 contributes -γ·g:
        // coefficient(s) = (1+γ)/2 · s + (1-γ)/2.
        let common = (1.0 - gamma) / 2.0;
        let scale = (1.0 + gamma) / 2.0;
        let taps = channel.model.tap_count();
        let elements = channel.model.element_count();
        let mut direct = channel.model.direct().taps().to_vec();
        let mut rows = Vec::with_capacity(elements * taps);
        for element in 0..elements {
            for (tap, &g) in channel.model.elements().row(element).iter().enumerate() {
                direct[tap] += g * common;
                rows.push(g * scale);
            }
        }
        let model = AffineChannelModel::new(
            ChannelImpulseResponse::new(direct),
            Matrix::from_vec(elements, taps, rows)?,
        )?;
        Ok(Cow::Owned(model))
    }
}

/// Per-bin noise power (W) of the receiver noise, identical in the time and
/// frequency domains under the unitary signal transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    variance_per_bin: f64,
}

impl NoiseSpec {
    pub fn new(variance_per_bin: f64) -> Result<Self> {
        if variance_per_bin.is_nan() || variance_per_bin < 0.0 {
            return Err(Error::InvalidConfig("noise variance must be nonnegative".into()));
        }
        Ok(Self { variance_per_bin })
    }

    pub fn from_psd(noise_psd: f64, bandwidth: f64) -> Result<Self> {
        Self::new(noise_psd * bandwidth)
    }

    pub fn variance_per_bin(&self) -> f64 {
        self.variance_per_bin
    }
}

/// Pilot configuration matrix: one configuration per column, stored
/// column-major so each configuration is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotMatrix {
    elements: usize,
    configs: usize,
    data: Vec<i8>,
    structure: PilotStructure,
}

/// How the pilot columns were built. Block structure enables the fast
/// transform path in the simulator; matrices loaded from files or built by
/// callers are treated as unstructured.
#[derive(Clone, Debug, PartialEq)]
enum PilotStructure {
    /// Blocks of N columns; block `b` is the Hadamard matrix with rows
    /// rotated by `shift` and an overall sign.
    HadamardBlocks(Vec<BlockSpec>),
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct BlockSpec {
    shift: usize,
    negated: bool,
}

impl PilotMatrix {
    /// Validates that every entry is ±1.
    pub fn from_columns(elements: usize, configs: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != elements * configs {
            return Err(Error::dimension("pilot matrix storage", elements * configs, data.len()));
        }
        for (idx, &value) in data.iter().enumerate() {
            if value != 1 && value != -1 {
                return Err(Error::InvalidPilotEntry {
                    row: idx % elements,
                    col: idx / elements,
                    value,
                });
            }
        }
        Ok(Self {
            elements,
            configs,
            data,
            structure: PilotStructure::Custom,
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn configs(&self) -> usize {
        self.configs
    }

    /// Configuration used for transmission `t`.
    pub fn column(&self, t: usize) -> &[i8] {
        &self.data[t * self.elements..(t + 1) * self.elements]
    }

    pub fn entry(&self, element: usize, config: usize) -> i8 {
        self.data[config * self.elements + element]
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    /// True if the first `N` columns are exactly the natural-order Hadamard
    /// matrix (what the estimator inverts).
    pub fn leading_block_is_hadamard(&self) -> bool {
        if self.configs < self.elements {
            return false;
        }
        for t in 0..self.elements {
            let col = self.column(t);
            for (n, &value) in col.iter().enumerate() {
                if value != hadamard_entry(n, t) {
                    return false;
                }
            }
        }
        true
    }
}

/// Pilot matrix of `repetitions` blocks of `N` columns.
///
/// Block 0 is the natural-order Hadamard matrix (first column all ones);
/// block `2j+1` is the negation of block `2j`; block `2j` is the Hadamard
/// matrix with rows cyclically shifted by `j`. The ± pairing is what lets
/// the estimator separate the direct path from element 0.
pub fn build_hadamard_pilots(dims: &SystemDims, repetitions: usize) -> Result<PilotMatrix> {
    if repetitions < 1 {
        return Err(Error::InvalidConfig("pilot repetitions must be at least 1".into()));
    }
    let n = dims.elements();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut data = Vec::with_capacity(n * n * repetitions);
    let mut blocks = Vec::with_capacity(repetitions);
    for block in 0..repetitions {
        let shift = block / 2;
        let negated = block % 2 == 1;
        blocks.push(BlockSpec { shift, negated });
        for t in 0..n {
            for row in 0..n {
                let entry = hadamard_entry((row + shift) % n, t);
                data.push(if negated { -entry } else { entry });
            }
        }
    }
    Ok(PilotMatrix {
        elements: n,
        configs: n * repetitions,
        data,
        structure: PilotStructure::HadamardBlocks(blocks),
    })
}

/// Received frequency-domain blocks, `subcarriers × configs × users`,
/// stored with the subcarrier index fastest (each received block contiguous).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedBlocks {
    subcarriers: usize,
    configs: usize,
    users: usize,
    data: Vec<C64>,
}

impl ReceivedBlocks {
    pub fn from_parts(subcarriers: usize, configs: usize, users: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != subcarriers * configs * users {
            return Err(Error::dimension(
                "received blocks storage",
                subcarriers * configs * users,
                data.len(),
            ));
        }
        Ok(Self {
            subcarriers,
            configs,
            users,
            data,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn configs(&self) -> usize {
        self.configs
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// The block received by `user` during transmission `config`.
    pub fn block(&self, config: usize, user: usize) -> &[C64] {
        let start = (user * self.configs + config) * self.subcarriers;
        &self.data[start..start + self.subcarriers]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }
}

/// One pilot phase: the configurations tried, the constant pilot symbol,
/// and every user's received blocks.
#[derive(Clone, Debug)]
pub struct PilotDataset {
    pub dims: SystemDims,
    pub pilot_matrix: PilotMatrix,
    pub transmit_signal: FrequencySignal,
    pub received: ReceivedBlocks,
}

/// Generates the ground-truth scenario for `config` (deterministic in the
/// seed; channel draws are a single sequential stream).
pub fn generate_scenario(config: &ScenarioConfig) -> Result<GroundTruthScenario> {
    config.validate()?;
    let dims = config.dims;
    let mut rng = rng_for(config.seed, Stream::ScenarioChannels);

    let grid = ElementGrid::new(dims.elements());
    let bs_direction = draw_direction(&mut rng);

    let users: Vec<UserChannel> = (0..config.num_users)
        .map(|_| draw_user_channel(config, &grid, bs_direction, &mut rng))
        .collect();

    let mut resolved = config.clone();
    if resolved.noise_psd.is_none() {
        resolved.noise_psd = Some(calibrate_noise_psd(config, &users)?);
    }
    GroundTruthScenario::from_parts(resolved, users)
}

/// Simulates the pilot phase: for every pilot column and user, the received
/// block is `response(θ) ⊙ x̄` plus (unless `noiseless`) white circularly
/// symmetric Gaussian noise of per-bin variance `N0·B`.
///
/// The pilot symbol is constant across subcarriers with `|x̄[ν]|² = P`, so a
/// block transmits average power `pilot_power`.
pub fn simulate_pilot_phase(
    scenario: &GroundTruthScenario,
    pilots: &PilotMatrix,
    pilot_power: f64,
    noiseless: bool,
) -> Result<PilotDataset> {
    let dims = scenario.config().dims;
    if pilots.elements() != dims.elements() {
        return Err(Error::dimension("pilot matrix rows", dims.elements(), pilots.elements()));
    }
    if pilot_power <= 0.0 {
        return Err(Error::InvalidConfig("pilot power must be positive".into()));
    }
    let k = dims.subcarriers();
    let t_count = pilots.configs();
    let users = scenario.users().len();
    let amplitude = pilot_power.sqrt();
    let transmit = FrequencySignal::constant(C64::new(amplitude, 0.0), k);
    let noise = NoiseSpec::from_psd(scenario.noise_psd(), scenario.config().bandwidth)?;
    let basis = DelayBasis::for_dims(&dims);

    let mut data = vec![C64::new(0.0, 0.0); k * t_count * users];
    let seed = scenario.config().seed;
    data.par_chunks_mut(k * t_count)
        .enumerate()
        .try_for_each(|(user, out)| -> Result<()> {
            let model = scenario.effective_model(user)?;
            fill_user_blocks(&model, pilots, &basis, amplitude, out);
            if !noiseless {
                add_noise(out, noise, rng_for(seed, Stream::PilotNoise { user }));
            }
            Ok(())
        })?;

    Ok(PilotDataset {
        dims,
        pilot_matrix: pilots.clone(),
        transmit_signal: transmit,
        received: ReceivedBlocks::from_parts(k, t_count, users, data)?,
    })
}

fn fill_user_blocks(
    model: &AffineChannelModel,
    pilots: &PilotMatrix,
    basis: &DelayBasis,
    amplitude: f64,
    out: &mut [C64],
) {
    let k = basis.subcarriers();
    let taps = model.tap_count();
    let n = model.element_count();
    match &pilots.structure {
        PilotStructure::HadamardBlocks(blocks) => {
            // All compositions of one block at once: for each tap, the
            // response across the block's columns is a Walsh–Hadamard
            // transform of the (rotated) element gains at that tap.
            let mut transformed = vec![C64::new(0.0, 0.0); n * taps];
            for (block_idx, spec) in blocks.iter().enumerate() {
                for tap in 0..taps {
                    let column = &mut transformed[tap * n..(tap + 1) * n];
                    for (slot, value) in column.iter_mut().enumerate() {
                        let element = (slot + n - spec.shift % n) % n;
                        *value = model.elements().row(element)[tap];
                    }
                    fwht_in_place(column).expect("power-of-two element count");
                }
                let mut composed = vec![C64::new(0.0, 0.0); taps];
                for t in 0..n {
                    for tap in 0..taps {
                        let spread = transformed[tap * n + t];
                        let spread = if spec.negated { -spread } else { spread };
                        composed[tap] = model.direct().taps()[tap] + spread;
                    }
                    let bins = &mut out[(block_idx * n + t) * k..(block_idx * n + t + 1) * k];
                    write_received_column(basis, &composed, amplitude, bins);
                }
            }
        }
        PilotStructure::Custom => {
            let mut composed = vec![C64::new(0.0, 0.0); taps];
            for t in 0..pilots.configs() {
                let states = pilots.column(t);
                for (tap, value) in composed.iter_mut().enumerate() {
                    let mut acc = model.direct().taps()[tap];
                    for (element, &state) in states.iter().enumerate() {
                        let g = model.elements().row(element)[tap];
                        if state > 0 {
                            acc += g;
                        } else {
                            acc -= g;
                        }
                    }
                    *value = acc;
                }
                let bins = &mut out[t * k..(t + 1) * k];
                write_received_column(basis, &composed, amplitude, bins);
            }
        }
    }
}

fn write_received_column(basis: &DelayBasis, composed: &[C64], amplitude: f64, bins: &mut [C64]) {
    for bin in bins.iter_mut() {
        *bin = C64::new(0.0, 0.0);
    }
    basis.accumulate_response(composed, bins);
    for bin in bins.iter_mut() {
        *bin *= amplitude;
    }
}

fn add_noise(out: &mut [C64], noise: NoiseSpec, mut rng: ChaCha12Rng) {
    let sigma = (noise.variance_per_bin() / 2.0).sqrt();
    if sigma == 0.0 {
        return;
    }
    for value in out.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *value += C64::new(re * sigma, im * sigma);
    }
}

// ── channel generator internals ─────────────────────────────────────────────

struct ElementGrid {
    cols: usize,
    rows: usize,
}

impl ElementGrid {
    /// Splits the element count into the most nearly square panel
    /// (64 × 64 for 4096 elements).
    fn new(elements: usize) -> Self {
        let mut cols = (elements as f64).sqrt().floor() as usize;
        while cols > 1 && !elements.is_multiple_of(cols) {
            cols -= 1;
        }
        let cols = cols.max(1);
        Self {
            rows: elements / cols,
            cols,
        }
    }

    /// Element position on the half-wavelength grid, centered on the panel.
    fn position(&self, element: usize) -> (f64, f64) {
        let row = element / self.cols;
        let col = element % self.cols;
        (
            col as f64 - (self.cols as f64 - 1.0) / 2.0,
            row as f64 - (self.rows as f64 - 1.0) / 2.0,
        )
    }
}

/// In-plane direction cosines of an arrival/departure direction.
fn draw_direction(rng: &mut ChaCha12Rng) -> (f64, f64) {
    let azimuth = rng.gen::<f64>() * TAU;
    let polar_cos = 0.1 + 0.8 * rng.gen::<f64>();
    let polar_sin = (1.0 - polar_cos * polar_cos).sqrt();
    (polar_sin * azimuth.cos(), polar_sin * azimuth.sin())
}

struct Path {
    gain: C64,
    /// Departure direction from the surface (zero for the direct link).
    direction: (f64, f64),
    /// Delay in symbol periods.
    delay: f64,
}

fn complex_gaussian(rng: &mut ChaCha12Rng, power: f64) -> C64 {
    let sigma = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * sigma, im * sigma)
}

/// Unit-energy pulse sampled at symbol offsets.
fn sinc(x: f64) -> f64 {
    let arg = PI * x;
    if arg.abs() < 1e-8 {
        1.0 - arg * arg / 6.0
    } else {
        arg.sin() / arg
    }
}

/// Largest fractional delay, in symbols, such that the sinc tails still fit
/// inside the `M` available taps.
fn delay_window(taps: usize) -> f64 {
    (taps as f64 - 4.0).max(0.0)
}

/// Draws scattered paths with an exponential power–delay profile normalized
/// to `total_power`.
fn draw_clusters(
    rng: &mut ChaCha12Rng,
    count: usize,
    total_power: f64,
    window: f64,
    with_direction: bool,
) -> Vec<Path> {
    let delays: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * window).collect();
    let weights: Vec<f64> = delays.iter().map(|d| (-d / DELAY_SPREAD_SYMBOLS).exp()).collect();
    let weight_sum: f64 = weights.iter().sum();
    delays
        .into_iter()
        .zip(weights)
        .map(|(delay, weight)| {
            let direction = if with_direction {
                draw_direction(rng)
            } else {
                (0.0, 0.0)
            };
            let gain = complex_gaussian(rng, total_power * weight / weight_sum);
            Path {
                gain,
                direction,
                delay,
            }
        })
        .collect()
}

fn paths_to_taps(paths: &[Path], taps: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); taps];
    for path in paths {
        for (tap, value) in out.iter_mut().enumerate() {
            *value += path.gain * sinc(tap as f64 - path.delay);
        }
    }
    out
}

fn draw_user_channel(
    config: &ScenarioConfig,
    grid: &ElementGrid,
    bs_direction: (f64, f64),
    rng: &mut ChaCha12Rng,
) -> UserChannel {
    let dims = config.dims;
    let taps = dims.taps();
    let n = dims.elements();
    let window = delay_window(taps);

    let los = rng.gen::<f64>() < config.los_probability;

    // Direct base-station→user link: obstructed, scattered paths only.
    let direct_power = DIRECT_GAIN_FRACTION * n as f64 * ELEMENT_GAIN;
    let direct_paths = draw_clusters(rng, config.cluster_count, direct_power, window, false);
    let direct = ChannelImpulseResponse::new(paths_to_taps(&direct_paths, taps));

    // Surface→user link: optional LoS path plus scattered clusters.
    let mut surface_paths = Vec::with_capacity(config.cluster_count + 1);
    if los {
        let direction = draw_direction(rng);
        let delay = rng.gen::<f64>() * window / 8.0;
        let phase = rng.gen::<f64>() * TAU;
        let power = ELEMENT_GAIN * RICIAN_K / (RICIAN_K + 1.0);
        surface_paths.push(Path {
            gain: C64::from_polar(power.sqrt(), phase),
            direction,
            delay,
        });
    }
    let scattered_power = if los {
        ELEMENT_GAIN / (RICIAN_K + 1.0)
    } else {
        ELEMENT_GAIN
    };
    surface_paths.extend(draw_clusters(rng, config.cluster_count, scattered_power, window, true));

    // Per path, the pulse taps; per element, one plane-wave phase that
    // combines the (fixed) base-station→surface arrival and the departure.
    let path_taps: Vec<Vec<C64>> = surface_paths
        .iter()
        .map(|p| {
            (0..taps)
                .map(|tap| C64::new(sinc(tap as f64 - p.delay), 0.0))
                .collect()
        })
        .collect();

    let mut rows = vec![C64::new(0.0, 0.0); n * taps];
    for element in 0..n {
        let (x, y) = grid.position(element);
        let row = &mut rows[element * taps..(element + 1) * taps];
        for (path, pulse) in surface_paths.iter().zip(&path_taps) {
            let phase = PI
                * (x * (bs_direction.0 + path.direction.0)
                    + y * (bs_direction.1 + path.direction.1));
            let coeff = path.gain * C64::from_polar(1.0, phase);
            for (value, &s) in row.iter_mut().zip(pulse) {
                *value += coeff * s;
            }
        }
    }

    let model = AffineChannelModel::new(direct, Matrix::from_vec(n, taps, rows).expect("sized above"))
        .expect("tap counts match");
    UserChannel { model, los }
}

/// Noise PSD making the median per-subcarrier SNR across users and bins
/// equal to one under a random configuration at the reference power.
fn calibrate_noise_psd(config: &ScenarioConfig, users: &[UserChannel]) -> Result<f64> {
    let dims = config.dims;
    let mut rng = rng_for(config.seed, Stream::Calibration);
    let theta = IrsConfiguration::random(dims.elements(), &mut rng);
    let mut gains = Vec::with_capacity(users.len() * dims.subcarriers());
    for user in users {
        let composed = compose_channel(&user.model, &theta)?;
        let response = crate::transform::dft_channel(&composed, &dims)?;
        gains.extend(response.bins().iter().map(|b| b.norm_sqr()));
    }
    gains.sort_by(f64::total_cmp);
    let median = gains[gains.len() / 2];
    if median <= 0.0 {
        return Err(Error::InvalidConfig(
            "cannot calibrate noise level on an all-zero channel".into(),
        ));
    }
    Ok(CALIBRATION_POWER * median / config.bandwidth)
}

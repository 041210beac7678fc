//! Selection of surface configurations maximizing the achievable rate
//! predicted from a channel estimate.
//!
//! Three search strategies share one result type: an exact narrowband
//! optimizer (provably optimal for a single complex gain per element), a
//! wideband heuristic that seeds greedy bit-flip refinement with the
//! narrowband solution at the dominant delay, and an exhaustive oracle for
//! small element counts used to validate the heuristics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::ChannelEstimate;
use crate::rate::achievable_rate;
use crate::{IrsConfiguration, Matrix, C64};

/// Element-count ceiling for [`exhaustive_oracle`].
pub const EXHAUSTIVE_MAX_ELEMENTS: usize = 20;

/// Submission contract: element count and user count of the full-size task.
pub const SUBMISSION_ELEMENTS: usize = 4096;
pub const SUBMISSION_USERS: usize = 50;

/// Objective parameters: `snr_scale = P/(B·N0)` multiplies the squared
/// channel gain into a per-subcarrier SNR, `bandwidth` sets the rate
/// prefactor.
#[derive(Clone, Copy, Debug)]
pub struct OptimizationSettings {
    pub snr_scale: f64,
    pub bandwidth: f64,
    /// 1 = exact sign-change enumeration in the narrowband search; larger
    /// values scan that many uniformly spaced common phases instead.
    pub phase_grid_size: usize,
    /// Upper bound on greedy refinement sweeps (one flip per sweep).
    pub max_flip_passes: usize,
    /// Relative rate improvement below which refinement stops.
    pub improvement_tolerance: f64,
}

impl OptimizationSettings {
    /// Settings from physical parameters: power (W), bandwidth (Hz),
    /// noise PSD (W/Hz).
    pub fn new(power: f64, bandwidth: f64, noise_psd: f64) -> Result<Self> {
        if power <= 0.0 || bandwidth <= 0.0 || noise_psd <= 0.0 {
            return Err(Error::InvalidConfig(
                "power, bandwidth and noise PSD must be positive".into(),
            ));
        }
        Ok(Self {
            snr_scale: power / (bandwidth * noise_psd),
            bandwidth,
            phase_grid_size: 1,
            max_flip_passes: 20,
            improvement_tolerance: 1e-6,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_scale <= 0.0 || self.bandwidth <= 0.0 {
            return Err(Error::InvalidConfig("snr_scale and bandwidth must be positive".into()));
        }
        if self.phase_grid_size < 1 {
            return Err(Error::InvalidConfig("phase_grid_size must be at least 1".into()));
        }
        if self.improvement_tolerance < 0.0 {
            return Err(Error::InvalidConfig("improvement_tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A chosen configuration and the rate the estimate predicts for it.
#[derive(Clone, Debug)]
pub struct ConfigurationResult {
    pub theta: IrsConfiguration,
    pub predicted_rate: f64,
    pub method: String,
    pub flips_performed: usize,
}

/// Channel response the estimate predicts for `theta`.
///
/// Fails if the direct path is still aliased with element 0 and `theta`
/// puts that element in state -1: the estimate cannot predict that flip.
pub fn estimated_response(estimate: &ChannelEstimate, theta: &IrsConfiguration) -> Result<Vec<C64>> {
    let n = estimate.element_count();
    if theta.len() != n {
        return Err(Error::dimension("configuration length", n, theta.len()));
    }
    if !estimate.aliasing_resolved && theta.states().first() == Some(&-1) {
        return Err(Error::AliasedElementFlip);
    }
    let mut bins = estimate.direct_freq.bins().to_vec();
    for (element, &state) in theta.states().iter().enumerate() {
        let row = estimate.element_freq.row(element);
        if state > 0 {
            for (bin, &g) in bins.iter_mut().zip(row) {
                *bin += g;
            }
        } else {
            for (bin, &g) in bins.iter_mut().zip(row) {
                *bin -= g;
            }
        }
    }
    Ok(bins)
}

/// Rate (bits/s) the estimate predicts for `theta`.
pub fn objective_rate(
    estimate: &ChannelEstimate,
    theta: &IrsConfiguration,
    settings: &OptimizationSettings,
) -> Result<f64> {
    settings.validate()?;
    let bins = estimated_response(estimate, theta)?;
    Ok(achievable_rate(
        &bins,
        settings.snr_scale,
        settings.bandwidth,
        estimate.dims.block_len(),
    ))
}

fn sign_plus(value: f64) -> i8 {
    if value < 0.0 {
        -1
    } else {
        1
    }
}

/// Sign pattern aligned to common phase `phi`, with `sign(0) → +1`.
fn pattern_at(gains: &[C64], phi: f64) -> Vec<i8> {
    let rotation = C64::from_polar(1.0, -phi);
    gains.iter().map(|g| sign_plus((g * rotation).re)).collect()
}

/// `|d + Σ θ_n g_n|`, summed in element order.
fn aligned_amplitude(gains: &[C64], direct: C64, states: &[i8]) -> f64 {
    let mut acc = direct;
    for (&g, &s) in gains.iter().zip(states) {
        if s > 0 {
            acc += g;
        } else {
            acc -= g;
        }
    }
    acc.norm()
}

/// Exact maximizer of `|d + Σ_n θ_n g_n|` over `θ ∈ {-1,+1}^N`.
///
/// The optimum aligns every element with some common phase φ*:
/// `θ_n = sign(Re(g_n e^{-jφ*}))`. As φ sweeps one turn, the sign pattern
/// only changes at the 2N angles where some `Re(g_n e^{-jφ})` crosses zero
/// (plus the phase of `d` and its opposite, which lie strictly inside
/// intervals), so walking those sign-change angles visits every candidate
/// pattern. Each pattern is scored by a fresh summation; the best is
/// returned. With `phase_grid_size > 1` a uniform phase grid of that size
/// is scanned instead.
pub fn optimize_narrowband_exact(
    gains: &[C64],
    direct: C64,
    settings: &OptimizationSettings,
) -> (IrsConfiguration, f64) {
    let n = gains.len();
    if settings.phase_grid_size > 1 {
        let mut best: Option<(Vec<i8>, f64)> = None;
        for j in 0..settings.phase_grid_size {
            let phi = std::f64::consts::TAU * j as f64 / settings.phase_grid_size as f64;
            let states = pattern_at(gains, phi);
            let value = aligned_amplitude(gains, direct, &states);
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((states, value));
            }
        }
        let (states, value) = best.expect("grid size >= 1");
        return (IrsConfiguration::new(states).expect("signs only"), value);
    }

    let mut breakpoints: Vec<(f64, usize)> = Vec::with_capacity(2 * n + 2);
    for (element, g) in gains.iter().enumerate() {
        if g.norm_sqr() > 0.0 {
            let base = g.arg();
            breakpoints.push((normalize_angle(base + std::f64::consts::FRAC_PI_2), element));
            breakpoints.push((normalize_angle(base - std::f64::consts::FRAC_PI_2), element));
        }
    }
    if breakpoints.is_empty() {
        // No controllable signal; every pattern is equivalent.
        return (IrsConfiguration::all_plus(n), direct.norm());
    }
    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Start on the interval wrapping around from the last angle to the
    // first, then flip one element per sign-change angle.
    let last = breakpoints.last().expect("nonempty").0;
    let first = breakpoints[0].0;
    let start_phi = normalize_angle((last + first + std::f64::consts::TAU) / 2.0);
    let mut states = pattern_at(gains, start_phi);

    let mut best_states = states.clone();
    let mut best_value = aligned_amplitude(gains, direct, &states);
    let mut idx = 0;
    while idx < breakpoints.len() {
        let angle = breakpoints[idx].0;
        while idx < breakpoints.len() && breakpoints[idx].0 == angle {
            let element = breakpoints[idx].1;
            states[element] = -states[element];
            idx += 1;
        }
        let value = aligned_amplitude(gains, direct, &states);
        if value > best_value {
            best_value = value;
            best_states.copy_from_slice(&states);
        }
    }

    // The phase of d and its opposite fall inside intervals already
    // visited; evaluating them explicitly costs nothing and guards the
    // degenerate all-collinear case.
    if direct.norm_sqr() > 0.0 {
        for phi in [direct.arg(), direct.arg() + std::f64::consts::PI] {
            let candidate = pattern_at(gains, normalize_angle(phi));
            let value = aligned_amplitude(gains, direct, &candidate);
            if value > best_value {
                best_value = value;
                best_states = candidate;
            }
        }
    }

    (IrsConfiguration::new(best_states).expect("signs only"), best_value)
}

fn normalize_angle(phi: f64) -> f64 {
    let mut out = phi % std::f64::consts::TAU;
    if out < 0.0 {
        out += std::f64::consts::TAU;
    }
    out
}

/// Wideband configuration search on a projected estimate.
///
/// Initialization solves the narrowband problem exactly at the delay tap
/// carrying the most energy; refinement greedily flips the single element
/// giving the largest rate increase (each candidate scored by an O(K)
/// response update) until no flip clears the improvement tolerance or the
/// sweep budget is spent. Returns the best of the initialization, the
/// refined configuration, and the all-ones baseline.
pub fn optimize_wideband(
    estimate: &ChannelEstimate,
    settings: &OptimizationSettings,
) -> Result<ConfigurationResult> {
    settings.validate()?;
    if !estimate.projected() {
        return Err(Error::Validation(
            "wideband optimization requires a delay-projected estimate".into(),
        ));
    }
    let n = estimate.element_count();
    let taps = estimate.dims.taps();
    let block_len = estimate.dims.block_len();

    // Dominant delay tap by total energy.
    let mut tap_energy = vec![0.0f64; taps];
    for element in 0..n {
        for (tap, g) in estimate.element_taps.row(element).iter().enumerate() {
            tap_energy[tap] += g.norm_sqr();
        }
    }
    for (tap, d) in estimate.direct_taps.taps().iter().enumerate() {
        tap_energy[tap] += d.norm_sqr();
    }
    let dominant_tap = tap_energy
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(tap, _)| tap)
        .unwrap_or(0);

    // Exact narrowband alignment at the dominant tap. While the direct
    // path is aliased, element 0's (confounded) gain joins the constant
    // term and its state stays +1.
    let theta_init = if estimate.aliasing_resolved {
        let gains: Vec<C64> = (0..n)
            .map(|e| estimate.element_taps.row(e)[dominant_tap])
            .collect();
        let (theta, _) =
            optimize_narrowband_exact(&gains, estimate.direct_taps.taps()[dominant_tap], settings);
        theta
    } else {
        let gains: Vec<C64> = (1..n)
            .map(|e| estimate.element_taps.row(e)[dominant_tap])
            .collect();
        let fixed = estimate.direct_taps.taps()[dominant_tap]
            + estimate.element_taps.row(0)[dominant_tap];
        let (tail, _) = optimize_narrowband_exact(&gains, fixed, settings);
        let mut states = Vec::with_capacity(n);
        states.push(1);
        states.extend_from_slice(tail.states());
        IrsConfiguration::new(states).expect("signs only")
    };

    let mut response = estimated_response(estimate, &theta_init)?;
    let init_rate = achievable_rate(&response, settings.snr_scale, settings.bandwidth, block_len);

    // Greedy best-flip refinement.
    let mut theta = theta_init.clone();
    let mut current_rate = init_rate;
    let mut flips = 0;
    let first_flippable = if estimate.aliasing_resolved { 0 } else { 1 };
    for _ in 0..settings.max_flip_passes {
        let best = (first_flippable..n)
            .into_par_iter()
            .map(|element| {
                let row = estimate.element_freq.row(element);
                let state = f64::from(theta.states()[element]);
                let rate: f64 = response
                    .iter()
                    .zip(row)
                    .map(|(&h, &g)| {
                        let flipped = h - g * (2.0 * state);
                        (settings.snr_scale * flipped.norm_sqr()).ln_1p()
                    })
                    .sum();
                let rate = settings.bandwidth / block_len as f64 * rate / std::f64::consts::LN_2;
                (rate, element)
            })
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            );

        let (flip_rate, element) = best;
        if element == usize::MAX || flip_rate <= current_rate + current_rate.abs() * settings.improvement_tolerance
        {
            break;
        }
        debug_assert!(flip_rate > current_rate);
        let state = f64::from(theta.states()[element]);
        for (h, &g) in response.iter_mut().zip(estimate.element_freq.row(element)) {
            *h -= g * (2.0 * state);
        }
        theta.flip(element);
        current_rate = flip_rate;
        flips += 1;
    }

    // Scored from scratch; also validates the incremental updates.
    let refined_rate = objective_rate(estimate, &theta, settings)?;
    let all_ones = IrsConfiguration::all_plus(n);
    let all_ones_rate = objective_rate(estimate, &all_ones, settings)?;

    let mut result = ConfigurationResult {
        theta,
        predicted_rate: refined_rate,
        method: "wideband-greedy".into(),
        flips_performed: flips,
    };
    if init_rate > result.predicted_rate {
        result = ConfigurationResult {
            theta: theta_init,
            predicted_rate: init_rate,
            method: "narrowband-init".into(),
            flips_performed: 0,
        };
    }
    if all_ones_rate > result.predicted_rate {
        result = ConfigurationResult {
            theta: all_ones,
            predicted_rate: all_ones_rate,
            method: "all-ones".into(),
            flips_performed: 0,
        };
    }
    Ok(result)
}

/// True argmax of the predicted rate over every configuration, for small
/// element counts. Ties resolve to the lexicographically smallest
/// configuration, with +1 ordered before -1.
pub fn exhaustive_oracle(
    estimate: &ChannelEstimate,
    settings: &OptimizationSettings,
) -> Result<ConfigurationResult> {
    settings.validate()?;
    let n = estimate.element_count();
    if n > EXHAUSTIVE_MAX_ELEMENTS {
        return Err(Error::SearchSpaceTooLarge {
            elements: n,
            max: EXHAUSTIVE_MAX_ELEMENTS,
        });
    }
    let block_len = estimate.dims.block_len();
    // While the direct path is aliased, element 0 stays +1 and the search
    // covers the remaining elements.
    let free = if estimate.aliasing_resolved { n } else { n - 1 };
    let offset = n - free;

    let mut theta = IrsConfiguration::all_plus(n);
    let mut response = estimated_response(estimate, &theta)?;
    let rate_of = |resp: &[C64]| {
        achievable_rate(resp, settings.snr_scale, settings.bandwidth, block_len)
    };

    let canonical = |theta: &IrsConfiguration| -> Result<f64> {
        Ok(rate_of(&estimated_response(estimate, theta)?))
    };

    let mut best_theta = theta.clone();
    let mut best_rate = canonical(&theta)?;
    let mut running = rate_of(&response);

    // Gray-code walk: one element flips per step, so the response update is
    // O(K). Candidates within numerical reach of the best are re-scored
    // from scratch so ties resolve deterministically.
    let total: u64 = 1u64 << free;
    for step in 1..total {
        let bit = step.trailing_zeros() as usize;
        let element = offset + bit;
        let state = f64::from(theta.states()[element]);
        for (h, &g) in response.iter_mut().zip(estimate.element_freq.row(element)) {
            *h -= g * (2.0 * state);
        }
        theta.flip(element);
        running = rate_of(&response);

        if running >= best_rate - best_rate.abs() * 1e-9 {
            let exact = canonical(&theta)?;
            let better = exact > best_rate
                || (exact == best_rate && lex_less(&theta, &best_theta));
            if better {
                best_rate = exact;
                best_theta = theta.clone();
            }
        }
    }
    let _ = running;

    Ok(ConfigurationResult {
        theta: best_theta,
        predicted_rate: best_rate,
        method: "exhaustive".into(),
        flips_performed: 0,
    })
}

/// Lexicographic order over configurations with +1 < -1.
fn lex_less(a: &IrsConfiguration, b: &IrsConfiguration) -> bool {
    for (&x, &y) in a.states().iter().zip(b.states()) {
        if x != y {
            return x > y; // +1 sorts before -1
        }
    }
    false
}

/// Assembles per-user configurations into an elements × users sign matrix.
pub fn submission_matrix(results: &[ConfigurationResult]) -> Result<Matrix<i8>> {
    if results.is_empty() {
        return Err(Error::Validation("no configurations to export".into()));
    }
    let n = results[0].theta.len();
    for (user, result) in results.iter().enumerate() {
        if result.theta.len() != n {
            return Err(Error::Validation(format!(
                "configuration for user {user} has {} elements, expected {n}",
                result.theta.len()
            )));
        }
    }
    let mut matrix = Matrix::from_elem(n, results.len(), 0i8);
    for (user, result) in results.iter().enumerate() {
        for (element, &state) in result.theta.states().iter().enumerate() {
            matrix.set(element, user, state);
        }
    }
    for element in 0..n {
        for user in 0..results.len() {
            let value = *matrix.get(element, user);
            if value != 1 && value != -1 {
                return Err(Error::Validation(format!(
                    "submission entry (row {element}, col {user}) is {value}, expected +1 or -1"
                )));
            }
        }
    }
    Ok(matrix)
}

/// Full-size submission export: exactly 50 configurations of 4096 elements.
pub fn export_submission(results: &[ConfigurationResult]) -> Result<Matrix<i8>> {
    if results.len() != SUBMISSION_USERS {
        return Err(Error::Validation(format!(
            "submission needs exactly {SUBMISSION_USERS} configurations, got {}",
            results.len()
        )));
    }
    for (user, result) in results.iter().enumerate() {
        if result.theta.len() != SUBMISSION_ELEMENTS {
            return Err(Error::Validation(format!(
                "configuration for user {user} has {} elements, expected {SUBMISSION_ELEMENTS}",
                result.theta.len()
            )));
        }
    }
    submission_matrix(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::ChannelEstimate;
    use crate::types::SystemDims;
    use crate::{ChannelFrequencyResponse, ChannelImpulseResponse, DelayBasis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn settings() -> OptimizationSettings {
        OptimizationSettings {
            snr_scale: 1.0,
            bandwidth: 1e7,
            phase_grid_size: 1,
            max_flip_passes: 20,
            improvement_tolerance: 1e-6,
        }
    }

    fn random_complex(rng: &mut ChaCha12Rng) -> C64 {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }

    /// Estimate wrapping explicit per-element taps (already projected).
    fn estimate_from_taps(
        dims: SystemDims,
        direct: Vec<C64>,
        element_taps: Matrix<C64>,
        resolved: bool,
    ) -> ChannelEstimate {
        let basis = DelayBasis::for_dims(&dims);
        let n = element_taps.rows();
        let k = dims.subcarriers();
        let mut element_freq = Matrix::from_elem(n, k, C64::new(0.0, 0.0));
        for e in 0..n {
            let bins = basis.response(element_taps.row(e));
            element_freq.row_mut(e).copy_from_slice(&bins);
        }
        let direct_freq = basis.response(&direct);
        ChannelEstimate {
            dims,
            direct_freq: ChannelFrequencyResponse::new(direct_freq),
            element_freq,
            direct_taps: ChannelImpulseResponse::new(direct),
            element_taps,
            aliasing_resolved: resolved,
            noise_variance_estimate: 0.0,
            pilot_power: 1.0,
        }
    }

    fn random_estimate(rng: &mut ChaCha12Rng, dims: SystemDims, resolved: bool) -> ChannelEstimate {
        let n = dims.elements();
        let m = dims.taps();
        let taps: Vec<C64> = (0..n * m).map(|_| random_complex(rng)).collect();
        let direct: Vec<C64> = (0..m).map(|_| random_complex(rng)).collect();
        estimate_from_taps(dims, direct, Matrix::from_vec(n, m, taps).unwrap(), resolved)
    }

    /// Noiseless estimate equal to a ground-truth model.
    fn exact_estimate(dims: SystemDims, model: &crate::AffineChannelModel) -> ChannelEstimate {
        estimate_from_taps(
            dims,
            model.direct().taps().to_vec(),
            model.elements().clone(),
            true,
        )
    }

    /// Brute force over all sign patterns, scored exactly like the
    /// narrowband objective.
    fn brute_force_alignment(gains: &[C64], direct: C64) -> f64 {
        let n = gains.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << n) {
            let states: Vec<i8> = (0..n)
                .map(|e| if mask >> e & 1 == 0 { 1 } else { -1 })
                .collect();
            let value = aligned_amplitude(gains, direct, &states);
            if value > best {
                best = value;
            }
        }
        best
    }

    #[test]
    fn narrowband_aligns_equal_gains() {
        let gains = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let (theta, value) = optimize_narrowband_exact(&gains, C64::new(0.0, 0.0), &settings());
        assert_eq!(theta.states(), &[1, 1]);
        assert!((value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn narrowband_flips_opposed_gain() {
        let gains = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        let (theta, value) = optimize_narrowband_exact(&gains, C64::new(0.0, 0.0), &settings());
        assert!((value - 2.0).abs() < 1e-12);
        assert!(theta.states() == [1, -1] || theta.states() == [-1, 1]);
    }

    #[test]
    fn narrowband_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for seed in 0..100 {
            let gains: Vec<C64> = (0..10).map(|_| random_complex(&mut rng)).collect();
            let direct = random_complex(&mut rng);
            let (_, value) = optimize_narrowband_exact(&gains, direct, &settings());
            let best = brute_force_alignment(&gains, direct);
            assert_eq!(value, best, "seed {seed}");
        }
    }

    #[test]
    fn narrowband_zero_gains_returns_direct() {
        let gains = vec![C64::new(0.0, 0.0); 4];
        let d = C64::new(0.3, -0.4);
        let (theta, value) = optimize_narrowband_exact(&gains, d, &settings());
        assert_eq!(theta.states(), &[1, 1, 1, 1]);
        assert!((value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn narrowband_scale_equivariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        for _ in 0..50 {
            let gains: Vec<C64> = (0..8).map(|_| random_complex(&mut rng)).collect();
            let direct = random_complex(&mut rng);
            let scalar = C64::from_polar(0.1 + rng.gen::<f64>() * 3.0, rng.gen::<f64>() * std::f64::consts::TAU);

            let (theta_a, value_a) = optimize_narrowband_exact(&gains, direct, &settings());
            let scaled: Vec<C64> = gains.iter().map(|g| g * scalar).collect();
            let (theta_b, value_b) =
                optimize_narrowband_exact(&scaled, direct * scalar, &settings());

            assert_eq!(theta_a.states(), theta_b.states());
            let ratio = value_b / value_a;
            assert!((ratio - scalar.norm()).abs() / scalar.norm() <= 1e-12);
        }
    }

    #[test]
    fn narrowband_array_gain_scales_like_binary_alignment() {
        // For i.i.d. complex Gaussian gains the optimized power over the
        // mean random-configuration power concentrates near N/π.
        let n = 256;
        let mut rng = ChaCha12Rng::seed_from_u64(102);
        let mut ratio_sum = 0.0;
        let trials = 50;
        for _ in 0..trials {
            let gains: Vec<C64> = (0..n)
                .map(|_| {
                    C64::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    ) * (0.5f64).sqrt()
                })
                .collect();
            let (_, value) = optimize_narrowband_exact(&gains, C64::new(0.0, 0.0), &settings());
            // Mean power over uniform random signs is exactly Σ|g|².
            let mean_random: f64 = gains.iter().map(|g| g.norm_sqr()).sum();
            ratio_sum += value * value / mean_random;
        }
        let mean_ratio = ratio_sum / trials as f64;
        let expected = n as f64 / std::f64::consts::PI;
        assert!(
            (mean_ratio - expected).abs() / expected <= 0.25,
            "mean ratio {mean_ratio} vs {expected}"
        );
    }

    #[test]
    fn phase_grid_mode_stays_close_to_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(103);
        let gains: Vec<C64> = (0..32).map(|_| random_complex(&mut rng)).collect();
        let (_, exact) = optimize_narrowband_exact(&gains, C64::new(0.0, 0.0), &settings());
        let mut grid_settings = settings();
        grid_settings.phase_grid_size = 720;
        let (_, grid) = optimize_narrowband_exact(&gains, C64::new(0.0, 0.0), &grid_settings);
        assert!(grid <= exact + 1e-12);
        assert!(grid >= exact * 0.999);
    }

    #[test]
    fn objective_matches_literal_formula() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(104);
        let estimate = random_estimate(&mut rng, dims, true);
        let theta = IrsConfiguration::random(8, &mut rng);
        let s = settings();
        let rate = objective_rate(&estimate, &theta, &s).unwrap();

        // Term-by-term transcription of the rate formula.
        let mut expected = 0.0;
        for bin in 0..16 {
            let mut h = estimate.direct_freq.bins()[bin];
            for (element, &state) in theta.states().iter().enumerate() {
                h += estimate.element_freq.row(element)[bin] * f64::from(state);
            }
            expected += (1.0 + s.snr_scale * h.norm_sqr()).log2();
        }
        expected *= s.bandwidth / (16.0 + 4.0 - 1.0);
        assert!((rate - expected).abs() / expected <= 1e-12);
    }

    #[test]
    fn objective_zero_channel_is_zero() {
        let dims = SystemDims::new(16, 4, 4).unwrap();
        let estimate = estimate_from_taps(
            dims,
            vec![C64::new(0.0, 0.0); 4],
            Matrix::from_elem(4, 4, C64::new(0.0, 0.0)),
            true,
        );
        let theta = IrsConfiguration::all_plus(4);
        assert_eq!(objective_rate(&estimate, &theta, &settings()).unwrap(), 0.0);
    }

    #[test]
    fn objective_rejects_aliased_flip() {
        let dims = SystemDims::new(16, 4, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(105);
        let estimate = random_estimate(&mut rng, dims, false);
        let mut theta = IrsConfiguration::all_plus(4);
        theta.flip(0);
        assert!(matches!(
            objective_rate(&estimate, &theta, &settings()),
            Err(Error::AliasedElementFlip)
        ));
    }

    #[test]
    fn single_tap_estimate_degenerates_to_narrowband() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(106);
        // All channel energy on tap 2.
        let mut taps = Matrix::from_elem(8, 4, C64::new(0.0, 0.0));
        for e in 0..8 {
            taps.row_mut(e)[2] = random_complex(&mut rng);
        }
        let mut direct = vec![C64::new(0.0, 0.0); 4];
        direct[2] = random_complex(&mut rng);
        let gains: Vec<C64> = (0..8).map(|e| taps.row(e)[2]).collect();
        let estimate = estimate_from_taps(dims, direct.clone(), taps, true);

        let s = settings();
        let result = optimize_wideband(&estimate, &s).unwrap();
        let (nb_theta, _) = optimize_narrowband_exact(&gains, direct[2], &s);
        let nb_rate = objective_rate(&estimate, &nb_theta, &s).unwrap();
        assert!(
            (result.predicted_rate - nb_rate).abs() / nb_rate <= 1e-9,
            "wideband {} vs narrowband {}",
            result.predicted_rate,
            nb_rate
        );
    }

    #[test]
    fn wideband_dominates_random_configurations() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(107);
        for seed in 0..1000 {
            let config = crate::simulator::ScenarioConfig::new(dims, 1, seed);
            let scenario = crate::simulator::generate_scenario(&config).unwrap();
            let estimate = exact_estimate(dims, &scenario.users()[0].model);
            let s = OptimizationSettings {
                snr_scale: 1.0 / (config.bandwidth * scenario.noise_psd()),
                ..settings()
            };
            let result = optimize_wideband(&estimate, &s).unwrap();
            let random_theta = IrsConfiguration::random(8, &mut rng);
            let random_rate = objective_rate(&estimate, &random_theta, &s).unwrap();
            assert!(result.predicted_rate >= random_rate, "seed {seed}");
        }
    }

    #[test]
    fn refinement_never_loses_to_its_own_initialization() {
        // Decaying multi-tap profile: instances where the greedy actually
        // flips. The refined rate must dominate both the narrowband seed
        // and the all-ones baseline.
        let dims = SystemDims::new(16, 4, 10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(113);
        let s = settings();
        let mut total_flips = 0;
        for _ in 0..200 {
            let n = 10;
            let m = 4;
            let profile = [1.0, 0.6, 0.35, 0.2];
            let taps: Vec<C64> = (0..n * m)
                .map(|i| random_complex(&mut rng) * profile[i % m])
                .collect();
            let direct: Vec<C64> = (0..m)
                .map(|l| random_complex(&mut rng) * profile[l])
                .collect();
            let estimate =
                estimate_from_taps(dims, direct, Matrix::from_vec(n, m, taps).unwrap(), true);

            let result = optimize_wideband(&estimate, &s).unwrap();
            total_flips += result.flips_performed;

            // Recompute the narrowband seed externally.
            let mut tap_energy = vec![0.0f64; m];
            for e in 0..n {
                for (tap, g) in estimate.element_taps.row(e).iter().enumerate() {
                    tap_energy[tap] += g.norm_sqr();
                }
            }
            for (tap, d) in estimate.direct_taps.taps().iter().enumerate() {
                tap_energy[tap] += d.norm_sqr();
            }
            let dominant = tap_energy
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            let gains: Vec<C64> = (0..n).map(|e| estimate.element_taps.row(e)[dominant]).collect();
            let (seed_theta, _) =
                optimize_narrowband_exact(&gains, estimate.direct_taps.taps()[dominant], &s);
            let seed_rate = objective_rate(&estimate, &seed_theta, &s).unwrap();
            let ones_rate =
                objective_rate(&estimate, &IrsConfiguration::all_plus(n), &s).unwrap();

            assert!(result.predicted_rate >= seed_rate * (1.0 - 1e-12));
            assert!(result.predicted_rate >= ones_rate * (1.0 - 1e-12));
        }
        assert!(total_flips > 0, "instances never exercised the refinement");
    }

    #[test]
    fn wideband_keeps_element_zero_fixed_while_aliased() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(108);
        let s = settings();
        for _ in 0..20 {
            let estimate = random_estimate(&mut rng, dims, false);
            let result = optimize_wideband(&estimate, &s).unwrap();
            assert_eq!(result.theta.states()[0], 1);
        }
    }

    #[test]
    fn flip_update_matches_scratch_recompute() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(109);
        let estimate = random_estimate(&mut rng, dims, true);
        let s = settings();
        let mut theta = IrsConfiguration::random(8, &mut rng);
        let mut response = estimated_response(&estimate, &theta).unwrap();

        for element in [3usize, 5, 3, 0] {
            let state = f64::from(theta.states()[element]);
            for (h, &g) in response.iter_mut().zip(estimate.element_freq.row(element)) {
                *h -= g * (2.0 * state);
            }
            theta.flip(element);
            let scratch = estimated_response(&estimate, &theta).unwrap();
            let incremental = achievable_rate(&response, s.snr_scale, s.bandwidth, 19);
            let recomputed = achievable_rate(&scratch, s.snr_scale, s.bandwidth, 19);
            assert!((incremental - recomputed).abs() / recomputed <= 1e-9);
        }
    }

    #[test]
    fn oracle_single_element_cases() {
        let dims = SystemDims::new(4, 2, 1).unwrap();
        let s = settings();

        // Constructive: keep +1.
        let estimate = estimate_from_taps(
            dims,
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Matrix::from_vec(1, 2, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap(),
            true,
        );
        let result = exhaustive_oracle(&estimate, &s).unwrap();
        assert_eq!(result.theta.states(), &[1]);

        // Destructive gain: flip to -1.
        let estimate = estimate_from_taps(
            dims,
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Matrix::from_vec(1, 2, vec![C64::new(-1.0, 0.0), C64::new(0.0, 0.0)]).unwrap(),
            true,
        );
        let result = exhaustive_oracle(&estimate, &s).unwrap();
        assert_eq!(result.theta.states(), &[-1]);
    }

    #[test]
    fn oracle_matches_independent_brute_force() {
        let dims = SystemDims::new(16, 4, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(110);
        let estimate = random_estimate(&mut rng, dims, true);
        let s = settings();
        let result = exhaustive_oracle(&estimate, &s).unwrap();

        // Second implementation: lexicographic enumeration, scratch scoring.
        let mut best_rate = f64::NEG_INFINITY;
        let mut best_states = vec![1i8; 8];
        for mask in 0..(1u32 << 8) {
            let states: Vec<i8> = (0..8)
                .map(|e| if mask >> (7 - e) & 1 == 0 { 1 } else { -1 })
                .collect();
            let theta = IrsConfiguration::new(states.clone()).unwrap();
            let rate = objective_rate(&estimate, &theta, &s).unwrap();
            if rate > best_rate {
                best_rate = rate;
                best_states = states;
            }
        }
        assert_eq!(result.theta.states(), &best_states[..]);
        assert_eq!(result.predicted_rate, best_rate);
    }

    #[test]
    fn oracle_breaks_ties_lexicographically() {
        // Zero direct path: θ and -θ predict identical rates, so the
        // lexicographically smaller one (leading +1) must win.
        let dims = SystemDims::new(8, 2, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(111);
        let taps: Vec<C64> = (0..8).map(|_| random_complex(&mut rng)).collect();
        let estimate = estimate_from_taps(
            dims,
            vec![C64::new(0.0, 0.0); 2],
            Matrix::from_vec(4, 2, taps).unwrap(),
            true,
        );
        let result = exhaustive_oracle(&estimate, &settings()).unwrap();
        assert_eq!(result.theta.states()[0], 1);
    }

    #[test]
    fn oracle_refuses_large_spaces() {
        let dims = SystemDims::new(64, 4, 32).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(112);
        let estimate = random_estimate(&mut rng, dims, true);
        assert!(matches!(
            exhaustive_oracle(&estimate, &settings()),
            Err(Error::SearchSpaceTooLarge { elements: 32, max: 20 })
        ));
    }

    #[test]
    fn submission_requires_full_size_shape() {
        let results: Vec<ConfigurationResult> = (0..50)
            .map(|_| ConfigurationResult {
                theta: IrsConfiguration::all_plus(4096),
                predicted_rate: 0.0,
                method: "test".into(),
                flips_performed: 0,
            })
            .collect();
        let matrix = export_submission(&results).unwrap();
        assert_eq!(matrix.rows(), 4096);
        assert_eq!(matrix.cols(), 50);
        assert!(matrix.data().iter().all(|&v| v == 1));

        assert!(export_submission(&results[..49]).is_err());

        let mut short = results;
        short[10].theta = IrsConfiguration::all_plus(16);
        let err = export_submission(&short).unwrap_err().to_string();
        assert!(err.contains("user 10"), "{err}");
    }
}

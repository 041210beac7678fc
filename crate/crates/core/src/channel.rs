//! Time- and frequency-domain channel application, and composition of the
//! effective channel from a surface configuration.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transform::idft_signal;
use crate::types::{
    AffineChannelModel, ChannelFrequencyResponse, ChannelImpulseResponse, FrequencySignal,
    IrsConfiguration, TimeSignal,
};

/// Builds one time-domain OFDM block from a frequency-domain symbol: the
/// unitary inverse DFT body with the last `prefix_len` samples copied in
/// front as the cyclic prefix.
pub fn assemble_ofdm_block<T: Scalar>(
    symbol: &FrequencySignal<T>,
    prefix_len: usize,
) -> Result<TimeSignal<T>> {
    let body = idft_signal(symbol)?;
    let k = body.len();
    if prefix_len >= k {
        return Err(Error::dimension("cyclic prefix", k - 1, prefix_len));
    }
    let mut samples = Vec::with_capacity(k + prefix_len);
    samples.extend_from_slice(&body.samples()[k - prefix_len..]);
    samples.extend_from_slice(body.samples());
    Ok(TimeSignal::new(samples))
}

/// The `K`-sample body of a prefixed block (everything after the prefix).
pub fn block_body<T: Scalar>(block: &TimeSignal<T>, prefix_len: usize) -> Result<TimeSignal<T>> {
    if block.len() <= prefix_len {
        return Err(Error::dimension("block body", prefix_len + 1, block.len()));
    }
    Ok(TimeSignal::new(block.samples()[prefix_len..].to_vec()))
}

/// Applies the FIR channel to one prefixed OFDM block and returns the `K`
/// steady-state output samples that follow the prefix.
///
/// The block must be exactly `K + M - 1` samples: an `M-1` sample cyclic
/// prefix followed by the `K`-sample body. On that input, keeping the
/// steady-state samples makes linear convolution act as circular
/// convolution of the body.
pub fn convolve_block<T: Scalar>(
    channel: &ChannelImpulseResponse<T>,
    block: &TimeSignal<T>,
) -> Result<TimeSignal<T>> {
    let taps = channel.taps();
    let m = taps.len();
    if m == 0 {
        return Err(Error::dimension("convolve_block taps", 1, 0));
    }
    if block.len() < m {
        return Err(Error::dimension("convolve_block input", m, block.len()));
    }
    let k = block.len() - (m - 1);
    let samples = block.samples();
    let zero = Complex::new(T::zero(), T::zero());
    let out = (0..k)
        .map(|t| {
            let start = t + m - 1;
            let mut acc = zero;
            for (tap_idx, &tap) in taps.iter().enumerate() {
                acc += tap * samples[start - tap_idx];
            }
            acc
        })
        .collect();
    Ok(TimeSignal::new(out))
}

/// Effective channel for a configuration:
/// `taps[ℓ] = direct[ℓ] + Σ_n θ_n · elements[n][ℓ]`.
pub fn compose_channel<T: Scalar>(
    model: &AffineChannelModel<T>,
    theta: &IrsConfiguration,
) -> Result<ChannelImpulseResponse<T>> {
    if theta.len() != model.element_count() {
        return Err(Error::dimension(
            "compose_channel states",
            model.element_count(),
            theta.len(),
        ));
    }
    let mut taps: Vec<Complex<T>> = model.direct().taps().to_vec();
    for (element, &state) in theta.states().iter().enumerate() {
        let row = model.elements().row(element);
        if state > 0 {
            for (tap, &g) in taps.iter_mut().zip(row) {
                *tap += g;
            }
        } else {
            for (tap, &g) in taps.iter_mut().zip(row) {
                *tap -= g;
            }
        }
    }
    Ok(ChannelImpulseResponse::new(taps))
}

/// Per-subcarrier link model: `out[ν] = response[ν]·symbol[ν] + noise[ν]`.
pub fn apply_frequency_model<T: Scalar>(
    response: &ChannelFrequencyResponse<T>,
    symbol: &FrequencySignal<T>,
    noise: &FrequencySignal<T>,
) -> Result<FrequencySignal<T>> {
    if symbol.len() != response.len() {
        return Err(Error::dimension(
            "apply_frequency_model symbol",
            response.len(),
            symbol.len(),
        ));
    }
    if noise.len() != response.len() {
        return Err(Error::dimension(
            "apply_frequency_model noise",
            response.len(),
            noise.len(),
        ));
    }
    let bins = response
        .bins()
        .iter()
        .zip(symbol.bins())
        .zip(noise.bins())
        .map(|((&h, &x), &w)| h * x + w)
        .collect();
    Ok(FrequencySignal::new(bins))
}

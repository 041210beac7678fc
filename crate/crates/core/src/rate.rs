//! Achievable-rate formula for a cyclic-prefixed OFDM link.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Sum-rate over the subcarriers in bits/s:
///
/// `B/(K+M-1) · Σ_ν log2(1 + snr_scale·|response[ν]|²)`
///
/// where `snr_scale = P/(B·N0)` converts squared channel gain into
/// per-subcarrier SNR and the prefactor charges the cyclic-prefix overhead
/// against the symbol rate `B`.
pub fn achievable_rate<T: Scalar>(
    response: &[Complex<T>],
    snr_scale: T,
    bandwidth: T,
    block_len: usize,
) -> T {
    let bits: T = response
        .iter()
        .map(|h| (snr_scale * h.norm_sqr()).ln_1p())
        .sum();
    bandwidth / T::from_index(block_len) * bits / T::LN_2()
}

//! Transform kernels: the fast Walsh–Hadamard transform and the DFT
//! conventions used throughout the link model.
//!
//! Two different DFT scalings coexist on purpose:
//!
//! * signals use the unitary transform (`1/sqrt(K)` both ways), so Parseval
//!   holds and noise variance is the same in both domains;
//! * channel responses use the unnormalized sum over taps, which makes the
//!   per-subcarrier product model exact for cyclic-prefixed blocks.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{ChannelFrequencyResponse, ChannelImpulseResponse, FrequencySignal, SystemDims, TimeSignal};

/// In-place fast Walsh–Hadamard transform in natural (Sylvester) order.
///
/// Computes `H_N v` for the Hadamard matrix defined by `H_1 = [1]`,
/// `H_2m = [[H_m, H_m], [H_m, -H_m]]`, unnormalized: applying it twice
/// yields `N v`. The first row and column of `H_N` are all ones.
pub fn fwht_in_place<T: Scalar>(values: &mut [Complex<T>]) -> Result<()> {
    let n = values.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        let step = half * 2;
        for block in (0..n).step_by(step) {
            for i in block..block + half {
                let a = values[i];
                let b = values[i + half];
                values[i] = a + b;
                values[i + half] = a - b;
            }
        }
        half = step;
    }
    Ok(())
}

/// Walsh–Hadamard transform of a slice, returning a fresh vector.
pub fn fwht<T: Scalar>(values: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let mut out = values.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Sign of the natural-order Hadamard entry `H_N[row, col]`, i.e.
/// `(-1)^popcount(row & col)`. Used to build pilot matrices and as an
/// independent reference for the fast transform.
pub fn hadamard_entry(row: usize, col: usize) -> i8 {
    if (row & col).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn twiddle_table<T: Scalar>(len: usize) -> Vec<Complex<T>> {
    let step = -T::TAU() / T::from_index(len);
    (0..len)
        .map(|j| {
            let angle = step * T::from_index(j);
            Complex::new(angle.cos(), angle.sin())
        })
        .collect()
}

/// Unitary DFT of one OFDM body: `1/sqrt(K) Σ_k s[k] e^{-j2πkν/K}`.
///
/// `subcarriers` is the expected length `K`; a mismatched input is a
/// dimension error.
pub fn dft_signal<T: Scalar>(signal: &TimeSignal<T>, subcarriers: usize) -> Result<FrequencySignal<T>> {
    if signal.len() != subcarriers {
        return Err(Error::dimension("dft_signal input", subcarriers, signal.len()));
    }
    let table = twiddle_table::<T>(subcarriers);
    let scale = T::one() / T::from_index(subcarriers).sqrt();
    let bins = dft_sum(signal.samples(), &table, subcarriers, scale, false);
    Ok(FrequencySignal::new(bins))
}

/// Inverse of [`dft_signal`]: `1/sqrt(K) Σ_ν S[ν] e^{+j2πkν/K}`.
pub fn idft_signal<T: Scalar>(spectrum: &FrequencySignal<T>) -> Result<TimeSignal<T>> {
    let k = spectrum.len();
    if k == 0 {
        return Err(Error::dimension("idft_signal input", 1, 0));
    }
    let table = twiddle_table::<T>(k);
    let scale = T::one() / T::from_index(k).sqrt();
    let samples = dft_sum(spectrum.bins(), &table, k, scale, true);
    Ok(TimeSignal::new(samples))
}

/// Channel response on the subcarrier grid: `Σ_{ℓ<M} h[ℓ] e^{-j2πℓν/K}`.
///
/// Deliberately carries no `1/sqrt(K)` factor; combined with the unitary
/// signal transform this makes `received = response ⊙ transmitted` exact.
pub fn dft_channel<T: Scalar>(
    channel: &ChannelImpulseResponse<T>,
    dims: &SystemDims,
) -> Result<ChannelFrequencyResponse<T>> {
    if channel.len() != dims.taps() {
        return Err(Error::dimension("dft_channel taps", dims.taps(), channel.len()));
    }
    let basis = DelayBasis::new(dims.subcarriers(), dims.taps());
    Ok(ChannelFrequencyResponse::new(basis.response(channel.taps())))
}

fn dft_sum<T: Scalar>(
    input: &[Complex<T>],
    table: &[Complex<T>],
    len: usize,
    scale: T,
    inverse: bool,
) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    (0..len)
        .map(|out_idx| {
            let mut acc = zero;
            for (in_idx, &v) in input.iter().enumerate() {
                let w = table[(out_idx * in_idx) % len];
                let w = if inverse { w.conj() } else { w };
                acc += v * w;
            }
            acc * scale
        })
        .collect()
}

/// Precomputed map between `M`-tap impulse responses and their values on the
/// `K`-point subcarrier grid (the unnormalized channel-DFT convention).
///
/// The grid columns are orthogonal with squared norm `K`, so the
/// least-squares fit of a `K`-bin response by an `M`-tap response is the
/// closed form `taps = (1/K) · conj(grid) · bins`, no solve needed.
pub struct DelayBasis<T: Scalar> {
    subcarriers: usize,
    taps: usize,
    twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> DelayBasis<T> {
    pub fn new(subcarriers: usize, taps: usize) -> Self {
        Self {
            subcarriers,
            taps,
            twiddles: twiddle_table::<T>(subcarriers),
        }
    }

    pub fn for_dims(dims: &SystemDims) -> Self {
        Self::new(dims.subcarriers(), dims.taps())
    }

    /// `bins[ν] = Σ_ℓ taps[ℓ] e^{-j2πℓν/K}` for `taps.len() <= M`.
    pub fn response(&self, taps: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert!(taps.len() <= self.taps);
        let zero = Complex::new(T::zero(), T::zero());
        let mut bins = vec![zero; self.subcarriers];
        self.accumulate_response(taps, &mut bins);
        bins
    }

    /// Adds the response of `taps` onto `bins`.
    pub fn accumulate_response(&self, taps: &[Complex<T>], bins: &mut [Complex<T>]) {
        let k = self.subcarriers;
        for (tap_idx, &tap) in taps.iter().enumerate() {
            if tap_idx == 0 {
                for bin in bins.iter_mut() {
                    *bin += tap;
                }
            } else {
                let mut phase = 0;
                for bin in bins.iter_mut() {
                    *bin += tap * self.twiddles[phase];
                    phase += tap_idx;
                    if phase >= k {
                        phase -= k;
                    }
                }
            }
        }
    }

    /// Least-squares projection of a `K`-bin response onto the `M`-tap
    /// delay subspace: `taps[ℓ] = (1/K) Σ_ν bins[ν] e^{+j2πℓν/K}`.
    pub fn project(&self, bins: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert_eq!(bins.len(), self.subcarriers);
        let k = self.subcarriers;
        let scale = T::one() / T::from_index(k);
        (0..self.taps)
            .map(|tap_idx| {
                let mut acc = Complex::new(T::zero(), T::zero());
                let mut phase = 0;
                for &bin in bins {
                    acc += bin * self.twiddles[phase].conj();
                    phase += tap_idx;
                    if phase >= k {
                        phase -= k;
                    }
                }
                acc * scale
            })
            .collect()
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn taps(&self) -> usize {
        self.taps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_complex_vec(rng: &mut ChaCha12Rng, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    fn relative_l2(actual: &[Complex64], expected: &[Complex64]) -> f64 {
        let err: f64 = actual
            .iter()
            .zip(expected)
            .map(|(a, e)| (a - e).norm_sqr())
            .sum();
        let scale: f64 = expected.iter().map(|e| e.norm_sqr()).sum();
        if scale == 0.0 {
            err.sqrt()
        } else {
            (err / scale).sqrt()
        }
    }

    /// Naive O(N^2) Hadamard multiply straight from the sign formula.
    fn hadamard_naive(v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|row| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, &value) in v.iter().enumerate() {
                    if hadamard_entry(row, col) == 1 {
                        acc += value;
                    } else {
                        acc -= value;
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fwht_impulse_gives_all_ones() {
        let mut v = vec![Complex64::new(0.0, 0.0); 4];
        v[0] = Complex64::new(1.0, 0.0);
        fwht_in_place(&mut v).unwrap();
        for x in v {
            assert_eq!(x, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn fwht_twice_scales_by_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &n in &[1usize, 2, 8, 32] {
            let v = random_complex_vec(&mut rng, n);
            let twice = fwht(&fwht(&v).unwrap()).unwrap();
            let expected: Vec<_> = v.iter().map(|x| x * n as f64).collect();
            assert!(relative_l2(&twice, &expected) <= 1e-13, "n={n}");
        }
    }

    #[test]
    fn fwht_matches_naive_multiply() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        for &n in &[1usize, 2, 4, 8, 16, 32, 64, 128, 256] {
            let v = random_complex_vec(&mut rng, n);
            let fast = fwht(&v).unwrap();
            let naive = hadamard_naive(&v);
            assert!(relative_l2(&fast, &naive) <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn fwht_rejects_non_power_of_two() {
        let mut v = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(fwht_in_place(&mut v), Err(Error::NotPowerOfTwo(3))));
        let mut empty: Vec<Complex64> = vec![];
        assert!(fwht_in_place(&mut empty).is_err());
    }

    #[test]
    fn dft_signal_impulse_is_flat() {
        let mut samples = vec![Complex64::new(0.0, 0.0); 4];
        samples[0] = Complex64::new(1.0, 0.0);
        let spectrum = dft_signal(&TimeSignal::new(samples), 4).unwrap();
        for &bin in spectrum.bins() {
            assert!((bin - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_signal_dc_concentrates() {
        let samples = vec![Complex64::new(1.0, 0.0); 4];
        let spectrum = dft_signal(&TimeSignal::new(samples), 4).unwrap();
        assert!((spectrum.bins()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        for &bin in &spectrum.bins()[1..] {
            assert!(bin.norm() < 1e-14);
        }
    }

    #[test]
    fn dft_signal_wrong_length_errors() {
        let samples = vec![Complex64::new(1.0, 0.0); 4];
        assert!(dft_signal(&TimeSignal::new(samples), 5).is_err());
    }

    #[test]
    fn dft_signal_round_trip_and_parseval() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let samples = random_complex_vec(&mut rng, 500);
        let signal = TimeSignal::new(samples.clone());
        let spectrum = dft_signal(&signal, 500).unwrap();

        let time_energy: f64 = samples.iter().map(|s| s.norm_sqr()).sum();
        let freq_energy: f64 = spectrum.bins().iter().map(|b| b.norm_sqr()).sum();
        assert!((time_energy - freq_energy).abs() / time_energy <= 1e-12);

        let back = idft_signal(&spectrum).unwrap();
        assert!(relative_l2(back.samples(), &samples) <= 1e-12);
    }

    #[test]
    fn dft_channel_unit_impulse_is_flat() {
        let dims = SystemDims::new(8, 3, 4).unwrap();
        let mut taps = vec![Complex64::new(0.0, 0.0); 3];
        taps[0] = Complex64::new(1.0, 0.0);
        let response = dft_channel(&ChannelImpulseResponse::new(taps), &dims).unwrap();
        for &bin in response.bins() {
            assert!((bin - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_channel_pure_delay_phase_ramp() {
        let dims = SystemDims::new(4, 2, 4).unwrap();
        let taps = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let response = dft_channel(&ChannelImpulseResponse::new(taps), &dims).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        assert!(relative_l2(response.bins(), &expected) <= 1e-14);
    }

    #[test]
    fn dft_channel_matches_scaled_zero_padded_signal_dft() {
        let dims = SystemDims::new(500, 20, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        let taps = random_complex_vec(&mut rng, 20);

        let channel = dft_channel(&ChannelImpulseResponse::new(taps.clone()), &dims).unwrap();

        let mut padded = taps;
        padded.resize(500, Complex64::new(0.0, 0.0));
        let unitary = dft_signal(&TimeSignal::new(padded), 500).unwrap();
        let scaled: Vec<_> = unitary.bins().iter().map(|b| b * 500f64.sqrt()).collect();

        assert!(relative_l2(channel.bins(), &scaled) <= 1e-12);
    }

    #[test]
    fn projection_recovers_taps_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let basis = DelayBasis::<f64>::new(64, 7);
        let taps = random_complex_vec(&mut rng, 7);
        let bins = basis.response(&taps);
        let recovered = basis.project(&bins);
        assert!(relative_l2(&recovered, &taps) <= 1e-13);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
                .prop_map(|pairs| pairs.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
        }

        proptest! {
            #[test]
            fn fwht_is_an_involution_up_to_n(
                (n, v) in (0u32..8).prop_flat_map(|log| {
                    let n = 1usize << log;
                    (Just(n), complex_vec(n))
                })
            ) {
                let twice = fwht(&fwht(&v).unwrap()).unwrap();
                for (out, orig) in twice.iter().zip(&v) {
                    prop_assert!((out - orig * n as f64).norm() <= 1e-12 * (n as f64).max(1.0));
                }
            }

            #[test]
            fn unitary_dft_preserves_energy_and_inverts(
                v in (2usize..80).prop_flat_map(complex_vec)
            ) {
                let k = v.len();
                let spectrum = dft_signal(&TimeSignal::new(v.clone()), k).unwrap();
                let time_energy: f64 = v.iter().map(|s| s.norm_sqr()).sum();
                let freq_energy: f64 = spectrum.bins().iter().map(|b| b.norm_sqr()).sum();
                prop_assert!((time_energy - freq_energy).abs() <= 1e-12 * time_energy.max(1e-12));

                let back = idft_signal(&spectrum).unwrap();
                prop_assert!(relative_l2(back.samples(), &v) <= 1e-12);
            }
        }
    }
}

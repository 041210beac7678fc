//! Channel estimation from Hadamard-coded pilot measurements.
//!
//! With the first `N` pilot columns equal to the natural-order Hadamard
//! matrix, a scaled Walsh–Hadamard transform of the equalized measurements
//! separates the per-element channels exactly. One ambiguity remains: the
//! all-ones first column makes the direct path indistinguishable from
//! element 0. A pilot set that also contains the negated columns resolves
//! it, because summing a ± pair cancels every element contribution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulator::PilotDataset;
use crate::transform::fwht_in_place;
use crate::types::SystemDims;
use crate::{ChannelFrequencyResponse, ChannelImpulseResponse, DelayBasis, Matrix, C64};

/// Estimated affine channel model for one user.
///
/// Row `n` of `element_freq` is the estimated per-subcarrier response of
/// element `n`. When `aliasing_resolved` is false the direct path could not
/// be separated: `direct_freq` is zero and row 0 holds the *sum* of the
/// direct path and element 0, which predicts the channel correctly only
/// while element 0 stays in state +1.
#[derive(Clone, Debug)]
pub struct ChannelEstimate {
    pub dims: SystemDims,
    pub direct_freq: ChannelFrequencyResponse,
    pub element_freq: Matrix<C64>,
    pub direct_taps: ChannelImpulseResponse,
    pub element_taps: Matrix<C64>,
    pub aliasing_resolved: bool,
    /// Estimated received noise power per bin (`N0·B`), in W; zero until
    /// [`estimate_noise_variance`] has run.
    pub noise_variance_estimate: f64,
    /// Per-bin pilot power `|x̄[ν]|²` the measurements were taken with.
    pub pilot_power: f64,
}

impl ChannelEstimate {
    pub fn element_count(&self) -> usize {
        self.element_freq.rows()
    }

    /// True once the delay-subspace projection has filled the tap fields.
    pub fn projected(&self) -> bool {
        self.element_taps.rows() == self.element_freq.rows() && self.element_taps.cols() > 0
    }
}

/// Recovers the frequency-domain channel estimate for `user` by inverting
/// the Hadamard pilot block.
///
/// For each subcarrier the received values are equalized by the known pilot
/// and transformed: `ĉ_ν = (1/N)·H·(z_ν ⊘ x̄)`. Slot `n ≥ 1` is element
/// `n`'s response; slot 0 aliases the direct path. If the pilot set carries
/// ±-paired blocks, the direct path is additionally recovered from the
/// paired-column sums and the aliasing is resolved.
pub fn invert_hadamard_pilots(dataset: &PilotDataset, user: usize) -> Result<ChannelEstimate> {
    let dims = dataset.dims;
    let k = dims.subcarriers();
    let n = dims.elements();
    if user >= dataset.received.users() {
        return Err(Error::Validation(format!(
            "user {user} out of range ({} users in dataset)",
            dataset.received.users()
        )));
    }
    if dataset.transmit_signal.len() != k {
        return Err(Error::dimension("transmit signal", k, dataset.transmit_signal.len()));
    }
    for (bin, &x) in dataset.transmit_signal.bins().iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            return Err(Error::ZeroPilotBin { bin });
        }
    }
    if dataset.pilot_matrix.configs() < n {
        return Err(Error::dimension("pilot columns", n, dataset.pilot_matrix.configs()));
    }
    if !dataset.pilot_matrix.leading_block_is_hadamard() {
        return Err(Error::Validation(
            "pilot matrix does not start with the natural-order Hadamard block".into(),
        ));
    }

    let pair_groups = paired_block_groups(dataset);
    let resolved = !pair_groups.is_empty();

    // Equalize and transform per subcarrier.
    let xbar = dataset.transmit_signal.bins();
    let mut element_freq = Matrix::from_elem(n, k, C64::new(0.0, 0.0));
    let mut direct_freq = vec![C64::new(0.0, 0.0); k];
    let inv_n = 1.0 / n as f64;

    let mut spread = vec![C64::new(0.0, 0.0); n];
    for bin in 0..k {
        let x = xbar[bin];
        for (t, value) in spread.iter_mut().enumerate() {
            *value = dataset.received.block(t, user)[bin] / x;
        }
        fwht_in_place(&mut spread)?;
        for value in spread.iter_mut() {
            *value *= inv_n;
        }

        if resolved {
            let mut direct = C64::new(0.0, 0.0);
            for &(first, second) in &pair_groups {
                for t in 0..n {
                    direct += (dataset.received.block(first + t, user)[bin]
                        + dataset.received.block(second + t, user)[bin])
                        / (x * 2.0);
                }
            }
            direct *= 1.0 / (pair_groups.len() * n) as f64;
            direct_freq[bin] = direct;
            spread[0] -= direct;
        }

        for (element, &value) in spread.iter().enumerate() {
            element_freq.row_mut(element)[bin] = value;
        }
    }

    let pilot_power = xbar.iter().map(|x| x.norm_sqr()).sum::<f64>() / k as f64;

    Ok(ChannelEstimate {
        dims,
        direct_freq: ChannelFrequencyResponse::new(direct_freq),
        element_freq,
        direct_taps: ChannelImpulseResponse::new(Vec::new()),
        element_taps: Matrix::from_elem(0, 0, C64::new(0.0, 0.0)),
        aliasing_resolved: resolved,
        noise_variance_estimate: 0.0,
        pilot_power,
    })
}

/// Column offsets `(2g·N, (2g+1)·N)` of block pairs that are exact
/// elementwise negations of each other.
fn paired_block_groups(dataset: &PilotDataset) -> Vec<(usize, usize)> {
    let n = dataset.dims.elements();
    let blocks = dataset.pilot_matrix.configs() / n;
    let mut groups = Vec::new();
    for g in 0..blocks / 2 {
        let first = 2 * g * n;
        let second = first + n;
        let paired = (0..n).all(|t| {
            let a = dataset.pilot_matrix.column(first + t);
            let b = dataset.pilot_matrix.column(second + t);
            a.iter().zip(b).all(|(&x, &y)| x == -y)
        });
        if paired {
            groups.push((first, second));
        }
    }
    groups
}

/// Least-squares fit of every estimated response onto the space of `M`-tap
/// impulse responses, replacing the frequency-domain fields by their
/// projections. The grid columns are orthogonal (`FᴴF = K·I`), so the fit
/// is a closed form, and white estimation noise is reduced by `M/K`.
pub fn project_to_delay_subspace(
    estimate: &ChannelEstimate,
    dims: &SystemDims,
) -> Result<ChannelEstimate> {
    let k = dims.subcarriers();
    let m = dims.taps();
    if estimate.element_freq.cols() != k {
        return Err(Error::dimension("estimate bins", k, estimate.element_freq.cols()));
    }
    let n = estimate.element_freq.rows();
    let basis = DelayBasis::for_dims(dims);

    let mut element_taps = Matrix::from_elem(n, m, C64::new(0.0, 0.0));
    let mut element_freq = Matrix::from_elem(n, k, C64::new(0.0, 0.0));
    element_taps
        .data_mut()
        .par_chunks_mut(m)
        .zip(element_freq.data_mut().par_chunks_mut(k))
        .enumerate()
        .for_each(|(element, (taps, bins))| {
            let fitted = basis.project(estimate.element_freq.row(element));
            taps.copy_from_slice(&fitted);
            bins.copy_from_slice(&basis.response(&fitted));
        });

    let direct_taps = basis.project(estimate.direct_freq.bins());
    let direct_freq = basis.response(&direct_taps);

    Ok(ChannelEstimate {
        dims: estimate.dims,
        direct_freq: ChannelFrequencyResponse::new(direct_freq),
        element_freq,
        direct_taps: ChannelImpulseResponse::new(direct_taps),
        element_taps,
        aliasing_resolved: estimate.aliasing_resolved,
        noise_variance_estimate: estimate.noise_variance_estimate,
        pilot_power: estimate.pilot_power,
    })
}

/// Estimates the received per-bin noise power `N0·B` (W) from the energy the
/// projection removed.
///
/// The out-of-subspace residual of each element row is pure noise with
/// `K−M` complex degrees of freedom and per-bin variance
/// `N0·B/(N·|x̄|²)` after the scaled Hadamard inversion; the known pilot
/// power and element count map it back to the receiver's noise level.
pub fn estimate_noise_variance(pre: &ChannelEstimate, post: &ChannelEstimate) -> Result<f64> {
    if !post.projected() {
        return Err(Error::Validation(
            "noise estimation requires the projected estimate".into(),
        ));
    }
    let k = post.dims.subcarriers();
    let m = post.dims.taps();
    if pre.element_freq.rows() != post.element_freq.rows()
        || pre.element_freq.cols() != post.element_freq.cols()
    {
        return Err(Error::dimension(
            "pre/post estimate shapes",
            post.element_freq.data().len(),
            pre.element_freq.data().len(),
        ));
    }
    let residual: f64 = pre
        .element_freq
        .data()
        .iter()
        .zip(post.element_freq.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(residual * post.pilot_power / (k - m) as f64)
}

/// Full estimation for one user: inversion, projection, noise estimate.
pub fn estimate_channel(dataset: &PilotDataset, user: usize) -> Result<ChannelEstimate> {
    let raw = invert_hadamard_pilots(dataset, user)?;
    let mut projected = project_to_delay_subspace(&raw, &dataset.dims)?;
    projected.noise_variance_estimate = estimate_noise_variance(&raw, &projected)?;
    Ok(projected)
}

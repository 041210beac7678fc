//! Domain types shared by every stage of the pipeline.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The `(subcarriers, taps, elements)` triple that fixes every array shape.
///
/// Invariants enforced at construction: `subcarriers > taps >= 1` and
/// `elements >= 1`. The Hadamard pilot design additionally needs a
/// power-of-two element count; the operations that build or invert pilots
/// enforce that themselves, so configuration search and scoring stay usable
/// for arbitrary element counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct SystemDims {
    subcarriers: usize,
    taps: usize,
    elements: usize,
}

/// Unvalidated deserialization image of [`SystemDims`].
#[derive(Deserialize)]
struct RawDims {
    subcarriers: usize,
    taps: usize,
    elements: usize,
}

impl TryFrom<RawDims> for SystemDims {
    type Error = Error;

    fn try_from(raw: RawDims) -> Result<Self> {
        SystemDims::new(raw.subcarriers, raw.taps, raw.elements)
    }
}

impl SystemDims {
    pub fn new(subcarriers: usize, taps: usize, elements: usize) -> Result<Self> {
        if taps == 0 {
            return Err(Error::InvalidDims("tap count must be positive".into()));
        }
        if subcarriers <= taps {
            return Err(Error::InvalidDims(format!(
                "subcarrier count {subcarriers} must exceed tap count {taps}"
            )));
        }
        if elements == 0 {
            return Err(Error::InvalidDims("element count must be positive".into()));
        }
        Ok(Self {
            subcarriers,
            taps,
            elements,
        })
    }

    /// Number of OFDM subcarriers (frequency bins).
    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Number of channel impulse-response taps.
    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Number of surface elements.
    pub fn elements(&self) -> usize {
        self.elements
    }

    /// Cyclic-prefix length: one less than the tap count.
    pub fn prefix_len(&self) -> usize {
        self.taps - 1
    }

    /// Time-domain samples per OFDM block (prefix plus body).
    pub fn block_len(&self) -> usize {
        self.subcarriers + self.taps - 1
    }
}

/// Complex baseband samples at symbol rate.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal<T: Scalar> {
    samples: Vec<Complex<T>>,
}

impl<T: Scalar> TimeSignal<T> {
    pub fn new(samples: Vec<Complex<T>>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One frequency-domain OFDM symbol: one complex sample per subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySignal<T: Scalar> {
    bins: Vec<Complex<T>>,
}

impl<T: Scalar> FrequencySignal<T> {
    pub fn new(bins: Vec<Complex<T>>) -> Self {
        Self { bins }
    }

    /// Constant pilot symbol on every subcarrier.
    pub fn constant(value: Complex<T>, subcarriers: usize) -> Self {
        Self {
            bins: vec![value; subcarriers],
        }
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// FIR channel impulse response: complex gain per symbol-spaced tap.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelImpulseResponse<T: Scalar> {
    taps: Vec<Complex<T>>,
}

impl<T: Scalar> ChannelImpulseResponse<T> {
    pub fn new(taps: Vec<Complex<T>>) -> Self {
        Self { taps }
    }

    pub fn zero(taps: usize) -> Self {
        Self {
            taps: vec![Complex::new(T::zero(), T::zero()); taps],
        }
    }

    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Channel response per subcarrier: the tap responses evaluated on the DFT grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelFrequencyResponse<T: Scalar> {
    bins: Vec<Complex<T>>,
}

impl<T: Scalar> ChannelFrequencyResponse<T> {
    pub fn new(bins: Vec<Complex<T>>) -> Self {
        Self { bins }
    }

    pub fn zero(subcarriers: usize) -> Self {
        Self {
            bins: vec![Complex::new(T::zero(), T::zero()); subcarriers],
        }
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Surface configuration: one state in `{-1, +1}` per element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrsConfiguration {
    states: Vec<i8>,
}

impl IrsConfiguration {
    /// Validates that every entry is +1 or -1.
    pub fn new(states: Vec<i8>) -> Result<Self> {
        for (index, &value) in states.iter().enumerate() {
            if value != 1 && value != -1 {
                return Err(Error::InvalidState { index, value });
            }
        }
        Ok(Self { states })
    }

    pub fn all_plus(elements: usize) -> Self {
        Self {
            states: vec![1; elements],
        }
    }

    /// Uniform random configuration.
    pub fn random<R: rand::Rng>(elements: usize, rng: &mut R) -> Self {
        Self {
            states: (0..elements)
                .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
                .collect(),
        }
    }

    pub fn states(&self) -> &[i8] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Negate every state.
    pub fn negated(&self) -> Self {
        Self {
            states: self.states.iter().map(|s| -s).collect(),
        }
    }

    /// Flip a single element's state in place.
    pub fn flip(&mut self, element: usize) {
        self.states[element] = -self.states[element];
    }
}

/// Dense row-major matrix used for element channels and pilot blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Clone> Matrix<E> {
    pub fn from_elem(rows: usize, cols: usize, value: E) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<E> Matrix<E> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension("matrix storage", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[E] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [E] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> &E {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: E) {
        self.data[r * self.cols + c] = value;
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }
}

/// Channel model linear in the element states:
/// response(θ) = direct + Σ_n θ_n · element_n.
///
/// `direct` is the state-independent path; row `n` of `elements` is the
/// channel through element `n` in its +1 state (the -1 state negates it,
/// which is what a π phase offset between the two states does).
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChannelModel<T: Scalar> {
    direct: ChannelImpulseResponse<T>,
    elements: Matrix<Complex<T>>,
}

impl<T: Scalar> AffineChannelModel<T> {
    pub fn new(direct: ChannelImpulseResponse<T>, elements: Matrix<Complex<T>>) -> Result<Self> {
        if elements.cols() != direct.len() {
            return Err(Error::dimension(
                "element channel taps",
                direct.len(),
                elements.cols(),
            ));
        }
        Ok(Self { direct, elements })
    }

    pub fn direct(&self) -> &ChannelImpulseResponse<T> {
        &self.direct
    }

    /// Per-element impulse responses, one row per element.
    pub fn elements(&self) -> &Matrix<Complex<T>> {
        &self.elements
    }

    pub fn element_count(&self) -> usize {
        self.elements.rows()
    }

    pub fn tap_count(&self) -> usize {
        self.direct.len()
    }
}

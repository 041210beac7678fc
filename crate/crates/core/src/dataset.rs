//! Binary container format for pipeline artifacts.
//!
//! Layout: the 5-byte magic `IRSD1`, a little-endian `u32` header length, a
//! UTF-8 JSON header (role, dims, free-form metadata, array manifest), then
//! the raw payload. Arrays are stored column-major, little-endian; complex
//! values as (real, imaginary) `f64` pairs. Array names follow the
//! measurement-data naming of the task (`pilotMatrix`, `receivedSignal`,
//! `transmitSignal`, `theta`) so files are self-describing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map as JsonMap, Value};

use crate::error::{Error, Result};
use crate::estimator::ChannelEstimate;
use crate::evaluator::RateReport;
use crate::simulator::{
    GroundTruthScenario, PilotDataset, PilotMatrix, ReceivedBlocks, ScenarioConfig, UserChannel,
};
use crate::types::SystemDims;
use crate::{
    AffineChannelModel, ChannelFrequencyResponse, ChannelImpulseResponse, DelayBasis,
    FrequencySignal, IrsConfiguration, Matrix, C64,
};

pub const MAGIC: &[u8; 5] = b"IRSD1";

/// What a dataset file holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Scenario,
    Pilots,
    Estimate,
    Submission,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "c128")]
    C128,
    #[serde(rename = "i8")]
    I8,
    #[serde(rename = "f64")]
    F64,
}

impl DType {
    pub fn byte_size(self) -> usize {
        match self {
            DType::C128 => 16,
            DType::I8 => 1,
            DType::F64 => 8,
        }
    }
}

/// Manifest entry: array name, shape, element type, byte offset into the
/// payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrayDescriptor {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    role: Role,
    dims: SystemDims,
    #[serde(default)]
    meta: JsonMap<String, Value>,
    arrays: Vec<ArrayDescriptor>,
}

/// Typed array payload.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    C128(Vec<C64>),
    I8(Vec<i8>),
    F64(Vec<f64>),
}

impl ArrayData {
    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::C128(_) => DType::C128,
            ArrayData::I8(_) => DType::I8,
            ArrayData::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::C128(v) => v.len(),
            ArrayData::I8(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> u64 {
        (self.len() * self.dtype().byte_size()) as u64
    }
}

/// An in-memory dataset file: role, dims, metadata, and named arrays.
#[derive(Clone, Debug)]
pub struct DatasetFile {
    pub role: Role,
    pub dims: SystemDims,
    pub meta: JsonMap<String, Value>,
    arrays: Vec<(String, Vec<usize>, ArrayData)>,
}

impl DatasetFile {
    pub fn new(role: Role, dims: SystemDims) -> Self {
        Self {
            role,
            dims,
            meta: JsonMap::new(),
            arrays: Vec::new(),
        }
    }

    pub fn push_array(&mut self, name: &str, shape: Vec<usize>, data: ArrayData) -> Result<()> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::dimension("array shape", count, data.len()));
        }
        if self.arrays.iter().any(|(existing, _, _)| existing == name) {
            return Err(Error::Validation(format!("duplicate array name '{name}'")));
        }
        self.arrays.push((name.to_string(), shape, data));
        Ok(())
    }

    pub fn array(&self, name: &str) -> Result<(&[usize], &ArrayData)> {
        self.arrays
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, shape, data)| (shape.as_slice(), data))
            .ok_or_else(|| Error::Validation(format!("array '{name}' missing from file")))
    }

    pub fn array_names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: Value) {
        self.meta.insert(key.to_string(), value);
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        self.meta
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Validation(format!("metadata key '{key}' missing or not a number")))
    }

    pub fn meta_u64(&self, key: &str) -> Result<u64> {
        self.meta
            .get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Validation(format!("metadata key '{key}' missing or not an integer")))
    }

    pub fn meta_bool(&self, key: &str) -> Result<bool> {
        self.meta
            .get(key)
            .and_then(Value::as_bool)
            .ok_or_else(|| Error::Validation(format!("metadata key '{key}' missing or not a boolean")))
    }

    fn header(&self) -> Header {
        let mut offset = 0u64;
        let arrays = self
            .arrays
            .iter()
            .map(|(name, shape, data)| {
                let descriptor = ArrayDescriptor {
                    name: name.clone(),
                    shape: shape.clone(),
                    dtype: data.dtype(),
                    offset,
                };
                offset += data.byte_len();
                descriptor
            })
            .collect();
        Header {
            role: self.role,
            dims: self.dims,
            meta: self.meta.clone(),
            arrays,
        }
    }

    /// Writes the file atomically (temp file in the target directory, then
    /// rename).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("irsd.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            let header = serde_json::to_vec(&self.header())
                .map_err(|e| Error::Validation(format!("header serialization failed: {e}")))?;
            out.write_all(MAGIC)?;
            out.write_all(&(header.len() as u32).to_le_bytes())?;
            out.write_all(&header)?;
            for (_, _, data) in &self.arrays {
                write_array(&mut out, data)?;
            }
            out.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads and structurally validates a file: magic, header, manifest
    /// offsets and sizes. Content rules (±1 entries, shape-vs-dims
    /// consistency) belong to the typed decoders and to
    /// [`validate_submission`].
    pub fn read_from(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);

        let mut magic = [0u8; 5];
        read_exact_at(&mut reader, &mut magic, 0)?;
        if &magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {magic:?}, expected {MAGIC:?}"),
            });
        }
        let mut len_bytes = [0u8; 4];
        read_exact_at(&mut reader, &mut len_bytes, 5)?;
        let header_len = u32::from_le_bytes(len_bytes) as usize;

        let mut header_bytes = vec![0u8; header_len];
        read_exact_at(&mut reader, &mut header_bytes, 9)?;
        let header: Header = serde_json::from_slice(&header_bytes).map_err(|e| Error::Format {
            offset: 9,
            reason: format!("header is not valid JSON: {e}"),
        })?;

        let payload_base = 9 + header_len as u64;
        let mut expected_offset = 0u64;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for descriptor in &header.arrays {
            if descriptor.offset != expected_offset {
                return Err(Error::Format {
                    offset: payload_base + descriptor.offset,
                    reason: format!(
                        "array '{}' at payload offset {}, expected {} (arrays must be \
                         contiguous and non-overlapping)",
                        descriptor.name, descriptor.offset, expected_offset
                    ),
                });
            }
            let count: usize = descriptor.shape.iter().product();
            let byte_len = (count * descriptor.dtype.byte_size()) as u64;
            let data = read_array(&mut reader, descriptor.dtype, count).map_err(|e| match e {
                Error::Io(io) => Error::Format {
                    offset: payload_base + descriptor.offset,
                    reason: format!("array '{}' payload truncated: {io}", descriptor.name),
                },
                other => other,
            })?;
            arrays.push((descriptor.name.clone(), descriptor.shape.clone(), data));
            expected_offset += byte_len;
        }
        let mut trailing = [0u8; 1];
        if reader.read(&mut trailing)? != 0 {
            return Err(Error::Format {
                offset: payload_base + expected_offset,
                reason: "trailing bytes after the last declared array".into(),
            });
        }

        Ok(Self {
            role: header.role,
            dims: header.dims,
            meta: header.meta,
            arrays,
        })
    }
}

fn read_exact_at<R: Read>(reader: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| Error::Format {
        offset,
        reason: format!("unexpected end of file: {e}"),
    })
}

fn write_array<W: Write>(out: &mut W, data: &ArrayData) -> Result<()> {
    match data {
        ArrayData::C128(values) => {
            for value in values {
                out.write_all(&value.re.to_le_bytes())?;
                out.write_all(&value.im.to_le_bytes())?;
            }
        }
        ArrayData::I8(values) => {
            for &value in values {
                out.write_all(&[value as u8])?;
            }
        }
        ArrayData::F64(values) => {
            for value in values {
                out.write_all(&value.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_array<R: Read>(reader: &mut R, dtype: DType, count: usize) -> Result<ArrayData> {
    let mut bytes = vec![0u8; count * dtype.byte_size()];
    reader.read_exact(&mut bytes)?;
    Ok(match dtype {
        DType::C128 => ArrayData::C128(
            bytes
                .chunks_exact(16)
                .map(|chunk| {
                    C64::new(
                        f64::from_le_bytes(chunk[0..8].try_into().expect("chunk size")),
                        f64::from_le_bytes(chunk[8..16].try_into().expect("chunk size")),
                    )
                })
                .collect(),
        ),
        DType::I8 => ArrayData::I8(bytes.into_iter().map(|b| b as i8).collect()),
        DType::F64 => ArrayData::F64(
            bytes
                .chunks_exact(8)
                .map(|chunk| f64::from_le_bytes(chunk.try_into().expect("chunk size")))
                .collect(),
        ),
    })
}

// ── submission validation ───────────────────────────────────────────────────

/// One contract violation found in a submission file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub what: String,
    pub row: Option<usize>,
    pub col: Option<usize>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.row, self.col) {
            (Some(r), Some(c)) => write!(f, "(row {r}, col {c}): {}", self.what),
            _ => write!(f, "{}", self.what),
        }
    }
}

/// Checks a submission against the contract: role, a `theta` array of shape
/// `N × expected_users`, every entry +1 or -1. Returns every violation
/// found (empty means valid).
pub fn validate_submission(file: &DatasetFile, expected_users: usize) -> Vec<Violation> {
    let mut violations = Vec::new();
    if file.role != Role::Submission {
        violations.push(Violation {
            what: format!("role is {:?}, expected submission", file.role),
            row: None,
            col: None,
        });
    }
    let n = file.dims.elements();
    let (shape, data) = match file.array("theta") {
        Ok(found) => found,
        Err(_) => {
            violations.push(Violation {
                what: "array 'theta' missing".into(),
                row: None,
                col: None,
            });
            return violations;
        }
    };
    if shape != [n, expected_users] {
        violations.push(Violation {
            what: format!("theta shape {shape:?}, expected [{n}, {expected_users}]"),
            row: None,
            col: None,
        });
    }
    let values = match data {
        ArrayData::I8(values) => values,
        other => {
            violations.push(Violation {
                what: format!("theta dtype {:?}, expected i8", other.dtype()),
                row: None,
                col: None,
            });
            return violations;
        }
    };
    let rows = shape.first().copied().unwrap_or(0);
    for (idx, &value) in values.iter().enumerate() {
        if value != 1 && value != -1 {
            // Column-major storage.
            violations.push(Violation {
                what: format!("entry is {value}, expected +1 or -1"),
                row: Some(idx % rows.max(1)),
                col: Some(idx / rows.max(1)),
            });
        }
    }
    violations
}

// ── typed codecs for the pipeline stages ────────────────────────────────────

fn meta_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable metadata")
}

pub fn scenario_to_file(scenario: &GroundTruthScenario) -> Result<DatasetFile> {
    let config = scenario.config();
    let dims = config.dims;
    let users = scenario.users();
    let (m, n, u) = (dims.taps(), dims.elements(), users.len());

    let mut file = DatasetFile::new(Role::Scenario, dims);
    file.set_meta("config", meta_value(config));
    file.set_meta("seed", meta_value(&config.seed));
    file.set_meta("users", meta_value(&u));

    let los: Vec<i8> = users.iter().map(|user| if user.los { 1 } else { -1 }).collect();
    file.push_array("losFlags", vec![u], ArrayData::I8(los))?;

    let mut direct = Vec::with_capacity(m * u);
    for user in users {
        direct.extend_from_slice(user.model.direct().taps());
    }
    file.push_array("directTaps", vec![m, u], ArrayData::C128(direct))?;

    let mut elements = Vec::with_capacity(m * n * u);
    for user in users {
        elements.extend_from_slice(user.model.elements().data());
    }
    file.push_array("elementTaps", vec![m, n, u], ArrayData::C128(elements))?;
    Ok(file)
}

pub fn scenario_from_file(file: &DatasetFile) -> Result<GroundTruthScenario> {
    if file.role != Role::Scenario {
        return Err(Error::Validation(format!("expected scenario role, found {:?}", file.role)));
    }
    let config_value = file
        .meta
        .get("config")
        .ok_or_else(|| Error::Validation("scenario file missing config metadata".into()))?;
    let config: ScenarioConfig = serde_json::from_value(config_value.clone())
        .map_err(|e| Error::Validation(format!("bad scenario config metadata: {e}")))?;
    let dims = file.dims;
    let (m, n) = (dims.taps(), dims.elements());
    let u = config.num_users;

    let (shape, los) = file.array("losFlags")?;
    expect_shape("losFlags", shape, &[u])?;
    let los = match los {
        ArrayData::I8(values) => values,
        _ => return Err(Error::Validation("losFlags must be i8".into())),
    };

    let (shape, direct) = file.array("directTaps")?;
    expect_shape("directTaps", shape, &[m, u])?;
    let direct = as_c128("directTaps", direct)?;

    let (shape, elements) = file.array("elementTaps")?;
    expect_shape("elementTaps", shape, &[m, n, u])?;
    let elements = as_c128("elementTaps", elements)?;

    let users = (0..u)
        .map(|user| {
            let direct_taps = direct[user * m..(user + 1) * m].to_vec();
            let rows = elements[user * m * n..(user + 1) * m * n].to_vec();
            let model = AffineChannelModel::new(
                ChannelImpulseResponse::new(direct_taps),
                Matrix::from_vec(n, m, rows)?,
            )?;
            Ok(UserChannel {
                model,
                los: los[user] == 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    GroundTruthScenario::from_parts(config, users)
}

/// Extra pilot-phase parameters carried in the file header.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PilotsMeta {
    pub seed: u64,
    pub bandwidth: f64,
    pub noise_psd: f64,
    pub power: f64,
    pub noiseless: bool,
}

pub fn pilots_to_file(dataset: &PilotDataset, meta: &PilotsMeta) -> Result<DatasetFile> {
    let dims = dataset.dims;
    let (k, n) = (dims.subcarriers(), dims.elements());
    let t = dataset.pilot_matrix.configs();
    let u = dataset.received.users();

    let mut file = DatasetFile::new(Role::Pilots, dims);
    file.set_meta("pilot", meta_value(meta));
    file.set_meta("seed", meta_value(&meta.seed));
    file.set_meta("users", meta_value(&u));

    file.push_array(
        "pilotMatrix",
        vec![n, t],
        ArrayData::I8(dataset.pilot_matrix.data().to_vec()),
    )?;
    file.push_array(
        "transmitSignal",
        vec![k, 1],
        ArrayData::C128(dataset.transmit_signal.bins().to_vec()),
    )?;
    file.push_array(
        "receivedSignal",
        vec![k, t, u],
        ArrayData::C128(dataset.received.data().to_vec()),
    )?;
    Ok(file)
}

pub fn pilots_from_file(file: &DatasetFile) -> Result<(PilotDataset, PilotsMeta)> {
    if file.role != Role::Pilots {
        return Err(Error::Validation(format!("expected pilots role, found {:?}", file.role)));
    }
    let dims = file.dims;
    let (k, n) = (dims.subcarriers(), dims.elements());
    let meta_value = file
        .meta
        .get("pilot")
        .ok_or_else(|| Error::Validation("pilots file missing pilot metadata".into()))?;
    let meta: PilotsMeta = serde_json::from_value(meta_value.clone())
        .map_err(|e| Error::Validation(format!("bad pilot metadata: {e}")))?;

    let (shape, pilot) = file.array("pilotMatrix")?;
    if shape.len() != 2 || shape[0] != n {
        return Err(Error::Validation(format!(
            "pilotMatrix shape {shape:?} inconsistent with {n} elements"
        )));
    }
    let t = shape[1];
    let pilot = match pilot {
        ArrayData::I8(values) => PilotMatrix::from_columns(n, t, values.clone())?,
        _ => return Err(Error::Validation("pilotMatrix must be i8".into())),
    };

    let (shape, transmit) = file.array("transmitSignal")?;
    expect_shape("transmitSignal", shape, &[k, 1])?;
    let transmit = FrequencySignal::new(as_c128("transmitSignal", transmit)?.to_vec());

    let (shape, received) = file.array("receivedSignal")?;
    if shape.len() != 3 || shape[0] != k || shape[1] != t {
        return Err(Error::Validation(format!(
            "receivedSignal shape {shape:?} inconsistent with K={k}, T={t}"
        )));
    }
    let u = shape[2];
    let received = ReceivedBlocks::from_parts(k, t, u, as_c128("receivedSignal", received)?.to_vec())?;

    Ok((
        PilotDataset {
            dims,
            pilot_matrix: pilot,
            transmit_signal: transmit,
            received,
        },
        meta,
    ))
}

/// Estimate-stage metadata carried alongside the fitted taps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub seed: u64,
    pub bandwidth: f64,
    pub power: f64,
}

/// Persists the estimates of every user of one dataset (the frequency-domain
/// fields are derived content and are rebuilt on load).
pub fn estimates_to_file(estimates: &[ChannelEstimate], meta: &EstimateMeta) -> Result<DatasetFile> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::Validation("no estimates to persist".into()))?;
    let dims = first.dims;
    let (m, n, u) = (dims.taps(), dims.elements(), estimates.len());
    for estimate in estimates {
        if !estimate.projected() {
            return Err(Error::Validation("only projected estimates are persisted".into()));
        }
        if estimate.dims != dims || estimate.aliasing_resolved != first.aliasing_resolved {
            return Err(Error::Validation(
                "estimates in one file must share dims and aliasing state".into(),
            ));
        }
    }

    let mut file = DatasetFile::new(Role::Estimate, dims);
    file.set_meta("estimate", meta_value(meta));
    file.set_meta("seed", meta_value(&meta.seed));
    file.set_meta("users", meta_value(&u));
    file.set_meta("aliasing_resolved", meta_value(&first.aliasing_resolved));
    file.set_meta("pilot_power", meta_value(&first.pilot_power));

    let mut direct = Vec::with_capacity(m * u);
    let mut elements = Vec::with_capacity(m * n * u);
    let mut noise = Vec::with_capacity(u);
    for estimate in estimates {
        direct.extend_from_slice(estimate.direct_taps.taps());
        elements.extend_from_slice(estimate.element_taps.data());
        noise.push(estimate.noise_variance_estimate);
    }
    file.push_array("directTaps", vec![m, u], ArrayData::C128(direct))?;
    // Column-major [M, N] per user matches the row-major element × tap layout.
    file.push_array("elementTaps", vec![m, n, u], ArrayData::C128(elements))?;
    file.push_array("noiseVariance", vec![u, 1], ArrayData::F64(noise))?;
    Ok(file)
}

pub fn estimates_from_file(file: &DatasetFile) -> Result<(Vec<ChannelEstimate>, EstimateMeta)> {
    if file.role != Role::Estimate {
        return Err(Error::Validation(format!("expected estimate role, found {:?}", file.role)));
    }
    let dims = file.dims;
    let (m, n) = (dims.taps(), dims.elements());
    let meta_value = file
        .meta
        .get("estimate")
        .ok_or_else(|| Error::Validation("estimate file missing estimate metadata".into()))?;
    let meta: EstimateMeta = serde_json::from_value(meta_value.clone())
        .map_err(|e| Error::Validation(format!("bad estimate metadata: {e}")))?;
    let u = file.meta_u64("users")? as usize;
    let aliasing_resolved = file.meta_bool("aliasing_resolved")?;
    let pilot_power = file.meta_f64("pilot_power")?;

    let (shape, direct) = file.array("directTaps")?;
    expect_shape("directTaps", shape, &[m, u])?;
    let direct = as_c128("directTaps", direct)?;

    let (shape, elements) = file.array("elementTaps")?;
    expect_shape("elementTaps", shape, &[m, n, u])?;
    let elements = as_c128("elementTaps", elements)?;

    let (shape, noise) = file.array("noiseVariance")?;
    expect_shape("noiseVariance", shape, &[u, 1])?;
    let noise = match noise {
        ArrayData::F64(values) => values,
        _ => return Err(Error::Validation("noiseVariance must be f64".into())),
    };

    let basis = DelayBasis::for_dims(&dims);
    let k = dims.subcarriers();
    let estimates = (0..u)
        .map(|user| {
            let direct_taps = direct[user * m..(user + 1) * m].to_vec();
            let element_taps =
                Matrix::from_vec(n, m, elements[user * m * n..(user + 1) * m * n].to_vec())?;
            let mut element_freq = Matrix::from_elem(n, k, C64::new(0.0, 0.0));
            for element in 0..n {
                let bins = basis.response(element_taps.row(element));
                element_freq.row_mut(element).copy_from_slice(&bins);
            }
            let direct_freq = basis.response(&direct_taps);
            Ok(ChannelEstimate {
                dims,
                direct_freq: ChannelFrequencyResponse::new(direct_freq),
                element_freq,
                direct_taps: ChannelImpulseResponse::new(direct_taps),
                element_taps,
                aliasing_resolved,
                noise_variance_estimate: noise[user],
                pilot_power,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((estimates, meta))
}

/// Per-user optimizer outcome stored in submission metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultMeta {
    pub user: usize,
    pub predicted_rate: f64,
    pub method: String,
    pub flips_performed: usize,
}

pub fn submission_to_file(
    dims: SystemDims,
    theta: &Matrix<i8>,
    results: &[ResultMeta],
    seed: u64,
) -> Result<DatasetFile> {
    let (n, u) = (theta.rows(), theta.cols());
    if n != dims.elements() {
        return Err(Error::dimension("submission rows", dims.elements(), n));
    }
    let mut file = DatasetFile::new(Role::Submission, dims);
    file.set_meta("seed", meta_value(&seed));
    file.set_meta("users", meta_value(&u));
    if !results.is_empty() {
        file.set_meta("results", meta_value(&results));
    }

    // Row-major elements × users → column-major [N, U].
    let mut data = Vec::with_capacity(n * u);
    for user in 0..u {
        for element in 0..n {
            data.push(*theta.get(element, user));
        }
    }
    file.push_array("theta", vec![n, u], ArrayData::I8(data))?;
    Ok(file)
}

pub fn submission_from_file(file: &DatasetFile) -> Result<(Matrix<i8>, Vec<ResultMeta>)> {
    if file.role != Role::Submission {
        return Err(Error::Validation(format!(
            "expected submission role, found {:?}",
            file.role
        )));
    }
    let n = file.dims.elements();
    let (shape, data) = file.array("theta")?;
    if shape.len() != 2 || shape[0] != n {
        return Err(Error::Validation(format!(
            "theta shape {shape:?} inconsistent with {n} elements"
        )));
    }
    let u = shape[1];
    let values = match data {
        ArrayData::I8(values) => values,
        _ => return Err(Error::Validation("theta must be i8".into())),
    };
    let mut matrix = Matrix::from_elem(n, u, 0i8);
    for user in 0..u {
        for element in 0..n {
            let value = values[user * n + element];
            if value != 1 && value != -1 {
                return Err(Error::Validation(format!(
                    "submission entry (row {element}, col {user}) is {value}, expected +1 or -1"
                )));
            }
            matrix.set(element, user, value);
        }
    }
    let results = match file.meta.get("results") {
        Some(value) => serde_json::from_value(value.clone())
            .map_err(|e| Error::Validation(format!("bad results metadata: {e}")))?,
        None => Vec::new(),
    };
    Ok((matrix, results))
}

/// Per-user configurations from a submission matrix, in user order.
pub fn configurations_from_matrix(theta: &Matrix<i8>) -> Result<Vec<IrsConfiguration>> {
    (0..theta.cols())
        .map(|user| {
            let states = (0..theta.rows()).map(|e| *theta.get(e, user)).collect();
            IrsConfiguration::new(states)
        })
        .collect()
}

pub fn report_to_file(dims: SystemDims, report: &RateReport, seed: u64) -> Result<DatasetFile> {
    let u = report.per_user.len();
    let mut file = DatasetFile::new(Role::Report, dims);
    file.set_meta("seed", meta_value(&seed));
    file.set_meta("report", meta_value(report));

    file.push_array(
        "trueRate",
        vec![u, 1],
        ArrayData::F64(report.per_user.iter().map(|e| e.true_rate).collect()),
    )?;
    file.push_array(
        "predictedRate",
        vec![u, 1],
        ArrayData::F64(report.per_user.iter().map(|e| e.predicted_rate).collect()),
    )?;
    file.push_array(
        "losFlags",
        vec![u, 1],
        ArrayData::I8(
            report
                .per_user
                .iter()
                .map(|e| if e.los { 1 } else { -1 })
                .collect(),
        ),
    )?;
    Ok(file)
}

pub fn report_from_file(file: &DatasetFile) -> Result<RateReport> {
    if file.role != Role::Report {
        return Err(Error::Validation(format!("expected report role, found {:?}", file.role)));
    }
    let value = file
        .meta
        .get("report")
        .ok_or_else(|| Error::Validation("report file missing report metadata".into()))?;
    serde_json::from_value(value.clone())
        .map_err(|e| Error::Validation(format!("bad report metadata: {e}")))
}

fn expect_shape(name: &str, actual: &[usize], expected: &[usize]) -> Result<()> {
    if actual != expected {
        return Err(Error::Validation(format!(
            "array '{name}' has shape {actual:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

fn as_c128<'a>(name: &str, data: &'a ArrayData) -> Result<&'a [C64]> {
    match data {
        ArrayData::C128(values) => Ok(values),
        other => Err(Error::Validation(format!(
            "array '{name}' has dtype {:?}, expected c128",
            other.dtype()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate_channel;
    use crate::simulator::{build_hadamard_pilots, generate_scenario, simulate_pilot_phase};
    use tempfile::tempdir;

    fn small_scenario() -> (ScenarioConfig, GroundTruthScenario) {
        let dims = SystemDims::new(24, 4, 8).unwrap();
        let config = ScenarioConfig::new(dims, 2, 17);
        let scenario = generate_scenario(&config).unwrap();
        (config, scenario)
    }

    #[test]
    fn scenario_round_trip() {
        let (_, scenario) = small_scenario();
        let dir = tempdir().unwrap();
        let path = dir.path().join("scenario.irsd");
        scenario_to_file(&scenario).unwrap().write_to(&path).unwrap();

        let file = DatasetFile::read_from(&path).unwrap();
        assert_eq!(file.role, Role::Scenario);
        let loaded = scenario_from_file(&file).unwrap();
        assert_eq!(loaded.noise_psd(), scenario.noise_psd());
        for (a, b) in loaded.users().iter().zip(scenario.users()) {
            assert_eq!(a.los, b.los);
            assert_eq!(a.model, b.model);
        }
    }

    #[test]
    fn pilots_round_trip_is_bit_exact() {
        let (config, scenario) = small_scenario();
        let pilots = build_hadamard_pilots(&config.dims, 2).unwrap();
        let dataset = simulate_pilot_phase(&scenario, &pilots, 1.0, false).unwrap();
        let meta = PilotsMeta {
            seed: 17,
            bandwidth: config.bandwidth,
            noise_psd: scenario.noise_psd(),
            power: 1.0,
            noiseless: false,
        };

        let dir = tempdir().unwrap();
        let path = dir.path().join("pilots.irsd");
        pilots_to_file(&dataset, &meta).unwrap().write_to(&path).unwrap();

        let file = DatasetFile::read_from(&path).unwrap();
        let (loaded, loaded_meta) = pilots_from_file(&file).unwrap();
        assert_eq!(loaded_meta.power, 1.0);
        assert_eq!(loaded.pilot_matrix.data(), dataset.pilot_matrix.data());
        // Bit-exact payload round trip.
        let same = loaded
            .received
            .data()
            .iter()
            .zip(dataset.received.data())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        assert!(same);

        // Writing the loaded dataset again reproduces the file bytes.
        let path2 = dir.path().join("pilots2.irsd");
        pilots_to_file(&loaded, &loaded_meta).unwrap().write_to(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn estimate_round_trip() {
        let (config, scenario) = small_scenario();
        let pilots = build_hadamard_pilots(&config.dims, 4).unwrap();
        let dataset = simulate_pilot_phase(&scenario, &pilots, 1.0, true).unwrap();
        let estimates: Vec<_> = (0..2)
            .map(|user| estimate_channel(&dataset, user).unwrap())
            .collect();
        let meta = EstimateMeta {
            seed: 17,
            bandwidth: config.bandwidth,
            power: 1.0,
        };

        let dir = tempdir().unwrap();
        let path = dir.path().join("estimate.irsd");
        estimates_to_file(&estimates, &meta).unwrap().write_to(&path).unwrap();

        let file = DatasetFile::read_from(&path).unwrap();
        let (loaded, _) = estimates_from_file(&file).unwrap();
        assert_eq!(loaded.len(), 2);
        for (a, b) in loaded.iter().zip(&estimates) {
            assert_eq!(a.aliasing_resolved, b.aliasing_resolved);
            assert_eq!(a.element_taps.data(), b.element_taps.data());
            assert_eq!(a.noise_variance_estimate, b.noise_variance_estimate);
            // Rebuilt frequency rows match the originals.
            let err: f64 = a
                .element_freq
                .data()
                .iter()
                .zip(b.element_freq.data())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = b
                .element_freq
                .data()
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err / scale <= 1e-10);
        }
    }

    #[test]
    fn submission_round_trip_and_validation() {
        let dims = SystemDims::new(24, 4, 8).unwrap();
        let mut theta = Matrix::from_elem(8, 3, 1i8);
        theta.set(2, 1, -1);
        let results = vec![ResultMeta {
            user: 0,
            predicted_rate: 1e6,
            method: "wideband-greedy".into(),
            flips_performed: 3,
        }];

        let dir = tempdir().unwrap();
        let path = dir.path().join("submission.irsd");
        submission_to_file(dims, &theta, &results, 9)
            .unwrap()
            .write_to(&path)
            .unwrap();

        let file = DatasetFile::read_from(&path).unwrap();
        let (loaded, loaded_results) = submission_from_file(&file).unwrap();
        assert_eq!(loaded.data(), theta.data());
        assert_eq!(loaded_results.len(), 1);

        assert!(validate_submission(&file, 3).is_empty());
        let shape_violations = validate_submission(&file, 50);
        assert_eq!(shape_violations.len(), 1);
        assert!(shape_violations[0].what.contains("shape"));
    }

    #[test]
    fn validate_submission_reports_entry_coordinates() {
        let dims = SystemDims::new(24, 4, 8).unwrap();
        let mut file = DatasetFile::new(Role::Submission, dims);
        let mut data = vec![1i8; 8 * 2];
        data[0] = 0; // (row 0, col 0)
        data[8 + 3] = 5; // (row 3, col 1)
        file.push_array("theta", vec![8, 2], ArrayData::I8(data)).unwrap();

        let violations = validate_submission(&file, 2);
        assert_eq!(violations.len(), 2);
        assert_eq!((violations[0].row, violations[0].col), (Some(0), Some(0)));
        assert_eq!((violations[1].row, violations[1].col), (Some(3), Some(1)));
    }

    #[test]
    fn malformed_files_report_byte_offsets() {
        let dims = SystemDims::new(24, 4, 8).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.irsd");

        // Bad magic.
        std::fs::write(&path, b"NOPE!rest").unwrap();
        match DatasetFile::read_from(&path) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("expected magic error, got {other:?}"),
        }

        // Truncated payload.
        let mut file = DatasetFile::new(Role::Submission, dims);
        file.push_array("theta", vec![8, 1], ArrayData::I8(vec![1; 8])).unwrap();
        file.write_to(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        match DatasetFile::read_from(&path) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected truncation error, got {other:?}"),
        }

        // Trailing garbage.
        let mut extended = bytes.clone();
        extended.extend_from_slice(&[0u8; 3]);
        std::fs::write(&path, &extended).unwrap();
        assert!(matches!(DatasetFile::read_from(&path), Err(Error::Format { .. })));

        // Corrupt header JSON.
        let mut corrupt = bytes;
        corrupt[10] = b'!';
        std::fs::write(&path, &corrupt).unwrap();
        match DatasetFile::read_from(&path) {
            Err(Error::Format { offset: 9, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn report_round_trip() {
        use crate::evaluator::{RateReport, UserRateEntry, WEIGHTING_NOTE};
        let dims = SystemDims::new(24, 4, 8).unwrap();
        let report = RateReport {
            per_user: vec![UserRateEntry {
                user: 0,
                true_rate: 1.5e6,
                predicted_rate: 1.4e6,
                los: true,
            }],
            weighted_average: 1.5e6,
            baselines: [("random".to_string(), 0.5e6)].into_iter().collect(),
            weighting: WEIGHTING_NOTE.into(),
            prediction_gap_max: 0.07,
            prediction_gap_mean: 0.07,
        };

        let dir = tempdir().unwrap();
        let path = dir.path().join("report.irsd");
        report_to_file(dims, &report, 3).unwrap().write_to(&path).unwrap();
        let loaded = report_from_file(&DatasetFile::read_from(&path).unwrap()).unwrap();
        assert_eq!(loaded.per_user.len(), 1);
        assert_eq!(loaded.baselines["random"], 0.5e6);
    }
}

//! Domain types for CSI experiments.
//!
//! Indexing is 0-based throughout: frame `k` in `0..M`, sub-carrier `n` in
//! `0..N`. Matrices are dense and frame-major (one row per CSI).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix, one row per frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { left: data.len(), right: rows * cols });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (k, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::RaggedFrame { frame: k, expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> T {
        self.data[k * self.cols + n]
    }

    #[inline]
    pub fn set(&mut self, k: usize, n: usize, v: T) {
        self.data[k * self.cols + n] = v;
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on zero; a 0-column matrix has no meaningful rows
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, n: usize) -> Vec<T> {
        (0..self.rows).map(|k| self.get(k, n)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// One I/Q sample of a sub-carrier.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexSample<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> ComplexSample<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re == T::zero() && self.im == T::zero()
    }

    pub fn amplitude(&self) -> T {
        self.re.hypot(self.im)
    }
}

/// One captured CSI: a complex sample per sub-carrier plus reception time.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame<T> {
    pub samples: Vec<ComplexSample<T>>,
    /// Reception time in seconds, when the capture recorded one.
    pub rx_time: Option<f64>,
}

impl<T: Real> CsiFrame<T> {
    pub fn new(samples: Vec<ComplexSample<T>>, rx_time: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyFrame);
        }
        Ok(Self { samples, rx_time })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-sub-carrier amplitude `sqrt(re² + im²)`.
pub fn amplitude<T: Real>(frame: &CsiFrame<T>) -> Result<Vec<T>> {
    frame
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if s.is_finite() {
                Ok(s.amplitude())
            } else {
                Err(Error::NonFiniteSample { frame: 0, subcarrier: n })
            }
        })
        .collect()
}

/// Per-sub-carrier phase in (−π, π]. Not used downstream; kept so that
/// ingestion is lossless.
pub fn phase<T: Real>(frame: &CsiFrame<T>) -> Result<Vec<T>> {
    frame
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if !s.is_finite() {
                Err(Error::NonFiniteSample { frame: 0, subcarrier: n })
            } else if s.is_zero() {
                Err(Error::UndefinedPhase(n))
            } else {
                // atan2 returns −π for (−1, −0.0); fold it onto +π
                let p = s.im.atan2(s.re);
                Ok(if p == -T::PI() { T::PI() } else { p })
            }
        })
        .collect()
}

/// 802.11 amendment used for the capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Ac,
    Ax,
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Ac => "ac",
            Modulation::Ax => "ax",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureDate {
    pub day: u32,
    pub month: u32,
    pub year: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct People {
    pub present: bool,
    pub num: u32,
    pub moving: bool,
    #[serde(default)]
    pub names: Vec<String>,
}

/// Experimental environment class derived from the people block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    Empty,
    Static,
    Dynamic,
    FullyDynamic,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Empty => "Empty",
            Scenario::Static => "Static",
            Scenario::Dynamic => "Dynamic",
            Scenario::FullyDynamic => "FullyDynamic",
        })
    }
}

pub const METADATA_SCHEMA_VERSION: &str = "2024-09";

fn default_schema_version() -> String {
    METADATA_SCHEMA_VERSION.to_string()
}

fn default_one() -> u32 {
    1
}

/// Per-experiment metadata document. Field names follow the capture tooling's
/// JSON (camelCase); unknown fields are kept in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentMetadata {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub date: CaptureDate,
    #[serde(rename = "locationID")]
    pub location_id: String,
    pub experiment: String,
    pub ad_hoc_transmission: bool,
    /// Inter-packet sleep in microseconds.
    #[serde(rename = "usleep")]
    pub usleep_us: u64,
    /// Average experiment duration in seconds.
    #[serde(rename = "avgDuration")]
    pub avg_duration_s: u64,
    #[serde(rename = "bandwidth")]
    pub bandwidth_mhz: u32,
    pub modulation: Modulation,
    pub num_rx: u32,
    pub num_tx: u32,
    pub num_antennas_tx: u32,
    pub num_antennas_rx: u32,
    #[serde(default = "default_one")]
    pub num_spatial_streams: u32,
    pub people: People,
    #[serde(default)]
    pub notes: String,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ExperimentMetadata {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMetadata(m));
        if ![20, 40, 80, 160].contains(&self.bandwidth_mhz) {
            return Err(Error::UnsupportedBandwidth(self.bandwidth_mhz));
        }
        if self.avg_duration_s == 0 {
            return bad("avgDuration must be > 0".into());
        }
        for (name, v) in [
            ("numRx", self.num_rx),
            ("numTx", self.num_tx),
            ("numAntennasTx", self.num_antennas_tx),
            ("numAntennasRx", self.num_antennas_rx),
            ("numSpatialStreams", self.num_spatial_streams),
        ] {
            if v < 1 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        let p = &self.people;
        if p.present != (p.num > 0) {
            return bad(format!("people.present={} inconsistent with people.num={}", p.present, p.num));
        }
        if p.moving && !p.present {
            return bad("people.moving requires people.present".into());
        }
        if !p.names.is_empty() && p.names.len() != p.num as usize {
            return bad(format!("people.names has {} entries, people.num is {}", p.names.len(), p.num));
        }
        if !(1..=31).contains(&self.date.day) || !(1..=12).contains(&self.date.month) {
            return bad(format!("invalid date {}/{}/{}", self.date.day, self.date.month, self.date.year));
        }
        Ok(())
    }

    /// Empty when nobody is present, Static when people sit still, Dynamic for
    /// one moving person and FullyDynamic for several.
    pub fn scenario(&self) -> Scenario {
        match (self.people.present, self.people.moving, self.people.num) {
            (false, _, _) => Scenario::Empty,
            (true, false, _) => Scenario::Static,
            (true, true, 1) => Scenario::Dynamic,
            (true, true, _) => Scenario::FullyDynamic,
        }
    }

    /// A minimal valid document, used for synthetic corpora.
    pub fn synthetic(experiment: &str, bandwidth_mhz: u32, modulation: Modulation, people: People) -> Self {
        Self {
            schema_version: default_schema_version(),
            date: CaptureDate { day: 1, month: 1, year: 2024 },
            location_id: "SYNTH".into(),
            experiment: experiment.into(),
            ad_hoc_transmission: true,
            usleep_us: 10_000,
            avg_duration_s: 600,
            bandwidth_mhz,
            modulation,
            num_rx: 1,
            num_tx: 1,
            num_antennas_tx: 1,
            num_antennas_rx: 1,
            num_spatial_streams: 1,
            people,
            notes: String::new(),
            extra: Default::default(),
        }
    }
}

/// An ordered frame collection with its metadata.
#[derive(Debug, Clone)]
pub struct Experiment<T> {
    frames: Vec<CsiFrame<T>>,
    pub metadata: ExperimentMetadata,
    /// Original column indices removed as suppressed sub-carriers.
    pub removed: Vec<usize>,
}

impl<T: Real> Experiment<T> {
    /// Rejects ragged frames and decreasing reception times.
    pub fn new(frames: Vec<CsiFrame<T>>, metadata: ExperimentMetadata) -> Result<Self> {
        let n_sc = frames.first().ok_or(Error::NoFrames)?.len();
        let mut last_t: Option<f64> = None;
        for (k, f) in frames.iter().enumerate() {
            if f.len() != n_sc {
                return Err(Error::RaggedFrame { frame: k, expected: n_sc, found: f.len() });
            }
            if let (Some(prev), Some(t)) = (last_t, f.rx_time) {
                if t < prev {
                    return Err(Error::NonMonotoneTime(k));
                }
            }
            if f.rx_time.is_some() {
                last_t = f.rx_time;
            }
        }
        Ok(Self { frames, metadata, removed: Vec::new() })
    }

    pub fn frames(&self) -> &[CsiFrame<T>] {
        &self.frames
    }

    /// Number of frames, M.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sub-carriers per frame, N.
    pub fn n_sc(&self) -> usize {
        self.frames[0].len()
    }

    /// Inter-arrival time `t[k] − t[k−1]`; `None` for the first frame or when
    /// either timestamp is missing.
    pub fn inter_arrival(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        Some(self.frames[k].rx_time? - self.frames[k - 1].rx_time?)
    }

    pub(crate) fn with_frames(&self, frames: Vec<CsiFrame<T>>, removed: Vec<usize>) -> Self {
        Self { frames, metadata: self.metadata.clone(), removed }
    }

    /// Raw amplitude matrix of the experiment.
    pub fn amplitudes(&self) -> Result<AmplitudeMatrix<T>> {
        let n = self.n_sc();
        let mut data = Vec::with_capacity(self.len() * n);
        for (k, f) in self.frames.iter().enumerate() {
            for (i, s) in f.samples.iter().enumerate() {
                if !s.is_finite() {
                    return Err(Error::NonFiniteSample { frame: k, subcarrier: i });
                }
                data.push(s.amplitude());
            }
        }
        Ok(AmplitudeMatrix::raw(Matrix::from_vec(self.len(), n, data)?))
    }
}

/// Pipeline stage an amplitude matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Raw,
    EnergyNormalized,
    UnitNormalized,
}

/// M×N real amplitudes tagged with their processing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix<T> {
    pub values: Matrix<T>,
    pub stage: Stage,
}

impl<T: Real> AmplitudeMatrix<T> {
    pub fn raw(values: Matrix<T>) -> Self {
        Self { values, stage: Stage::Raw }
    }

    /// Wraps `[0, 1]` data as unit-normalized without re-normalizing it.
    pub fn unit(values: Matrix<T>) -> Result<Self> {
        for (i, &v) in values.as_slice().iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::OutOfRange { index: i, value: v.as_f64(), range: "[0, 1]".into() });
            }
        }
        Ok(Self { values, stage: Stage::UnitNormalized })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub(crate) fn expect_stage(&self, stage: Stage, op: &'static str) -> Result<()> {
        if self.stage != stage {
            return Err(Error::InvalidArgument(format!("{op} expects a {stage:?} matrix, got {:?}", self.stage)));
        }
        Ok(())
    }
}

/// Largest level on a `q_amp`-bit amplitude grid, `2^q_amp − 1`.
#[inline]
pub fn max_level(q_amp: u32) -> u32 {
    assert!((1..=31).contains(&q_amp), "q_amp must be in 1..=31");
    (1u32 << q_amp) - 1
}

/// M×N amplitude levels on the `[0, 2^q_amp − 1]` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMatrix {
    pub values: Matrix<u32>,
    pub q_amp: u32,
}

impl QuantizedMatrix {
    pub fn new(values: Matrix<u32>, q_amp: u32) -> Result<Self> {
        if !(1..=31).contains(&q_amp) {
            return Err(Error::InvalidArgument(format!("q_amp {q_amp} outside 1..=31")));
        }
        let top = max_level(q_amp);
        if let Some((i, &v)) = values.as_slice().iter().enumerate().find(|(_, &v)| v > top) {
            return Err(Error::OutOfRange { index: i, value: v as f64, range: format!("[0, {top}]") });
        }
        Ok(Self { values, q_amp })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn max_level(&self) -> u32 {
        max_level(self.q_amp)
    }
}

/// Representative CSI of an experiment (per-sub-carrier average).
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceCsi<T> {
    Unit(Vec<T>),
    Quantized { levels: Vec<u32>, q_amp: u32 },
}

impl<T: Real> ReferenceCsi<T> {
    pub fn len(&self) -> usize {
        match self {
            ReferenceCsi::Unit(v) => v.len(),
            ReferenceCsi::Quantized { levels, .. } => levels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn levels(&self) -> Option<(&[u32], u32)> {
        match self {
            ReferenceCsi::Quantized { levels, q_amp } => Some((levels, *q_amp)),
            ReferenceCsi::Unit(_) => None,
        }
    }
}

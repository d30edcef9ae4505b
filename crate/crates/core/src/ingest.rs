//! Trace and metadata ingestion.
//!
//! A trace file is CSV with one frame per row. Complex samples are stored
//! either interleaved (`re0,im0,re1,im1,…`) or as paired blocks (all real
//! parts, then all imaginary parts). Metadata is a JSON document per
//! experiment.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexSample, CsiFrame, Experiment, ExperimentMetadata, Modulation, QuantizedMatrix};
use crate::scalar::Real;

/// Useful sub-carrier count for a channel: `3.2 · BW`, times 4 for 802.11ax.
pub fn expected_subcarriers(bandwidth_mhz: u32, standard: Modulation) -> Result<usize> {
    if ![20, 40, 80, 160].contains(&bandwidth_mhz) {
        return Err(Error::UnsupportedBandwidth(bandwidth_mhz));
    }
    // 3.2 · BW == 16 · BW / 5, exact for every supported bandwidth
    let nsc = 16 * bandwidth_mhz as usize / 5;
    Ok(match standard {
        Modulation::Ac => nsc,
        Modulation::Ax => nsc * 4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ComplexLayout {
    /// `re0, im0, re1, im1, …`
    #[default]
    InterleavedReIm,
    /// `re0 … re(N−1), im0 … im(N−1)`
    PairedColumns,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFileSpec {
    pub path: PathBuf,
    pub complex_layout: ComplexLayout,
    pub delimiter: u8,
    /// Skip one header row.
    pub header: bool,
}

impl TraceFileSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), complex_layout: ComplexLayout::default(), delimiter: b',', header: false }
    }

    pub fn validate(&self) -> Result<()> {
        if ![b',', b';', b'\t'].contains(&self.delimiter) {
            return Err(Error::InvalidArgument(format!(
                "delimiter {:?} not one of ',', ';', tab",
                self.delimiter as char
            )));
        }
        Ok(())
    }
}

/// Non-fatal findings raised while loading a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum IngestWarning {
    SubcarrierCount { expected: usize, found: usize },
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestWarning::SubcarrierCount { expected, found } => {
                write!(f, "trace has {found} sub-carriers, bandwidth/standard imply {expected}")
            }
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Parses a trace from any reader. Row and column numbers in errors are
/// 1-based and count the header row when present.
pub fn read_trace<T: Real, R: Read>(
    reader: R,
    spec: &TraceFileSpec,
    metadata: ExperimentMetadata,
) -> Result<(Experiment<T>, Vec<IngestWarning>)> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(spec.header)
        .delimiter(spec.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let row_offset = if spec.header { 2 } else { 1 };
    let mut frames = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + row_offset;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRow { row, expected, found: rec.len() });
        }
        if expected % 2 != 0 {
            return Err(Error::Parse { row, col: expected, msg: "odd number of real columns".into() });
        }
        let mut cells = Vec::with_capacity(expected);
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            cells.push(T::of(v));
        }
        let half = expected / 2;
        let samples = (0..half)
            .map(|n| match spec.complex_layout {
                ComplexLayout::InterleavedReIm => ComplexSample::new(cells[2 * n], cells[2 * n + 1]),
                ComplexLayout::PairedColumns => ComplexSample::new(cells[n], cells[half + n]),
            })
            .collect();
        frames.push(CsiFrame::new(samples, None)?);
    }
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }
    let mut warnings = Vec::new();
    if let Ok(expected) = expected_subcarriers(metadata.bandwidth_mhz, metadata.modulation) {
        let found = frames[0].len();
        if found != expected {
            warnings.push(IngestWarning::SubcarrierCount { expected, found });
        }
    }
    Ok((Experiment::new(frames, metadata)?, warnings))
}

/// Loads a trace file. The experiment keeps every column; call
/// [`strip_suppressed`] afterwards.
pub fn load_trace<T: Real>(
    spec: &TraceFileSpec,
    metadata: ExperimentMetadata,
) -> Result<(Experiment<T>, Vec<IngestWarning>)> {
    read_trace(open(&spec.path)?, spec, metadata)
}

/// Writes frames in the layout `spec` describes, using the shortest
/// round-tripping decimal form of each value.
pub fn write_trace<T: Real, W: Write>(out: W, exp: &Experiment<T>, spec: &TraceFileSpec) -> Result<()> {
    spec.validate()?;
    let mut w = csv::WriterBuilder::new().delimiter(spec.delimiter).has_headers(false).from_writer(out);
    let n = exp.n_sc();
    if spec.header {
        let names: Vec<String> = match spec.complex_layout {
            ComplexLayout::InterleavedReIm => (0..n).flat_map(|i| [format!("re{i}"), format!("im{i}")]).collect(),
            ComplexLayout::PairedColumns => {
                (0..n).map(|i| format!("re{i}")).chain((0..n).map(|i| format!("im{i}"))).collect()
            }
        };
        w.write_record(&names).map_err(csv_io)?;
    }
    for f in exp.frames() {
        let cells: Vec<String> = match spec.complex_layout {
            ComplexLayout::InterleavedReIm => {
                f.samples.iter().flat_map(|s| [fmt_real(s.re), fmt_real(s.im)]).collect()
            }
            ComplexLayout::PairedColumns => f
                .samples
                .iter()
                .map(|s| fmt_real(s.re))
                .chain(f.samples.iter().map(|s| fmt_real(s.im)))
                .collect(),
        };
        w.write_record(&cells).map_err(csv_io)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

fn fmt_real<T: Real>(v: T) -> String {
    format!("{}", v)
}

fn csv_io(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e.to_string()))
}

/// Removes every sub-carrier that is `0 + 0i` in all frames. Suppression is
/// a property of the transmission, so a column that is zero only in some
/// frames is kept. Surviving columns keep their order.
pub fn strip_suppressed<T: Real>(exp: &Experiment<T>) -> Result<Experiment<T>> {
    let n = exp.n_sc();
    let suppressed: Vec<bool> = (0..n).map(|i| exp.frames().iter().all(|f| f.samples[i].is_zero())).collect();
    let removed_now: Vec<usize> = (0..n).filter(|&i| suppressed[i]).collect();
    if removed_now.len() == n {
        return Err(Error::EmptyChannel);
    }
    // indices are reported against the original column numbering
    let original: Vec<usize> = original_indices(n + exp.removed.len(), &exp.removed);
    let mut removed: Vec<usize> = exp.removed.clone();
    removed.extend(removed_now.iter().map(|&i| original[i]));
    removed.sort_unstable();
    let frames = exp
        .frames()
        .iter()
        .map(|f| CsiFrame {
            samples: f.samples.iter().zip(&suppressed).filter(|(_, &s)| !s).map(|(&c, _)| c).collect(),
            rx_time: f.rx_time,
        })
        .collect();
    Ok(exp.with_frames(frames, removed))
}

fn original_indices(total: usize, removed: &[usize]) -> Vec<usize> {
    (0..total).filter(|i| removed.binary_search(i).is_err()).collect()
}

const MANDATORY_FIELDS: &[&str] = &[
    "date",
    "locationID",
    "experiment",
    "adHocTransmission",
    "usleep",
    "avgDuration",
    "bandwidth",
    "modulation",
    "numRx",
    "numTx",
    "numAntennasTx",
    "numAntennasRx",
    "people",
];

/// Parses and validates a metadata document.
pub fn parse_metadata(text: &str) -> Result<ExperimentMetadata> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value.as_object().ok_or_else(|| Error::InvalidMetadata("document is not a JSON object".into()))?;
    for field in MANDATORY_FIELDS {
        if !obj.contains_key(*field) {
            return Err(Error::MissingField((*field).into()));
        }
    }
    let people = obj["people"].as_object().ok_or_else(|| Error::InvalidMetadata("people is not an object".into()))?;
    for field in ["present", "num", "moving"] {
        if !people.contains_key(field) {
            return Err(Error::MissingField(format!("people.{field}")));
        }
    }
    let md: ExperimentMetadata =
        serde_json::from_value(value).map_err(|e| Error::InvalidMetadata(e.to_string()))?;
    md.validate()?;
    Ok(md)
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<ExperimentMetadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(&text)
}

/// Location ID → description map kept alongside the metadata documents.
pub type LocationRegistry = BTreeMap<String, String>;

pub fn load_location_registry(path: impl AsRef<Path>) -> Result<LocationRegistry> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads amplitude levels back from a trace whose samples are real
/// non-negative integers (the format synthetic corpora are written in).
pub fn quantized_from_experiment<T: Real>(exp: &Experiment<T>, q_amp: u32) -> Result<QuantizedMatrix> {
    let amps = exp.amplitudes()?;
    let top = crate::model::max_level(q_amp) as f64;
    let mut levels = Vec::with_capacity(amps.rows() * amps.cols());
    for (i, &a) in amps.values.as_slice().iter().enumerate() {
        let a = a.as_f64();
        if a.fract() != 0.0 || a > top {
            return Err(Error::OutOfRange { index: i, value: a, range: format!("integer levels in [0, {top}]") });
        }
        levels.push(a as u32);
    }
    QuantizedMatrix::new(crate::model::Matrix::from_vec(amps.rows(), amps.cols(), levels)?, q_amp)
}

/// Writes a quantized matrix as integer CSV preceded by a `# q_amp=<bits>` line.
pub fn write_quantized<W: Write>(mut out: W, q: &QuantizedMatrix) -> Result<()> {
    let io = |e| Error::io("<quantized>", e);
    writeln!(out, "# q_amp={}", q.q_amp).map_err(io)?;
    for row in q.values.row_iter() {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    Ok(())
}

/// Reads the format produced by [`write_quantized`].
pub fn read_quantized<R: Read>(mut input: R) -> Result<QuantizedMatrix> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| Error::io("<quantized>", e))?;
    let mut q_amp = None;
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("q_amp=") {
                q_amp = Some(v.trim().parse::<u32>().map_err(|_| Error::Parse {
                    row: i + 1,
                    col: 0,
                    msg: format!("bad q_amp {v:?}"),
                })?);
            }
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| {
                cell.trim().parse::<u32>().map_err(|_| Error::Parse {
                    row: i + 1,
                    col: c + 1,
                    msg: format!("not a level: {cell:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::RaggedRow { row: i + 1, expected: first.len(), found: row.len() });
            }
        }
        rows.push(row);
    }
    let q_amp = q_amp.ok_or_else(|| Error::MissingField("q_amp".into()))?;
    if rows.is_empty() {
        return Err(Error::NoFrames);
    }
    QuantizedMatrix::new(crate::model::Matrix::from_rows(&rows)?, q_amp)
}

pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedMatrix> {
    let path = path.as_ref();
    read_quantized(open(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::People;

    pub(crate) const LISTING_METADATA: &str = r#"{
        "date": {"day": 12, "month": 12, "year": 2023},
        "locationID": "U004",
        "experiment": "capture",
        "adHocTransmission": true,
        "usleep": 10000,
        "avgDuration": 600,
        "bandwidth": 20,
        "modulation": "ax",
        "numRx": 1,
        "numTx": 1,
        "numAntennasTx": 1,
        "numAntennasRx": 1,
        "numSpatialStreams": 1,
        "people": {"present": true, "num": 2, "moving": false, "names": ["John Smith", "Jane Doe"]},
        "notes": "JS sitting at the main desk, JD facing him."
    }"#;

    fn md() -> ExperimentMetadata {
        ExperimentMetadata::synthetic("t", 20, Modulation::Ax, People { present: false, num: 0, moving: false, names: vec![] })
    }

    fn spec() -> TraceFileSpec {
        TraceFileSpec::new("mem")
    }

    #[test]
    fn subcarrier_counts() {
        assert_eq!(expected_subcarriers(80, Modulation::Ac).unwrap(), 256);
        assert_eq!(expected_subcarriers(20, Modulation::Ax).unwrap(), 256);
        assert_eq!(expected_subcarriers(40, Modulation::Ax).unwrap(), 512);
        assert_eq!(expected_subcarriers(80, Modulation::Ax).unwrap(), 1024);
        assert_eq!(expected_subcarriers(20, Modulation::Ac).unwrap(), 64);
        assert!(matches!(expected_subcarriers(30, Modulation::Ac), Err(Error::UnsupportedBandwidth(30))));
    }

    #[test]
    fn reads_three_rows_of_eight_samples() {
        let row: Vec<String> = (0..16).map(|i| i.to_string()).collect();
        let text = format!("{0}\n{0}\n{0}\n", row.join(","));
        let (exp, warnings) = read_trace::<f64, _>(text.as_bytes(), &spec(), md()).unwrap();
        assert_eq!(exp.len(), 3);
        assert_eq!(exp.n_sc(), 8);
        assert_eq!(exp.frames()[0].samples[1], ComplexSample::new(2.0, 3.0));
        assert_eq!(warnings, vec![IngestWarning::SubcarrierCount { expected: 256, found: 8 }]);
    }

    #[test]
    fn paired_layout_and_header() {
        let text = "a,b,c,d\n1,2,3,4\n";
        let mut s = spec();
        s.header = true;
        s.complex_layout = ComplexLayout::PairedColumns;
        let (exp, _) = read_trace::<f64, _>(text.as_bytes(), &s, md()).unwrap();
        assert_eq!(exp.frames()[0].samples, vec![ComplexSample::new(1.0, 3.0), ComplexSample::new(2.0, 4.0)]);
    }

    #[test]
    fn parse_errors_name_coordinates() {
        let text = "1,2,3,4\n1,abc,3,4\n";
        match read_trace::<f64, _>(text.as_bytes(), &spec(), md()) {
            Err(Error::Parse { row: 2, col: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match read_trace::<f64, _>("1,2,3,4\n1,2\n".as_bytes(), &spec(), md()) {
            Err(Error::RaggedRow { row: 2, expected: 4, found: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let e = read_trace::<f64, _>("".as_bytes(), &spec(), md()).unwrap_err();
        assert_eq!(e.to_string(), "no frames");
    }

    #[test]
    fn bad_delimiter_rejected() {
        let mut s = spec();
        s.delimiter = b'|';
        assert!(read_trace::<f64, _>("1|2".as_bytes(), &s, md()).is_err());
    }

    fn exp_from(rows: &[&[(f64, f64)]]) -> Experiment<f64> {
        let frames = rows
            .iter()
            .map(|r| CsiFrame::new(r.iter().map(|&(a, b)| ComplexSample::new(a, b)).collect(), None).unwrap())
            .collect();
        Experiment::new(frames, md()).unwrap()
    }

    #[test]
    fn strip_removes_all_zero_column() {
        let z = (0.0, 0.0);
        let e = exp_from(&[&[(1.0, 1.0), (2.0, 0.0), z, (4.0, 0.0)], &[(1.0, 0.0), (2.0, 2.0), z, (4.0, 1.0)]]);
        let s = strip_suppressed(&e).unwrap();
        assert_eq!(s.n_sc(), 3);
        assert_eq!(s.removed, vec![2]);
        assert_eq!(s.frames()[1].samples[2], ComplexSample::new(4.0, 1.0));
        // idempotent
        let again = strip_suppressed(&s).unwrap();
        assert_eq!(again.removed, vec![2]);
        assert_eq!(again.frames(), s.frames());
    }

    #[test]
    fn strip_keeps_partially_zero_column() {
        let e = exp_from(&[&[(1.0, 0.0), (0.0, 0.0)], &[(1.0, 0.0), (0.5, 0.0)]]);
        let s = strip_suppressed(&e).unwrap();
        assert_eq!(s.n_sc(), 2);
        assert!(s.removed.is_empty());
    }

    #[test]
    fn strip_all_columns_is_empty_channel() {
        let e = exp_from(&[&[(0.0, 0.0), (0.0, 0.0)]]);
        assert!(matches!(strip_suppressed(&e), Err(Error::EmptyChannel)));
    }

    #[test]
    fn listing_metadata_parses() {
        let m = parse_metadata(LISTING_METADATA).unwrap();
        assert_eq!(m.bandwidth_mhz, 20);
        assert_eq!(m.modulation, Modulation::Ax);
        assert_eq!(m.people.num, 2);
        assert!(!m.people.moving);
        assert_eq!(m.location_id, "U004");
        assert_eq!(m.usleep_us, 10_000);
        assert_eq!(m.avg_duration_s, 600);
        assert_eq!(m.schema_version, crate::model::METADATA_SCHEMA_VERSION);
    }

    #[test]
    fn metadata_missing_field_and_inconsistency() {
        let mut v: serde_json::Value = serde_json::from_str(LISTING_METADATA).unwrap();
        v.as_object_mut().unwrap().remove("bandwidth");
        let e = parse_metadata(&v.to_string()).unwrap_err();
        assert!(matches!(&e, Error::MissingField(f) if f == "bandwidth"));
        assert!(e.to_string().contains("bandwidth"));

        let mut v: serde_json::Value = serde_json::from_str(LISTING_METADATA).unwrap();
        v["people"] = serde_json::json!({"present": false, "num": 3, "moving": false, "names": []});
        assert!(matches!(parse_metadata(&v.to_string()), Err(Error::InvalidMetadata(_))));
    }

    #[test]
    fn metadata_keeps_unknown_fields() {
        let mut v: serde_json::Value = serde_json::from_str(LISTING_METADATA).unwrap();
        v["channel"] = serde_json::json!(157);
        let m = parse_metadata(&v.to_string()).unwrap();
        assert_eq!(m.extra["channel"], 157);
        let back = serde_json::to_value(&m).unwrap();
        assert_eq!(back["channel"], 157);
        assert_eq!(back["locationID"], "U004");
    }

    #[test]
    fn quantized_csv_round_trip() {
        let q = QuantizedMatrix::new(crate::model::Matrix::from_rows(&[[1u32, 2, 3], [1023, 0, 7]]).unwrap(), 10).unwrap();
        let mut buf = Vec::new();
        write_quantized(&mut buf, &q).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# q_amp=10\n1,2,3\n1023,0,7\n");
        assert_eq!(read_quantized(buf.as_slice()).unwrap(), q);
        assert!(matches!(read_quantized("1,2\n".as_bytes()), Err(Error::MissingField(_))));
    }
}

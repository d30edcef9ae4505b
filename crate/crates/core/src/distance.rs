//! Weighted Hamming distance on bit strings and quantized CSIs, average
//! reference-to-frame distances and experiment distance matrices.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{max_level, Matrix, QuantizedMatrix, ReferenceCsi};

/// A string of bits, most significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// `q` bits of `value`, most significant first.
    pub fn from_value(value: u64, q: u32) -> Self {
        Self((0..q).rev().map(|b| (value >> b) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    /// Concatenation of several strings.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> Self {
        Self(parts.into_iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidArgument(format!("bit string has '{c}' at position {i}"))),
            })
            .collect::<Result<_>>()
            .map(Self)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// `Σ |a_i − b_i| · w_i`.
pub fn whd_weighted(a: &BitString, b: &BitString, w: &[u64]) -> Result<u64> {
    same_len(a.len(), b.len())?;
    same_len(a.len(), w.len())?;
    Ok(a.0.iter().zip(&b.0).zip(w).filter(|((x, y), _)| x != y).map(|(_, &w)| w).sum())
}

/// Number of differing positions.
pub fn hamming(a: &BitString, b: &BitString) -> Result<u64> {
    same_len(a.len(), b.len())?;
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count() as u64)
}

/// `Σ_n |x(n) − y(n)|` over amplitude levels; the bit weights are implicit
/// in the base-10 values.
pub fn whd_csi(x: &[u32], y: &[u32]) -> Result<u64> {
    same_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(&a, &b)| a.abs_diff(b) as u64).sum())
}

/// Mean and population standard deviation of a WHD sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhdStats {
    pub mean: f64,
    pub std: f64,
}

fn reference_levels_of<'a>(reference: &'a ReferenceCsi<f64>, exp: &QuantizedMatrix) -> Result<&'a [u32]> {
    let (levels, q_amp) = reference
        .levels()
        .ok_or_else(|| Error::GridMismatch("reference CSI is not quantized".into()))?;
    if q_amp != exp.q_amp {
        return Err(Error::GridMismatch(format!("reference q_amp={q_amp}, experiment q_amp={}", exp.q_amp)));
    }
    same_len(levels.len(), exp.cols())?;
    Ok(levels)
}

/// Per-frame WHD between the reference and every frame, in frame order.
pub fn frame_whds(reference: &ReferenceCsi<f64>, exp: &QuantizedMatrix) -> Result<Vec<u64>> {
    let levels = reference_levels_of(reference, exp)?;
    if exp.rows() == 0 {
        return Err(Error::NoFrames);
    }
    exp.values.row_iter().map(|row| whd_csi(levels, row)).collect()
}

fn stats(values: impl ExactSizeIterator<Item = f64> + Clone) -> WhdStats {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    WhdStats { mean, std: var.sqrt() }
}

/// Mean and population std of the WHD between the reference and each frame.
pub fn avg_whd(reference: &ReferenceCsi<f64>, exp: &QuantizedMatrix) -> Result<WhdStats> {
    let whds = frame_whds(reference, exp)?;
    Ok(stats(whds.iter().map(|&w| w as f64)))
}

/// Divides by the largest possible distance, `n_sc·(2^q_amp − 1)`.
pub fn normalized_avg_whd(mean_whd: f64, n_sc: usize, q_amp: u32) -> f64 {
    mean_whd / (n_sc as f64 * max_level(q_amp) as f64)
}

/// Reference CSI of a quantized experiment: per-sub-carrier mean level,
/// rounded half up (exact integer arithmetic).
pub fn reference_levels(exp: &QuantizedMatrix) -> Result<ReferenceCsi<f64>> {
    let m = exp.rows() as u64;
    if m == 0 {
        return Err(Error::NoFrames);
    }
    let levels = (0..exp.cols())
        .map(|n| {
            let s: u64 = exp.values.column(n).iter().map(|&v| v as u64).sum();
            ((2 * s + m) / (2 * m)) as u32
        })
        .collect();
    Ok(ReferenceCsi::Quantized { levels, q_amp: exp.q_amp })
}

/// A quantized experiment with its display label and scenario tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExperiment {
    pub label: String,
    pub scenario: String,
    pub data: QuantizedMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellKind {
    Internal,
    External,
    CrossSetup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceCell {
    pub kind: CellKind,
    /// Normalized average WHD.
    pub value: f64,
    /// Normalized standard deviation.
    pub std: f64,
    /// Mean WHD in levels, before normalization.
    pub raw_mean: f64,
}

/// Cell `(i, j)`: reference of experiment `i` against the frames of
/// experiment `j`. Not symmetric in general.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub labels: Vec<String>,
    pub scenarios: Vec<String>,
    pub n_sc: usize,
    pub q_amp: u32,
    pub cells: Vec<Vec<DistanceCell>>,
}

/// Builds the normalized average WHD matrix. Cells run in parallel; output
/// order follows the input order.
pub fn distance_matrix(experiments: &[LabeledExperiment]) -> Result<DistanceReport> {
    let first = experiments.first().ok_or(Error::NoFrames)?;
    let (n_sc, q_amp) = (first.data.cols(), first.data.q_amp);
    for e in experiments {
        if e.data.cols() != n_sc || e.data.q_amp != q_amp {
            return Err(Error::GridMismatch(format!(
                "experiment '{}' is {} sub-carriers at q_amp={}, expected {n_sc} at q_amp={q_amp}",
                e.label,
                e.data.cols(),
                e.data.q_amp
            )));
        }
    }
    let refs = experiments.iter().map(|e| reference_levels(&e.data)).collect::<Result<Vec<_>>>()?;
    let n = experiments.len();
    let scale = n_sc as f64 * max_level(q_amp) as f64;
    let flat = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let s = avg_whd(&refs[i], &experiments[j].data)?;
            let kind = if i == j {
                CellKind::Internal
            } else if experiments[i].scenario == experiments[j].scenario {
                CellKind::External
            } else {
                CellKind::CrossSetup
            };
            Ok(DistanceCell { kind, value: s.mean / scale, std: s.std / scale, raw_mean: s.mean })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceReport {
        labels: experiments.iter().map(|e| e.label.clone()).collect(),
        scenarios: experiments.iter().map(|e| e.scenario.clone()).collect(),
        n_sc,
        q_amp,
        cells: flat.chunks(n).map(|c| c.to_vec()).collect(),
    })
}

/// Full-precision value, or the first three decimals as an integer.
pub fn format_value(v: f64, thesis_style: bool) -> String {
    if thesis_style {
        format!("{}", (v * 1000.0).round() as i64)
    } else {
        format!("{v}")
    }
}

impl DistanceReport {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cell(&self, i: usize, j: usize) -> &DistanceCell {
        &self.cells[i][j]
    }

    fn write_matrix<W: Write>(&self, mut out: W, pick: impl Fn(&DistanceCell) -> f64, thesis_style: bool) -> Result<()> {
        let io = |e| Error::io("<distance csv>", e);
        let mut header = String::from("reference");
        for l in &self.labels {
            header.push(',');
            header.push_str(l);
        }
        writeln!(out, "{header}").map_err(io)?;
        for (label, row) in self.labels.iter().zip(&self.cells) {
            let cells: Vec<String> = row.iter().map(|c| format_value(pick(c), thesis_style)).collect();
            writeln!(out, "{label},{}", cells.join(",")).map_err(io)?;
        }
        Ok(())
    }

    /// Normalized averages with a label header row and column.
    pub fn write_csv<W: Write>(&self, out: W, thesis_style: bool) -> Result<()> {
        self.write_matrix(out, |c| c.value, thesis_style)
    }

    /// Normalized standard deviations, same layout as [`Self::write_csv`].
    pub fn write_std_csv<W: Write>(&self, out: W, thesis_style: bool) -> Result<()> {
        self.write_matrix(out, |c| c.std, thesis_style)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Largest `|d(i,j) − d(j,i)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (self.cells[i][j].value - self.cells[j][i].value).abs())
            .fold(0.0, f64::max)
    }

    /// Index of the nearest reference for the frames of experiment `j`.
    pub fn nearest_reference(&self, j: usize) -> usize {
        (0..self.len())
            .min_by(|&a, &b| self.cells[a][j].value.total_cmp(&self.cells[b][j].value))
            .expect("non-empty report")
    }
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// Histogram of per-frame normalized WHDs over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhdDistribution {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Mean of the normalized per-frame values.
    pub mean: f64,
    /// Population standard deviation of the normalized per-frame values.
    pub std: f64,
}

impl WhdDistribution {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<histogram csv>", e);
        writeln!(out, "bin_start,bin_end,count").map_err(io)?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{c}", self.edges[i], self.edges[i + 1]).map_err(io)?;
        }
        Ok(())
    }
}

/// Distribution of `whd(ref, frame) / (n_sc·(2^q_amp − 1))` over the frames
/// of `exp`, in `n_bins` equal bins; 1.0 falls in the last bin.
pub fn whd_distribution(reference: &ReferenceCsi<f64>, exp: &QuantizedMatrix, n_bins: usize) -> Result<WhdDistribution> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
    }
    let whds = frame_whds(reference, exp)?;
    let scale = exp.cols() as f64 * exp.max_level() as f64;
    let values: Vec<f64> = whds.iter().map(|&w| w as f64 / scale).collect();
    let mut counts = vec![0u64; n_bins];
    for &v in &values {
        counts[((v * n_bins as f64) as usize).min(n_bins - 1)] += 1;
    }
    let s = stats(values.iter().copied());
    Ok(WhdDistribution {
        edges: (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect(),
        counts,
        mean: s.mean,
        std: s.std,
    })
}

/// Two amplitude matrices and their elementwise difference `a − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapExport {
    pub a: Matrix<i64>,
    pub b: Matrix<i64>,
    pub diff: Matrix<i64>,
}

pub fn amplitude_heatmap_export(a: &QuantizedMatrix, b: &QuantizedMatrix) -> Result<HeatmapExport> {
    if a.values.shape() != b.values.shape() {
        return Err(Error::GridMismatch(format!("shapes {:?} and {:?} differ", a.values.shape(), b.values.shape())));
    }
    let to_i = |m: &QuantizedMatrix| m.values.map(|v| v as i64);
    let (ai, bi) = (to_i(a), to_i(b));
    let diff = ai.as_slice().iter().zip(bi.as_slice()).map(|(x, y)| x - y).collect();
    Ok(HeatmapExport { diff: Matrix::from_vec(a.rows(), a.cols(), diff)?, a: ai, b: bi })
}

/// Writes an integer matrix as CSV, one frame per row.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &Matrix<i64>) -> Result<()> {
    let io = |e| Error::io("<matrix csv>", e);
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    Ok(())
}

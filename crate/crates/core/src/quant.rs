//! Tail truncation, quantized-Gaussian PMFs and the shared amplitude /
//! increment grids.
//!
//! Increments are quantized on `2^q_inc − 1` symmetric levels
//! `−K..=K` with `K = 2^(q_inc−1) − 1`; amplitudes on `0..=2^q_amp − 1`.
//! The PMF splits `[−δ*, +δ*]` into `2^q_inc − 1` equal bins and folds the
//! mass beyond `±δ*` into the two outermost bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::GaussianFit;
use crate::model::{max_level, AmplitudeMatrix, Matrix, QuantizedMatrix, ReferenceCsi, Stage};
use crate::scalar::Real;

/// Largest increment level for `q_inc` bits, `2^(q_inc−1) − 1`.
#[inline]
pub fn half_levels(q_inc: u32) -> u32 {
    (1u32 << (q_inc - 1)) - 1
}

fn check_q_inc(q_inc: u32) -> Result<()> {
    if !(3..=5).contains(&q_inc) {
        return Err(Error::InvalidArgument(format!("q_inc must be 3, 4 or 5, got {q_inc}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Two-sided tail mass of `N(0, σ)` beyond `±δ*`: `erfc(δ* / (σ√2))`.
pub fn gaussian_tail_weight<T: Real>(delta_star: T, sigma: T) -> Result<T> {
    check_positive("delta_star", delta_star.as_f64())?;
    check_positive("sigma", sigma.as_f64())?;
    Ok((delta_star / (sigma * T::SQRT_2())).complementary_erf())
}

/// How δ* is chosen from σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// Smallest integer multiple of σ whose tail weight is below `10 / N_SC`.
    #[default]
    TailBudget,
    /// Always `3σ`.
    FixedThreeSigma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSelection<T> {
    pub delta_star: T,
    /// Integer multiple of σ.
    pub multiple: u32,
    pub tail_weight: T,
    /// Tail weight lies strictly inside `(1/N_SC, 10/N_SC)`.
    pub in_band: bool,
}

/// Smallest `n ≥ 1` with `P_w(nσ) < 10 / n_sc`; `δ* = nσ`.
pub fn select_delta_star<T: Real>(sigma: T, n_sc: usize) -> Result<DeltaSelection<T>> {
    check_positive("sigma", sigma.as_f64())?;
    if n_sc < 2 {
        return Err(Error::InvalidArgument(format!("n_sc must be >= 2, got {n_sc}")));
    }
    let upper = 10.0 / n_sc as f64;
    // erfc(n/√2) underflows to 0 near n = 38, so the loop always ends
    let multiple = (1u32..)
        .find(|&n| libm::erfc(n as f64 / std::f64::consts::SQRT_2) < upper)
        .expect("tail weight reaches zero");
    Ok(selection(sigma, multiple, n_sc))
}

fn selection<T: Real>(sigma: T, multiple: u32, n_sc: usize) -> DeltaSelection<T> {
    let pw = libm::erfc(multiple as f64 / std::f64::consts::SQRT_2);
    let n = n_sc.max(1) as f64;
    DeltaSelection {
        delta_star: sigma * T::of(multiple as f64),
        multiple,
        tail_weight: T::of(pw),
        in_band: pw > 1.0 / n && pw < 10.0 / n,
    }
}

/// Applies `rule`.
pub fn choose_delta_star<T: Real>(sigma: T, n_sc: usize, rule: DeltaRule) -> Result<DeltaSelection<T>> {
    match rule {
        DeltaRule::TailBudget => select_delta_star(sigma, n_sc),
        DeltaRule::FixedThreeSigma => {
            check_positive("sigma", sigma.as_f64())?;
            Ok(selection(sigma, 3, n_sc))
        }
    }
}

/// Probability mass over increment levels `−K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T> {
    half: u32,
    probs: Vec<T>,
}

impl<T: Real> Pmf<T> {
    /// `probs[i]` is the mass of level `i − K`. Rejects negative entries and
    /// sums that differ from 1 by more than 1e-9.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() % 2 == 0 {
            return Err(Error::InvalidArgument(format!("PMF support must be odd, got {}", probs.len())));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.as_f64() >= 0.0)) {
            return Err(Error::OutOfRange { index: i, value: p.as_f64(), range: "[0, 1]".into() });
        }
        let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("PMF sums to {total}")));
        }
        Ok(Self { half: (probs.len() / 2) as u32, probs })
    }

    /// Point mass at one level.
    pub fn point(half: u32, level: i32) -> Result<Self> {
        let mut probs = vec![T::zero(); 2 * half as usize + 1];
        let idx = level + half as i32;
        if idx < 0 || idx as usize >= probs.len() {
            return Err(Error::OutOfRange { index: 0, value: level as f64, range: format!("[-{half}, {half}]") });
        }
        probs[idx as usize] = T::one();
        Ok(Self { half, probs })
    }

    pub fn half(&self) -> u32 {
        self.half
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, level: i32) -> T {
        let idx = level + self.half as i32;
        if idx < 0 || idx as usize >= self.probs.len() {
            T::zero()
        } else {
            self.probs[idx as usize]
        }
    }

    /// `(level, probability)` pairs in ascending level order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, T)> + '_ {
        let h = self.half as i32;
        self.probs.iter().enumerate().map(move |(i, &p)| (i as i32 - h, p))
    }

    pub fn total(&self) -> T {
        crate::scalar::pairwise_sum(&self.probs)
    }

    /// Mass of the two outermost levels.
    pub fn boundary_mass(&self) -> T {
        self.probs[0] + self.probs[self.probs.len() - 1]
    }

    pub fn mean(&self) -> T {
        self.iter().fold(T::zero(), |acc, (v, p)| acc + T::of(v as f64) * p)
    }

    pub fn variance(&self) -> T {
        let mu = self.mean();
        self.iter().fold(T::zero(), |acc, (v, p)| acc + (T::of(v as f64) - mu).powi(2) * p)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let n = self.probs.len();
        (0..n / 2).all(|i| (self.probs[i] - self.probs[n - 1 - i]).abs() <= tol)
    }
}

/// Quantized `N(0, σ)` on `2^q_inc − 1` equal bins over `[−δ*, +δ*]`, with
/// the tails beyond `±δ*` accumulated on the outermost bins. One side is
/// computed and mirrored, so the result is exactly symmetric.
pub fn quantized_gaussian_pmf<T: Real>(sigma: T, q_inc: u32, delta_star: T) -> Result<Pmf<T>> {
    check_q_inc(q_inc)?;
    gaussian_bins(sigma.as_f64(), half_levels(q_inc), delta_star.as_f64())
}

/// Bins of width `2δ*/(2K+1)` centred on each level, computed in f64.
pub(crate) fn gaussian_bins<T: Real>(sigma: f64, half: u32, delta_star: f64) -> Result<Pmf<T>> {
    use libm::{erf, erfc};
    check_positive("sigma", sigma)?;
    check_positive("delta_star", delta_star)?;
    let levels = 2 * half as usize + 1;
    let width = 2.0 * delta_star / levels as f64;
    let z = |x: f64| x / (sigma * std::f64::consts::SQRT_2);
    // upper tail beyond each positive bin's lower edge
    let tail = |v: u32| 0.5 * erfc(z((v as f64 - 0.5) * width));
    let mut side = Vec::with_capacity(half as usize);
    for v in 1..=half {
        side.push(if v == half { tail(v) } else { tail(v) - tail(v + 1) });
    }
    let centre = erf(z(0.5 * width));
    let mut probs = Vec::with_capacity(levels);
    probs.extend(side.iter().rev().map(|&p| T::of(p)));
    probs.push(T::of(centre));
    probs.extend(side.iter().map(|&p| T::of(p)));
    Ok(Pmf { half, probs })
}

/// Amplitude bits so the increment grid fits the amplitude grid:
/// `⌈log2((2^q_inc + 1) / δ*)⌉`, evaluated as the smallest `q` with
/// `2^q ≥ (2^q_inc + 1) / δ*`.
pub fn q_amp_from<T: Real>(q_inc: u32, delta_star: T) -> Result<u32> {
    check_q_inc(q_inc)?;
    let d = delta_star.as_f64();
    check_positive("delta_star", d)?;
    if d > 1.0 {
        return Err(Error::OutOfRange { index: 0, value: d, range: "(0, 1]".into() });
    }
    let ratio = ((1u64 << q_inc) + 1) as f64 / d;
    let q = (0u32..=62).find(|&q| (1u64 << q) as f64 >= ratio).expect("ratio is bounded");
    if q > 31 {
        return Err(Error::InvalidArgument(format!("delta_star {d} needs {q} amplitude bits (max 31)")));
    }
    Ok(q)
}

/// Amplitude sampling step `Δ = 1 / (2^q_amp − 1)`.
pub fn amplitude_step<T: Real>(q_amp: u32) -> T {
    T::one() / T::of(max_level(q_amp) as f64)
}

/// Number of amplitude steps in the tuned δ*: `⌈δ* / Δ⌉`, at least 1.
/// Values within 1e-9 steps of a boundary snap onto it.
pub fn delta_star_steps<T: Real>(delta_star: T, q_amp: u32) -> u64 {
    let x = delta_star.as_f64() * max_level(q_amp) as f64;
    ((x - 1e-9).ceil() as u64).max(1)
}

/// Smallest multiple of `Δ` that is `≥ δ*`.
pub fn tune_delta_star<T: Real>(delta_star: T, q_amp: u32) -> T {
    T::of(delta_star_steps(delta_star, q_amp) as f64) / T::of(max_level(q_amp) as f64)
}

fn quantize_unit<T: Real>(v: T, top: T) -> u32 {
    (v * top).round_half_away().to_u32().expect("level fits u32")
}

/// `round(value · (2^q_amp − 1))`, half away from zero.
pub fn quantize_amplitudes<T: Real>(m: &AmplitudeMatrix<T>, q_amp: u32) -> Result<QuantizedMatrix> {
    m.expect_stage(Stage::UnitNormalized, "quantize_amplitudes")?;
    let top = T::of(max_level(q_amp) as f64);
    let mut levels = Vec::with_capacity(m.rows() * m.cols());
    for (i, &v) in m.values.as_slice().iter().enumerate() {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::OutOfRange { index: i, value: v.as_f64(), range: "[0, 1]".into() });
        }
        levels.push(quantize_unit(v, top));
    }
    QuantizedMatrix::new(Matrix::from_vec(m.rows(), m.cols(), levels)?, q_amp)
}

/// Quantizes a unit-scale reference CSI onto the amplitude grid.
pub fn quantize_reference<T: Real>(r: &ReferenceCsi<T>, q_amp: u32) -> Result<ReferenceCsi<T>> {
    match r {
        ReferenceCsi::Quantized { .. } => Err(Error::InvalidArgument("reference is already quantized".into())),
        ReferenceCsi::Unit(values) => {
            let top = T::of(max_level(q_amp) as f64);
            let levels = values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v >= T::zero() && v <= T::one() {
                        Ok(quantize_unit(v, top))
                    } else {
                        Err(Error::OutOfRange { index: i, value: v.as_f64(), range: "[0, 1]".into() })
                    }
                })
                .collect::<Result<_>>()?;
            Ok(ReferenceCsi::Quantized { levels, q_amp })
        }
    }
}

/// `level / (2^q_amp − 1)`.
pub fn dequantize_amplitudes<T: Real>(q: &QuantizedMatrix) -> Result<AmplitudeMatrix<T>> {
    let top = q.max_level();
    if let Some((i, &v)) = q.values.as_slice().iter().enumerate().find(|(_, &v)| v > top) {
        return Err(Error::OutOfRange { index: i, value: v as f64, range: format!("[0, {top}]") });
    }
    let scale = T::of(top as f64);
    Ok(AmplitudeMatrix { values: q.values.map(|v| T::of(v as f64) / scale), stage: Stage::UnitNormalized })
}

/// δ*-anchored increment quantizer: clamp to `[−δ*, +δ*]`, then map linearly
/// so `±δ*` lands on `±K`, rounding half away from zero.
pub fn quantize_increments<T: Real>(values: &[T], q_inc: u32, delta_star: T) -> Result<Vec<i32>> {
    check_q_inc(q_inc)?;
    check_positive("delta_star", delta_star.as_f64())?;
    let k = T::of(half_levels(q_inc) as f64);
    Ok(values
        .iter()
        .map(|&d| {
            let c = d.max(-delta_star).min(delta_star);
            (c / delta_star * k).round_half_away().to_i32().expect("level fits i32")
        })
        .collect())
}

/// Min/max-anchored increment quantizer: the sample minimum maps to `−K`
/// and the maximum to `+K`, `round((s − min)/(max − min) · 2K − K)`. Values
/// should already be clamped to `±δ*`.
pub fn quantize_increments_minmax<T: Real>(values: &[T], q_inc: u32) -> Result<Vec<i32>> {
    check_q_inc(q_inc)?;
    let (lo, hi) = values.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::DegenerateRange(lo.as_f64()));
    }
    let k = half_levels(q_inc) as f64;
    Ok(values
        .iter()
        .map(|&s| {
            let u = ((s - lo) / (hi - lo)).as_f64();
            (u * 2.0 * k - k).round() as i32
        })
        .collect())
}

/// Sample-frequency PMF over `−K..=K`; levels outside the support are
/// rejected.
pub fn empirical_pmf<T: Real>(levels: &[i32], q_inc: u32) -> Result<Pmf<T>> {
    check_q_inc(q_inc)?;
    if levels.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let half = half_levels(q_inc) as i32;
    let mut counts = vec![0u64; 2 * half as usize + 1];
    for (i, &v) in levels.iter().enumerate() {
        if v.abs() > half {
            return Err(Error::OutOfRange { index: i, value: v as f64, range: format!("[-{half}, {half}]") });
        }
        counts[(v + half) as usize] += 1;
    }
    let n = T::of_usize(levels.len());
    Ok(Pmf { half: half as u32, probs: counts.iter().map(|&c| T::of(c as f64) / n).collect() })
}

/// One row of an empirical-vs-model increment histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramRow {
    pub level: i32,
    pub empirical: f64,
    pub model: f64,
}

/// Quantizes `samples` with the δ*-anchored rule and pairs the resulting
/// frequencies with the Gaussian PMF on the same grid.
pub fn increment_histogram<T: Real>(samples: &[T], sigma: T, q_inc: u32, delta_star: T) -> Result<Vec<HistogramRow>> {
    let levels = quantize_increments(samples, q_inc, delta_star)?;
    let emp: Pmf<f64> = empirical_pmf(&levels, q_inc)?;
    let model: Pmf<f64> = quantized_gaussian_pmf(sigma.as_f64(), q_inc, delta_star.as_f64())?;
    Ok(emp.iter().zip(model.iter()).map(|((level, e), (_, m))| HistogramRow { level, empirical: e, model: m }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfSource {
    Gaussian,
    Empirical,
    /// Gaussian binned directly on amplitude levels (bin width one level).
    LevelGaussian,
}

/// Fitted increment process: σ, δ*, grid widths and the level PMF.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementModel<T> {
    pub mu: T,
    pub sigma: T,
    /// δ* before grid tuning.
    pub delta_star_raw: T,
    /// δ* after tuning to a multiple of the amplitude step.
    pub delta_star: T,
    pub q_inc: u32,
    pub q_amp: u32,
    pub source: PmfSource,
    pub pmf: Pmf<T>,
}

impl<T: Real> IncrementModel<T> {
    /// Fit → δ* → `q_amp` → tuned δ* → Gaussian PMF.
    pub fn gaussian(fit: &GaussianFit<T>, q_inc: u32, n_sc: usize, rule: DeltaRule) -> Result<Self> {
        check_q_inc(q_inc)?;
        if fit.is_degenerate() {
            return Err(Error::DegenerateRange(fit.mu.as_f64()));
        }
        let sel = choose_delta_star(fit.sigma, n_sc, rule)?;
        let q_amp = q_amp_from(q_inc, sel.delta_star)?;
        let tuned = tune_delta_star(sel.delta_star, q_amp);
        let pmf = quantized_gaussian_pmf(fit.sigma, q_inc, tuned)?;
        Ok(Self { mu: fit.mu, sigma: fit.sigma, delta_star_raw: sel.delta_star, delta_star: tuned, q_inc, q_amp, source: PmfSource::Gaussian, pmf })
    }

    /// Same grid as `base`, with probabilities taken from quantized sample
    /// increments instead of the Gaussian.
    pub fn empirical(base: &Self, samples: &[T]) -> Result<Self> {
        let levels = quantize_increments(samples, base.q_inc, base.delta_star)?;
        Ok(Self { pmf: empirical_pmf(&levels, base.q_inc)?, source: PmfSource::Empirical, ..base.clone() })
    }

    /// Gaussian with σ given in amplitude levels, binned one level per bin so
    /// that an increment level adds exactly one amplitude level.
    pub fn level_gaussian(sigma_levels: T, q_inc: u32, q_amp: u32) -> Result<Self> {
        check_q_inc(q_inc)?;
        let half = half_levels(q_inc);
        let pmf = gaussian_bins(sigma_levels.as_f64(), half, half as f64 + 0.5)?;
        let step: T = amplitude_step(q_amp);
        let delta = T::of(half as f64 + 0.5) * step;
        Ok(Self { mu: T::zero(), sigma: sigma_levels * step, delta_star_raw: delta, delta_star: delta, q_inc, q_amp, source: PmfSource::LevelGaussian, pmf })
    }

    /// Arbitrary PMF on a given grid (used for degenerate and drift models).
    pub fn with_pmf(pmf: Pmf<T>, q_inc: u32, q_amp: u32) -> Result<Self> {
        check_q_inc(q_inc)?;
        if pmf.half() != half_levels(q_inc) {
            return Err(Error::GridMismatch(format!("PMF has {} levels, q_inc={q_inc} needs {}", pmf.len(), 2 * half_levels(q_inc) + 1)));
        }
        let step: T = amplitude_step(q_amp);
        Ok(Self { mu: pmf.mean() * step, sigma: pmf.variance().sqrt() * step, delta_star_raw: step, delta_star: step, q_inc, q_amp, source: PmfSource::Empirical, pmf })
    }

    pub fn validate(&self) -> Result<()> {
        check_q_inc(self.q_inc)?;
        if self.pmf.half() != half_levels(self.q_inc) {
            return Err(Error::GridMismatch("PMF support does not match q_inc".into()));
        }
        check_positive("delta_star", self.delta_star.as_f64())?;
        if (self.pmf.total().as_f64() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("PMF does not sum to 1".into()));
        }
        if self.source == PmfSource::Gaussian && !self.pmf.is_symmetric(T::of(1e-12)) {
            return Err(Error::InvalidArgument("Gaussian PMF is not symmetric".into()));
        }
        Ok(())
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            mu: self.mu.as_f64(),
            sigma: self.sigma.as_f64(),
            delta_star_raw: self.delta_star_raw.as_f64(),
            delta_star: self.delta_star.as_f64(),
            q_inc: self.q_inc,
            q_amp: self.q_amp,
            source: self.source,
            pmf: self.pmf.iter().map(|(level, p)| PmfEntry { level, p: p.as_f64() }).collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let half = half_levels(doc.q_inc.clamp(3, 5)) as i32;
        let mut probs = vec![T::zero(); 2 * half as usize + 1];
        for e in &doc.pmf {
            if e.level.abs() > half {
                return Err(Error::GridMismatch(format!("level {} outside ±{half}", e.level)));
            }
            probs[(e.level + half) as usize] = T::of(e.p);
        }
        let m = Self {
            mu: T::of(doc.mu),
            sigma: T::of(doc.sigma),
            delta_star_raw: T::of(doc.delta_star_raw),
            delta_star: T::of(doc.delta_star),
            q_inc: doc.q_inc,
            q_amp: doc.q_amp,
            source: doc.source,
            pmf: Pmf::new(probs)?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// JSON exchange form of an [`IncrementModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub mu: f64,
    pub sigma: f64,
    pub delta_star_raw: f64,
    pub delta_star: f64,
    pub q_inc: u32,
    pub q_amp: u32,
    pub source: PmfSource,
    pub pmf: Vec<PmfEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfEntry {
    pub level: i32,
    pub p: f64,
}

//! Synthetic quantized experiments from the increment random walk.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Each increment is drawn by
//! inverse-CDF lookup on `u = (next_u64 >> 11) · 2^-53`, so a seed fixes the
//! output on every platform.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::distance::LabeledExperiment;
use crate::error::{Error, Result};
use crate::ingest::{expected_subcarriers, write_trace, TraceFileSpec};
use crate::model::{
    max_level, ComplexSample, CsiFrame, Experiment, ExperimentMetadata, Matrix, Modulation, People, QuantizedMatrix,
    ReferenceCsi,
};
use crate::quant::IncrementModel;

/// A generated experiment and the number of steps that hit a grid edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedExperiment {
    pub data: QuantizedMatrix,
    pub clamp_events: u64,
}

/// Inverse-CDF sampler over the model's increment levels.
struct LevelSampler {
    cdf: Vec<f64>,
    half: i64,
}

impl LevelSampler {
    fn new(model: &IncrementModel<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = model
            .pmf
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf, half: model.pmf.half() as i64 }
    }

    fn draw(&self, rng: &mut Xoshiro256PlusPlus) -> i64 {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        idx as i64 - self.half
    }
}

/// Random walk from the reference: frame 1 is the reference, each later
/// frame adds i.i.d. PMF increments per sub-carrier, saturating at
/// `[0, 2^q_amp − 1]`.
pub fn generate_experiment(
    reference: &ReferenceCsi<f64>,
    model: &IncrementModel<f64>,
    m_frames: usize,
    seed: u64,
) -> Result<SynthesizedExperiment> {
    let (levels, q_amp) = reference
        .levels()
        .ok_or_else(|| Error::GridMismatch("reference CSI must be quantized".into()))?;
    if q_amp != model.q_amp {
        return Err(Error::GridMismatch(format!("reference q_amp={q_amp}, model q_amp={}", model.q_amp)));
    }
    if m_frames == 0 {
        return Err(Error::InsufficientFrames { needed: 1, got: 0 });
    }
    let top = max_level(q_amp) as i64;
    if let Some((i, &v)) = levels.iter().enumerate().find(|(_, &v)| v as i64 > top) {
        return Err(Error::OutOfRange { index: i, value: v as f64, range: format!("[0, {top}]") });
    }
    let sampler = LevelSampler::new(model);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = levels.len();
    let mut data = Vec::with_capacity(m_frames * n);
    data.extend_from_slice(levels);
    let mut clamp_events = 0;
    for k in 1..m_frames {
        for j in 0..n {
            let next = data[(k - 1) * n + j] as i64 + sampler.draw(&mut rng);
            if !(0..=top).contains(&next) {
                clamp_events += 1;
            }
            data.push(next.clamp(0, top) as u32);
        }
    }
    Ok(SynthesizedExperiment { data: QuantizedMatrix::new(Matrix::from_vec(m_frames, n, data)?, q_amp)?, clamp_events })
}

/// Parameters of a multi-scenario synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub n_sc: usize,
    pub q_amp: u32,
    pub q_inc: u32,
    pub m_frames: usize,
    /// Level offset between consecutive scenario references.
    pub separation: u32,
    /// Increment spread in amplitude levels, one entry per scenario.
    pub sigma_levels: Vec<f64>,
    /// Experiments generated per scenario, each with its own seed.
    pub experiments_per_scenario: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_sc: 256,
            q_amp: 10,
            q_inc: 4,
            m_frames: 2000,
            separation: 100,
            sigma_levels: vec![1.0, 3.0, 8.0],
            experiments_per_scenario: 1,
            seed: 1,
        }
    }
}

/// One member of a synthetic suite.
#[derive(Debug, Clone)]
pub struct SuiteExperiment {
    pub labeled: LabeledExperiment,
    pub reference: ReferenceCsi<f64>,
    pub model: IncrementModel<f64>,
    pub metadata: ExperimentMetadata,
    pub clamp_events: u64,
    pub seed: u64,
}

/// Bandwidth/standard pair whose sub-carrier count is `n_sc`, if any.
fn channel_for(n_sc: usize) -> (u32, Modulation) {
    [(20, Modulation::Ac), (40, Modulation::Ac), (80, Modulation::Ac), (40, Modulation::Ax), (80, Modulation::Ax), (160, Modulation::Ax)]
        .into_iter()
        .find(|&(bw, m)| expected_subcarriers(bw, m).ok() == Some(n_sc))
        .unwrap_or((20, Modulation::Ac))
}

/// Reference of scenario `i`: a smooth profile across sub-carriers, shifted
/// by `i·separation` and centred on the grid.
fn scenario_reference(cfg: &SuiteConfig, i: usize, n_scenarios: usize) -> Result<Vec<u32>> {
    let top = max_level(cfg.q_amp) as f64;
    let span = cfg.separation as f64 * (n_scenarios - 1) as f64;
    let ripple = (top * 0.06).round();
    let base = (top - span) / 2.0;
    if base - ripple < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{n_scenarios} scenarios {} levels apart do not fit a {}-bit grid",
            cfg.separation, cfg.q_amp
        )));
    }
    Ok((0..cfg.n_sc)
        .map(|n| {
            let phase = 2.0 * std::f64::consts::PI * n as f64 / cfg.n_sc as f64;
            (base + ripple * phase.sin() + (i as u32 * cfg.separation) as f64).round() as u32
        })
        .collect())
}

fn scenario_people(i: usize) -> People {
    match i % 3 {
        0 => People { present: false, num: 0, moving: false, names: vec![] },
        1 => People { present: true, num: 1, moving: true, names: vec![] },
        _ => People { present: true, num: 2, moving: true, names: vec![] },
    }
}

/// Builds `sigma_levels.len()` scenarios with references `separation`
/// levels apart, each expanded by [`generate_experiment`] with its own
/// level-step Gaussian model. Experiments are generated in parallel with
/// seeds `seed + index`.
pub fn make_scenario_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteExperiment>> {
    if cfg.separation == 0 {
        return Err(Error::InvalidArgument("separation must be > 0".into()));
    }
    if cfg.sigma_levels.is_empty() || cfg.experiments_per_scenario == 0 {
        return Err(Error::InvalidArgument("suite needs at least one scenario and one experiment".into()));
    }
    let n_scen = cfg.sigma_levels.len();
    let (bw, modulation) = channel_for(cfg.n_sc);
    let jobs: Vec<(usize, usize)> =
        (0..n_scen).flat_map(|s| (0..cfg.experiments_per_scenario).map(move |e| (s, e))).collect();
    jobs.into_par_iter()
        .enumerate()
        .map(|(idx, (s, e))| {
            let levels = scenario_reference(cfg, s, n_scen)?;
            let reference = ReferenceCsi::Quantized { levels, q_amp: cfg.q_amp };
            let model = IncrementModel::level_gaussian(cfg.sigma_levels[s], cfg.q_inc, cfg.q_amp)?;
            let seed = cfg.seed.wrapping_add(idx as u64);
            let out = generate_experiment(&reference, &model, cfg.m_frames, seed)?;
            let scenario = format!("scenario-{}", s + 1);
            let label = if cfg.experiments_per_scenario == 1 { format!("S{}", s + 1) } else { format!("S{}.{}", s + 1, e + 1) };
            let mut metadata = ExperimentMetadata::synthetic(&label, bw, modulation, scenario_people(s));
            metadata.notes = format!("synthetic random walk, sigma {} levels", cfg.sigma_levels[s]);
            metadata.extra.insert("scenarioLabel".into(), scenario.clone().into());
            metadata.extra.insert("seed".into(), seed.into());
            Ok(SuiteExperiment {
                labeled: LabeledExperiment { label, scenario, data: out.data },
                reference,
                model,
                metadata,
                clamp_events: out.clamp_events,
                seed,
            })
        })
        .collect()
}

/// Wraps quantized levels as a complex trace (`re = level`, `im = 0`) so it
/// can go through the normal trace writer and reader.
pub fn to_experiment(q: &QuantizedMatrix, metadata: ExperimentMetadata) -> Result<Experiment<f64>> {
    let frames = q
        .values
        .row_iter()
        .map(|row| CsiFrame::new(row.iter().map(|&v| ComplexSample::new(v as f64, 0.0)).collect(), None))
        .collect::<Result<Vec<_>>>()?;
    Experiment::new(frames, metadata)
}

/// Writes a synthetic experiment in the trace CSV format.
pub fn write_synthetic_trace<W: Write>(
    out: W,
    q: &QuantizedMatrix,
    metadata: &ExperimentMetadata,
    spec: &TraceFileSpec,
) -> Result<()> {
    write_trace(out, &to_experiment(q, metadata.clone())?, spec)
}

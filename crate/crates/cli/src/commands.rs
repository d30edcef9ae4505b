//! Subcommand bodies. Each reads its inputs, calls into `csistat` and writes
//! CSV data files plus a JSON sidecar. JSON records input file names only, so
//! outputs do not depend on where the inputs live.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use csistat::distance::{amplitude_heatmap_export, whd_distribution, write_matrix_csv};
use csistat::increments::{autocorrelation, sigma_paper_multi_step, sigma_paper_one_step};
use csistat::infotheory::{external_mi, internal_mi, MiReport};
use csistat::ingest::{load_metadata, load_quantized, load_trace, write_quantized, ComplexLayout, TraceFileSpec};
use csistat::quant::{choose_delta_star, delta_star_steps, increment_histogram, DeltaRule, IncrementModel};
use csistat::synth::{make_scenario_suite, write_synthetic_trace, SuiteConfig};
use csistat::{
    distance_matrix, energy_normalize, fit_gaussian, increments, quantize_amplitudes, reference_levels,
    strip_suppressed, unit_normalize, Error, ExperimentMetadata, LabeledExperiment, QuantizedMatrix, Result,
};

use crate::{
    AutocorrArgs, Cli, Command, DistanceArgs, GlobalOpts, HeatmapArgs, HistArgs, Layout, MiArgs, PipelineArgs,
    SynthArgs, OUT_ENV,
};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Pipeline(a) => pipeline(g, a),
        Command::Distance(a) => distance(g, a),
        Command::Hist(a) => hist(g, a),
        Command::Autocorr(a) => autocorr(g, a),
        Command::Heatmap(a) => heatmap(g, a),
        Command::Mi(a) => mi(g, a),
        Command::Synth(a) => synth(g, a),
    }
}

fn out_dir(g: &GlobalOpts) -> Result<PathBuf> {
    let dir = match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => g.out.clone(),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(dir, name, text.as_bytes())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// File stem without the `.quantized` / `.csv` suffixes.
fn label_of(p: &Path) -> String {
    let name = file_name(p);
    let name = name.strip_suffix(".csv").unwrap_or(&name);
    name.strip_suffix(".quantized").unwrap_or(name).to_string()
}

/// Metadata stored next to a quantized or trace file as `<label>.json`.
fn sibling_metadata(p: &Path) -> Option<PathBuf> {
    let candidate = p.with_file_name(format!("{}.json", label_of(p)));
    candidate.is_file().then_some(candidate)
}

fn trace_spec(g: &GlobalOpts, path: &Path) -> TraceFileSpec {
    TraceFileSpec {
        complex_layout: match g.layout {
            Layout::Interleaved => ComplexLayout::InterleavedReIm,
            Layout::Paired => ComplexLayout::PairedColumns,
        },
        header: g.header,
        ..TraceFileSpec::new(path)
    }
}

fn delta_rule(g: &GlobalOpts) -> DeltaRule {
    if g.fixed_3_sigma {
        DeltaRule::FixedThreeSigma
    } else {
        DeltaRule::TailBudget
    }
}

fn load_q(path: &Path) -> Result<QuantizedMatrix> {
    load_quantized(path).map_err(|e| e.at("ingest"))
}

fn csv_lines<I: IntoIterator<Item = String>>(header: &str, rows: I) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

// ------------------------------------------------------------------ pipeline

#[derive(Serialize)]
struct PipelineReport {
    trace: String,
    metadata: String,
    experiment: String,
    scenario: String,
    frames: usize,
    subcarriers_in_file: usize,
    subcarriers: usize,
    removed_subcarriers: Vec<usize>,
    warnings: Vec<String>,
    /// Mean raw amplitude of each frame, the divisor of energy normalization.
    frame_energy: Vec<f64>,
    a_min: f64,
    a_max: f64,
    increment_mu: f64,
    sigma_mle: f64,
    sigma_one_step: f64,
    sigma_multi_step: f64,
    delta_rule: DeltaRule,
    delta_multiple: u32,
    tail_weight: f64,
    tail_in_band: bool,
    delta_star_raw: f64,
    delta_star: f64,
    delta_star_steps: u64,
    q_inc: u32,
    q_amp: u32,
    outputs: Vec<String>,
}

fn pipeline(g: &GlobalOpts, a: &PipelineArgs) -> Result<()> {
    let metadata = load_metadata(&a.metadata).map_err(|e| e.at("metadata"))?;
    let spec = trace_spec(g, &a.trace);
    let (exp, warnings) = load_trace::<f64>(&spec, metadata.clone()).map_err(|e| e.at("ingest"))?;
    let in_file = exp.n_sc();
    let exp = strip_suppressed(&exp).map_err(|e| e.at("strip_suppressed"))?;
    let raw = exp.amplitudes().map_err(|e| e.at("amplitude"))?;
    let frame_energy: Vec<f64> =
        raw.values.row_iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let energy = energy_normalize(&raw).map_err(|e| e.at("energy_normalize"))?;
    let (unit, scale) = unit_normalize(&energy).map_err(|e| e.at("unit_normalize"))?;
    let d = increments(&unit, 1).map_err(|e| e.at("increments"))?;
    let fit = fit_gaussian(d.as_slice()).map_err(|e| e.at("fit"))?;
    let sigma_one_step = sigma_paper_one_step(&d).map_err(|e| e.at("fit"))?;
    let sigma_multi_step = sigma_paper_multi_step(&unit).map_err(|e| e.at("fit"))?;
    let rule = delta_rule(g);
    let n_sc = unit.cols();
    let selection = choose_delta_star(fit.sigma, n_sc, rule).map_err(|e| e.at("select_delta_star"))?;
    let model = IncrementModel::gaussian(&fit, g.q_inc, n_sc, rule).map_err(|e| e.at("quantize"))?;
    let quantized = quantize_amplitudes(&unit, model.q_amp).map_err(|e| e.at("quantize"))?;

    let dir = out_dir(g)?;
    let stem = label_of(&a.trace);
    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    write_quantized(&mut buf, &quantized)?;
    let name = format!("{stem}.quantized.csv");
    write_bytes(&dir, &name, &buf)?;
    outputs.push(name);
    let name = format!("{stem}.model.json");
    write_bytes(&dir, &name, format!("{}\n", model.to_json()?).as_bytes())?;
    outputs.push(name);

    // increment histograms for every q_inc, on each setting's own grid
    for q in 3..=5 {
        let m = IncrementModel::gaussian(&fit, q, n_sc, rule).map_err(|e| e.at("histogram"))?;
        let rows = increment_histogram(d.as_slice(), fit.sigma, q, m.delta_star).map_err(|e| e.at("histogram"))?;
        let name = format!("{stem}.hist_q{q}.csv");
        let body = csv_lines("level,empirical,model", rows.iter().map(|r| format!("{},{},{}", r.level, r.empirical, r.model)));
        write_bytes(&dir, &name, &body)?;
        outputs.push(name);
    }

    let report = PipelineReport {
        trace: file_name(&a.trace),
        metadata: file_name(&a.metadata),
        experiment: metadata.experiment.clone(),
        scenario: metadata.scenario().to_string(),
        frames: unit.rows(),
        subcarriers_in_file: in_file,
        subcarriers: n_sc,
        removed_subcarriers: exp.removed.clone(),
        warnings: warnings.iter().map(|w| w.to_string()).collect(),
        frame_energy,
        a_min: scale.a_min,
        a_max: scale.a_max,
        increment_mu: fit.mu,
        sigma_mle: fit.sigma,
        sigma_one_step,
        sigma_multi_step,
        delta_rule: rule,
        delta_multiple: selection.multiple,
        tail_weight: selection.tail_weight,
        tail_in_band: selection.in_band,
        delta_star_raw: model.delta_star_raw,
        delta_star: model.delta_star,
        delta_star_steps: delta_star_steps(model.delta_star, model.q_amp),
        q_inc: model.q_inc,
        q_amp: model.q_amp,
        outputs,
    };
    write_json(&dir, &format!("{stem}.report.json"), &report)
}

// ------------------------------------------------------------------ distance

fn scenario_of(path: &Path, label: &str) -> Result<String> {
    let Some(meta) = sibling_metadata(path) else {
        return Ok(label.to_string());
    };
    let m: ExperimentMetadata = load_metadata(&meta).map_err(|e| e.at("metadata"))?;
    Ok(match m.extra.get("scenarioLabel").and_then(|v| v.as_str()) {
        Some(s) => s.to_string(),
        None => m.scenario().to_string(),
    })
}

fn distance(g: &GlobalOpts, a: &DistanceArgs) -> Result<()> {
    let experiments = a
        .inputs
        .iter()
        .map(|p| {
            let label = label_of(p);
            Ok(LabeledExperiment { scenario: scenario_of(p, &label)?, data: load_q(p)?, label })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = distance_matrix(&experiments).map_err(|e| e.at("distance"))?;
    let dir = out_dir(g)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf, g.thesis_style)?;
    write_bytes(&dir, "distance.csv", &buf)?;
    buf.clear();
    report.write_std_csv(&mut buf, g.thesis_style)?;
    write_bytes(&dir, "distance_std.csv", &buf)?;
    write_json(&dir, "distance.json", &report)
}

// ------------------------------------------------------------------ hist

#[derive(Serialize)]
struct HistSidecar {
    input: String,
    reference: String,
    bins: usize,
    frames: u64,
    mean: f64,
    std: f64,
}

fn hist(g: &GlobalOpts, a: &HistArgs) -> Result<()> {
    let exp = load_q(&a.input)?;
    let ref_path = a.reference.as_ref().unwrap_or(&a.input);
    let ref_exp = if a.reference.is_some() { load_q(ref_path)? } else { exp.clone() };
    let reference = reference_levels(&ref_exp).map_err(|e| e.at("reference"))?;
    let dist = whd_distribution(&reference, &exp, a.bins).map_err(|e| e.at("histogram"))?;
    let dir = out_dir(g)?;
    let stem = format!("{}_vs_{}", label_of(ref_path), label_of(&a.input));
    let mut buf = Vec::new();
    dist.write_csv(&mut buf)?;
    write_bytes(&dir, &format!("{stem}.whd_hist.csv"), &buf)?;
    let side = HistSidecar {
        input: file_name(&a.input),
        reference: file_name(ref_path),
        bins: a.bins,
        frames: dist.total(),
        mean: dist.mean,
        std: dist.std,
    };
    write_json(&dir, &format!("{stem}.whd_hist.json"), &side)
}

// ------------------------------------------------------------------ autocorr

#[derive(Serialize)]
struct AutocorrSidecar {
    input: String,
    subcarrier: usize,
    max_lag: usize,
    frames: usize,
    /// `4/sqrt(M−1)`: increment values inside ±band look like noise.
    noise_band: f64,
}

fn autocorr(g: &GlobalOpts, a: &AutocorrArgs) -> Result<()> {
    let q = load_q(&a.input)?;
    if a.subcarrier >= q.cols() {
        return Err(Error::InvalidArgument(format!("sub-carrier {} out of range (experiment has {})", a.subcarrier, q.cols())));
    }
    let unit: csistat::AmplitudeMatrix64 = csistat::quant::dequantize_amplitudes(&q)?;
    let amp = unit.values.column(a.subcarrier);
    let inc = increments(&unit, 1).map_err(|e| e.at("increments"))?.column(a.subcarrier);
    let ra = autocorrelation(&amp, a.max_lag).map_err(|e| e.at("autocorrelation"))?;
    let ri = autocorrelation(&inc, a.max_lag).map_err(|e| e.at("autocorrelation"))?;
    let dir = out_dir(g)?;
    let stem = label_of(&a.input);
    let body = csv_lines("lag,amplitude,increment", (0..=a.max_lag).map(|l| format!("{l},{},{}", ra[l], ri[l])));
    write_bytes(&dir, &format!("{stem}.autocorr.csv"), &body)?;
    let side = AutocorrSidecar {
        input: file_name(&a.input),
        subcarrier: a.subcarrier,
        max_lag: a.max_lag,
        frames: q.rows(),
        noise_band: 4.0 / (inc.len() as f64).sqrt(),
    };
    write_json(&dir, &format!("{stem}.autocorr.json"), &side)
}

// ------------------------------------------------------------------ heatmap

#[derive(Serialize)]
struct HeatmapSidecar {
    a: String,
    b: String,
    frames: usize,
    subcarriers: usize,
    max_abs_difference: i64,
}

fn heatmap(g: &GlobalOpts, a: &HeatmapArgs) -> Result<()> {
    let (qa, qb) = (load_q(&a.a)?, load_q(&a.b)?);
    let h = amplitude_heatmap_export(&qa, &qb).map_err(|e| e.at("heatmap"))?;
    let dir = out_dir(g)?;
    let stem = format!("{}_vs_{}", label_of(&a.a), label_of(&a.b));
    for (suffix, m) in [("a", &h.a), ("b", &h.b), ("diff", &h.diff)] {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, m)?;
        write_bytes(&dir, &format!("{stem}.heatmap_{suffix}.csv"), &buf)?;
    }
    let side = HeatmapSidecar {
        a: file_name(&a.a),
        b: file_name(&a.b),
        frames: qa.rows(),
        subcarriers: qa.cols(),
        max_abs_difference: h.diff.as_slice().iter().map(|v| v.abs()).max().unwrap_or(0),
    };
    write_json(&dir, &format!("{stem}.heatmap.json"), &side)
}

// ------------------------------------------------------------------ mi

#[derive(Serialize)]
struct MiSidecar<'a> {
    reference: String,
    other: Option<String>,
    model: String,
    #[serde(flatten)]
    report: &'a MiReport,
}

fn mi(g: &GlobalOpts, a: &MiArgs) -> Result<()> {
    let reference = load_q(&a.reference)?;
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e).at("model"))?;
    let model = IncrementModel::<f64>::from_json(&text).map_err(|e| e.at("model"))?;
    let (report, stem) = match &a.other {
        None => (internal_mi(&reference, &model, a.r).map_err(|e| e.at("mi"))?, format!("{}.mi_internal", label_of(&a.reference))),
        Some(p) => {
            let other = load_q(p)?;
            let rep = external_mi(&reference, &other, &model, a.r).map_err(|e| e.at("mi"))?;
            (rep, format!("{}_vs_{}.mi_external", label_of(&a.reference), label_of(p)))
        }
    };
    let dir = out_dir(g)?;
    let body = csv_lines(
        "subcarrier,bits",
        report.per_subcarrier_bits.iter().enumerate().map(|(n, b)| format!("{n},{b}")),
    );
    write_bytes(&dir, &format!("{stem}.csv"), &body)?;
    let side = MiSidecar {
        reference: file_name(&a.reference),
        other: a.other.as_deref().map(file_name),
        model: file_name(&a.model),
        report: &report,
    };
    write_json(&dir, &format!("{stem}.json"), &side)
}

// ------------------------------------------------------------------ synth

#[derive(Serialize)]
struct SuiteEntry {
    label: String,
    scenario: String,
    sigma_levels: f64,
    seed: u64,
    clamp_events: u64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SuiteSidecar {
    generator: &'static str,
    seed: u64,
    n_sc: usize,
    frames: usize,
    q_amp: u32,
    q_inc: u32,
    separation: u32,
    sigma_levels: Vec<f64>,
    experiments: Vec<SuiteEntry>,
}

fn synth(g: &GlobalOpts, a: &SynthArgs) -> Result<()> {
    let cfg = SuiteConfig {
        n_sc: a.n_sc,
        q_amp: a.q_amp,
        q_inc: g.q_inc,
        m_frames: a.frames,
        separation: a.separation,
        sigma_levels: a.sigma.clone(),
        experiments_per_scenario: a.per_scenario,
        seed: g.seed,
    };
    let suite = make_scenario_suite(&cfg).map_err(|e| e.at("synth"))?;
    let dir = out_dir(g)?;
    let mut entries = Vec::new();
    for (i, s) in suite.iter().enumerate() {
        let label = &s.labeled.label;
        let files = vec![
            format!("{label}.csv"),
            format!("{label}.json"),
            format!("{label}.quantized.csv"),
            format!("{label}.model.json"),
        ];
        let mut buf = Vec::new();
        write_synthetic_trace(&mut buf, &s.labeled.data, &s.metadata, &trace_spec(g, Path::new(&files[0])))?;
        write_bytes(&dir, &files[0], &buf)?;
        write_json(&dir, &files[1], &s.metadata)?;
        buf.clear();
        write_quantized(&mut buf, &s.labeled.data)?;
        write_bytes(&dir, &files[2], &buf)?;
        write_bytes(&dir, &files[3], format!("{}\n", s.model.to_json()?).as_bytes())?;
        entries.push(SuiteEntry {
            label: label.clone(),
            scenario: s.labeled.scenario.clone(),
            sigma_levels: cfg.sigma_levels[i / cfg.experiments_per_scenario],
            seed: s.seed,
            clamp_events: s.clamp_events,
            files,
        });
    }
    let side = SuiteSidecar {
        generator: "xoshiro256++ seeded by SplitMix64",
        seed: cfg.seed,
        n_sc: cfg.n_sc,
        frames: cfg.m_frames,
        q_amp: cfg.q_amp,
        q_inc: cfg.q_inc,
        separation: cfg.separation,
        sigma_levels: cfg.sigma_levels.clone(),
        experiments: entries,
    };
    write_json(&dir, "suite.json", &side)
}

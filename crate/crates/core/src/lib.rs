//! Statistical pipeline for Wi-Fi CSI amplitude traces.
//!
//! Traces are ingested from CSV, stripped of suppressed sub-carriers,
//! normalized against automatic gain control and mapped onto `[0, 1]`.
//! Frame-to-frame increments are fitted with a Gaussian, truncated at `±δ*`
//! and quantized; amplitudes are quantized on a `q_amp`-bit grid chosen so
//! the two grids agree. Experiments are then compared with the weighted
//! Hamming distance and with discrete mutual information on reduced
//! alphabets, and a seeded random-walk generator produces synthetic corpora.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases fix the common double-precision case.

pub mod distance;
pub mod error;
pub mod increments;
pub mod infotheory;
pub mod ingest;
pub mod model;
pub mod normalize;
pub mod quant;
pub mod scalar;
pub mod synth;

pub use distance::{
    avg_whd, distance_matrix, hamming, normalized_avg_whd, reference_levels, whd_csi, whd_distribution, whd_weighted,
    BitString, CellKind, DistanceReport, LabeledExperiment,
};
pub use error::{Error, ErrorKind, Result};
pub use increments::{fit_gaussian, increments, GaussianFit};
pub use infotheory::{external_mi, internal_mi, mutual_information, JointPmf, MiReport};
pub use ingest::{load_metadata, load_trace, parse_metadata, strip_suppressed, ComplexLayout, TraceFileSpec};
pub use model::{
    AmplitudeMatrix, ComplexSample, CsiFrame, Experiment, ExperimentMetadata, Matrix, Modulation, QuantizedMatrix,
    ReferenceCsi, Scenario, Stage,
};
pub use normalize::{energy_normalize, reference_csi, unit_normalize, UnitScale};
pub use quant::{
    quantize_amplitudes, quantized_gaussian_pmf, q_amp_from, select_delta_star, tune_delta_star, DeltaRule,
    IncrementModel, Pmf,
};
pub use scalar::Real;
pub use synth::{generate_experiment, make_scenario_suite, SuiteConfig};

pub type Matrix64 = Matrix<f64>;
pub type ComplexSample64 = ComplexSample<f64>;
pub type CsiFrame64 = CsiFrame<f64>;
pub type Experiment64 = Experiment<f64>;
pub type AmplitudeMatrix64 = AmplitudeMatrix<f64>;
pub type ReferenceCsi64 = ReferenceCsi<f64>;
pub type GaussianFit64 = GaussianFit<f64>;
pub type Pmf64 = Pmf<f64>;
pub type IncrementModel64 = IncrementModel<f64>;
pub type JointPmf64 = JointPmf<f64>;
pub type UnitScale64 = UnitScale<f64>;

pub type Experiment32 = Experiment<f32>;
pub type AmplitudeMatrix32 = AmplitudeMatrix<f32>;

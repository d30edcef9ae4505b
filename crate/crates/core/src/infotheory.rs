//! Discrete mutual information and entropy in bits, logarithm series, and
//! internal/external MI of quantized experiments on a reduced alphabet.
//!
//! Full CSI alphabets (`2^(N_SC·q_amp)` symbols) cannot be enumerated, so
//! experiment-level MI works per sub-carrier on levels coarsened by dropping
//! `r` low bits and adds the per-sub-carrier values, treating sub-carriers as
//! independent.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{max_level, Matrix, QuantizedMatrix};
use crate::quant::IncrementModel;
use crate::scalar::{pairwise_sum, Real};

/// Largest reduced alphabet accepted by [`internal_mi`] / [`external_mi`].
pub const MAX_REDUCED_ALPHABET: usize = 1024;

/// Joint PMF of `(X, Y)`: rows index `X`, columns index `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<T> {
    probs: Matrix<T>,
}

impl<T: Real> JointPmf<T> {
    /// Rejects negative or non-finite entries and totals off 1 by > 1e-12.
    pub fn new(probs: Matrix<T>) -> Result<Self> {
        if let Some((i, p)) = probs.as_slice().iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= T::zero())) {
            return Err(Error::OutOfRange { index: i, value: p.as_f64(), range: "[0, 1]".into() });
        }
        let total = pairwise_sum(probs.as_slice()).as_f64();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("joint PMF sums to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights (e.g. counts).
    pub fn from_weights(weights: Matrix<T>) -> Result<Self> {
        let total = pairwise_sum(weights.as_slice());
        if !(total > T::zero()) {
            return Err(Error::InvalidArgument("joint weights sum to zero".into()));
        }
        Self::new(weights.map(|w| w / total))
    }

    /// `P(x)·P(y)`.
    pub fn product(px: &[T], py: &[T]) -> Result<Self> {
        let data = px.iter().flat_map(|&a| py.iter().map(move |&b| a * b)).collect();
        Self::new(Matrix::from_vec(px.len(), py.len(), data)?)
    }

    pub fn probs(&self) -> &Matrix<T> {
        &self.probs
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.probs.get(x, y)
    }

    pub fn marginal_x(&self) -> Vec<T> {
        self.probs.row_iter().map(pairwise_sum).collect()
    }

    pub fn marginal_y(&self) -> Vec<T> {
        (0..self.probs.cols()).map(|y| pairwise_sum(&self.probs.column(y))).collect()
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = self.probs.shape();
        let data = (0..c).flat_map(|y| (0..r).map(move |x| (x, y))).map(|(x, y)| self.probs.get(x, y)).collect();
        Self { probs: Matrix::from_vec(c, r, data).expect("transposed shape") }
    }

    /// `P(x | y)` as a matrix with the same layout; columns with zero mass
    /// stay zero.
    pub fn conditional_x_given_y(&self) -> Matrix<T> {
        let py = self.marginal_y();
        let (r, c) = self.probs.shape();
        let mut out = Matrix::filled(r, c, T::zero());
        for x in 0..r {
            for y in 0..c {
                if py[y] > T::zero() {
                    out.set(x, y, self.probs.get(x, y) / py[y]);
                }
            }
        }
        out
    }
}

#[inline]
fn plogp<T: Real>(p: T) -> T {
    if p > T::zero() {
        p * p.log2()
    } else {
        T::zero()
    }
}

/// `Σ P(x,y)·log2(P(x,y) / (P(x)P(y)))` with `0·log 0 = 0`.
pub fn mutual_information<T: Real>(j: &JointPmf<T>) -> T {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut terms = Vec::new();
    for (x, row) in j.probs.row_iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > T::zero() {
                terms.push(p * (p / (px[x] * py[y])).log2());
            }
        }
    }
    pairwise_sum(&terms)
}

/// Shannon entropy in bits.
pub fn entropy<T: Real>(p: &[T]) -> T {
    -pairwise_sum(&p.iter().map(|&v| plogp(v)).collect::<Vec<_>>())
}

pub fn joint_entropy<T: Real>(j: &JointPmf<T>) -> T {
    entropy(j.probs.as_slice())
}

/// Conditioning variable for [`conditional_entropy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Given {
    X,
    Y,
}

/// `H(Y|X)` for `Given::X`, `H(X|Y)` for `Given::Y`, evaluated directly as
/// `−Σ P(x,y)·log2(P(x,y)/P(given))`.
pub fn conditional_entropy<T: Real>(j: &JointPmf<T>, given: Given) -> T {
    let marginal = match given {
        Given::X => j.marginal_x(),
        Given::Y => j.marginal_y(),
    };
    let mut terms = Vec::new();
    for (x, row) in j.probs.row_iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > T::zero() {
                let m = if given == Given::X { marginal[x] } else { marginal[y] };
                terms.push(p * (p / m).log2());
            }
        }
    }
    -pairwise_sum(&terms)
}

/// Partial sum `2·Σ_{j odd, j ≤ 2t−1} (1/j)·((x−1)/(x+1))^j` of the
/// bilinear series for `ln x`.
pub fn log_bilinear<T: Real>(x: T, terms: usize) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::InvalidArgument(format!("log_bilinear needs x > 0, got {x}")));
    }
    let z = (x - T::one()) / (x + T::one());
    let z2 = z * z;
    let mut power = z;
    let mut sum = T::zero();
    for t in 0..terms {
        sum = sum + power / T::of_usize(2 * t + 1);
        power = power * z2;
    }
    Ok(T::of(2.0) * sum)
}

/// Partial sum of `ln x − ln a = Σ_{j≥1} (−1)^{j+1} (x−a)^j / (j·a^j)`.
/// Diverges unless `|x − a| < a`.
pub fn log_taylor_about<T: Real>(x: T, a: T, terms: usize) -> Result<T> {
    if !(a > T::zero()) || !((x - a).abs() < a) {
        return Err(Error::Divergent(format!("series about a={a} does not converge at x={x}")));
    }
    Ok(alternating_log_series((x - a) / a, terms))
}

/// `ln(1 + y) ≈ y − y²/2 + y³/3 − …`, the series about 1.
pub fn log_series_about_one<T: Real>(x: T, terms: usize) -> Result<T> {
    log_taylor_about(x, T::one(), terms)
}

fn alternating_log_series<T: Real>(y: T, terms: usize) -> T {
    let mut power = y;
    let mut sum = T::zero();
    for j in 1..=terms {
        let term = power / T::of_usize(j);
        sum = if j % 2 == 1 { sum + term } else { sum - term };
        power = power * y;
    }
    sum
}

/// First-order MI expansion under constant marginals:
/// `Σ_rows Σ_a P(a|a*)·(P(a|a*) − u)`. An approximation, not exact MI.
pub fn mi_uniform_marginal<T: Real>(cond: &[Vec<T>], uniform_p: T) -> Result<T> {
    if !(uniform_p > T::zero() && uniform_p <= T::one()) {
        return Err(Error::OutOfRange { index: 0, value: uniform_p.as_f64(), range: "(0, 1]".into() });
    }
    let mut rows = Vec::with_capacity(cond.len());
    for (i, row) in cond.iter().enumerate() {
        let s = pairwise_sum(row).as_f64();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("conditional row {i} sums to {s}")));
        }
        rows.push(pairwise_sum(&row.iter().map(|&p| p * (p - uniform_p)).collect::<Vec<_>>()));
    }
    Ok(pairwise_sum(&rows))
}

/// `log2 P(C)` of a CSI under uniform, independent sub-carriers:
/// `−n_sc·q_amp`. Kept in the log domain.
pub fn csi_log_probability(n_sc: u64, q_amp: u32) -> f64 {
    -((n_sc * q_amp as u64) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MiKind {
    Internal,
    External,
}

/// MI of an experiment pair on a reduced alphabet. Always carries `r` and
/// the alphabet size so it cannot be mistaken for full-scale MI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiReport {
    pub kind: MiKind,
    /// Low bits dropped from each amplitude level.
    pub r: u32,
    pub q_amp: u32,
    pub alphabet_size: usize,
    pub frames: usize,
    /// `I(X_n; Y_n)` in bits for each sub-carrier.
    pub per_subcarrier_bits: Vec<f64>,
    /// Sum over sub-carriers: the MI of one frame with the reference.
    pub per_frame_bits: f64,
    /// Upper limit of `per_frame_bits`: `n_sc·log2(alphabet_size)`.
    pub per_frame_cap_bits: f64,
    /// `frames · per_frame_bits`.
    pub total_bits: f64,
}

fn reduced_alphabet(q_amp: u32, r: u32) -> Result<usize> {
    if r < 1 || r > q_amp {
        return Err(Error::InvalidArgument(format!("alphabet reduction r must be in [1, {q_amp}], got {r}")));
    }
    let size = 1usize << (q_amp - r);
    if size > MAX_REDUCED_ALPHABET {
        return Err(Error::AlphabetTooLarge { symbols: size, required_r: q_amp - MAX_REDUCED_ALPHABET.trailing_zeros() });
    }
    Ok(size)
}

/// Per-sub-carrier joint of `X = coarse(a)` and `Y = coarse(clamp(a + δ))`,
/// with `a` drawn from the empirical levels of `column` and `δ` from the
/// model PMF.
fn subcarrier_joint(column: &[u32], model: &IncrementModel<f64>, r: u32, size: usize) -> JointPmf<f64> {
    let top = max_level(model.q_amp) as i64;
    let mut counts = std::collections::BTreeMap::<u32, usize>::new();
    for &a in column {
        *counts.entry(a).or_default() += 1;
    }
    let n = column.len() as f64;
    let mut weights = Matrix::filled(size, size, 0.0);
    for (&a, &c) in &counts {
        let pa = c as f64 / n;
        let x = (a >> r) as usize;
        for (delta, pd) in model.pmf.iter() {
            if pd > 0.0 {
                let b = (a as i64 + delta as i64).clamp(0, top) as u32;
                let y = (b >> r) as usize;
                weights.set(x, y, weights.get(x, y) + pa * pd);
            }
        }
    }
    // weights already sum to 1 up to rounding; renormalize through the
    // validating constructor
    JointPmf::from_weights(weights).expect("non-empty joint")
}

fn check_grid(frames: &QuantizedMatrix, model: &IncrementModel<f64>) -> Result<()> {
    if frames.q_amp != model.q_amp {
        return Err(Error::GridMismatch(format!("frames use q_amp={}, model uses q_amp={}", frames.q_amp, model.q_amp)));
    }
    if frames.rows() == 0 {
        return Err(Error::NoFrames);
    }
    Ok(())
}

fn experiment_mi(kind: MiKind, frames: &QuantizedMatrix, model: &IncrementModel<f64>, r: u32) -> Result<MiReport> {
    check_grid(frames, model)?;
    let size = reduced_alphabet(frames.q_amp, r)?;
    let per_subcarrier_bits: Vec<f64> = (0..frames.cols())
        .into_par_iter()
        .map(|n| mutual_information(&subcarrier_joint(&frames.values.column(n), model, r, size)))
        .collect();
    let per_frame_bits = pairwise_sum(&per_subcarrier_bits);
    let m = frames.rows();
    Ok(MiReport {
        kind,
        r,
        q_amp: frames.q_amp,
        alphabet_size: size,
        frames: m,
        per_frame_cap_bits: frames.cols() as f64 * (size as f64).log2(),
        per_subcarrier_bits,
        per_frame_bits,
        total_bits: m as f64 * per_frame_bits,
    })
}

/// Internal MI `Σ_i I(A*, A(i))` of an experiment under its own increment
/// model.
///
/// For sub-carrier `n`, the reference-side symbol `X` follows the empirical
/// distribution of the experiment's levels at `n`, and the frame-side symbol
/// is `Y = X + δ` with `δ` drawn from the model PMF (saturating at the grid
/// edges); both are coarsened by `>> r`. Every frame contributes the same
/// term, so the total is `M · Σ_n I(X_n; Y_n)`.
pub fn internal_mi(exp: &QuantizedMatrix, model: &IncrementModel<f64>, r: u32) -> Result<MiReport> {
    experiment_mi(MiKind::Internal, exp, model, r)
}

/// External MI `E_{A,B} = Σ_{i ≤ M_B} I(A*, B(i))`: the increment model of
/// the reference experiment `A` applied to the level distribution of `B`.
/// `E_{A,B}` and `E_{B,A}` generally differ.
pub fn external_mi(ref_exp: &QuantizedMatrix, other: &QuantizedMatrix, model_of_ref: &IncrementModel<f64>, r: u32) -> Result<MiReport> {
    if ref_exp.q_amp != other.q_amp || ref_exp.cols() != other.cols() {
        return Err(Error::GridMismatch(format!(
            "reference is {}×q{}, other is {}×q{}",
            ref_exp.cols(),
            ref_exp.q_amp,
            other.cols(),
            other.q_amp
        )));
    }
    experiment_mi(MiKind::External, other, model_of_ref, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_joint(rng: &mut impl Rng, rows: usize, cols: usize) -> JointPmf<f64> {
        let w: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        JointPmf::from_weights(Matrix::from_vec(rows, cols, w).unwrap()).unwrap()
    }

    #[test]
    fn independence_gives_zero() {
        let j = JointPmf::product(&[0.2f64, 0.3, 0.5], &[0.1, 0.9]).unwrap();
        assert!(mutual_information(&j).abs() < 1e-12);
    }

    #[test]
    fn deterministic_copy_gives_entropy() {
        let mut m = Matrix::filled(4, 4, 0.0f64);
        for i in 0..4 {
            m.set(i, i, 0.25);
        }
        let j = JointPmf::new(m).unwrap();
        assert!((mutual_information(&j) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.125f64; 8]) - 3.0).abs() < 1e-15);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn identities_on_random_joints() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let (r, c) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let j = random_joint(&mut rng, r, c);
            let i = mutual_information(&j);
            let (hx, hy, hxy) = (entropy(&j.marginal_x()), entropy(&j.marginal_y()), joint_entropy(&j));
            let (hx_y, hy_x) = (conditional_entropy(&j, Given::Y), conditional_entropy(&j, Given::X));
            assert!(i >= -1e-12);
            for alt in [hx - hx_y, hy - hy_x, hx + hy - hxy, hxy - hx_y - hy_x] {
                assert!((i - alt).abs() < 1e-12, "{i} vs {alt}");
            }
            assert!((i - mutual_information(&j.transpose())).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_validation() {
        assert!(JointPmf::new(Matrix::from_rows(&[[0.5, 0.6]]).unwrap()).is_err());
        assert!(JointPmf::new(Matrix::from_rows(&[[-0.1, 1.1]]).unwrap()).is_err());
    }

    #[test]
    fn conditional_columns_sum_to_one() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let j = random_joint(&mut rng, 3, 5);
        let c = j.conditional_x_given_y();
        for y in 0..5 {
            assert!((c.column(y).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_examples() {
        assert_eq!(log_bilinear(1.0, 1).unwrap(), 0.0);
        assert_eq!(log_bilinear(1.0, 30).unwrap(), 0.0);
        assert!((log_bilinear(2.0, 25).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!((log_bilinear(0.5, 25).unwrap() + 2f64.ln()).abs() < 1e-10);
        assert!(log_bilinear(0.0, 5).is_err());
    }

    #[test]
    fn taylor_examples() {
        assert_eq!(log_taylor_about(3.0, 3.0, 10).unwrap(), 0.0);
        assert!((log_taylor_about(1.5, 1.0, 40).unwrap() - 1.5f64.ln()).abs() < 1e-9);
        assert!((log_taylor_about(0.3, 0.25, 40).unwrap() - (0.3f64 / 0.25).ln()).abs() < 1e-12);
        assert!(matches!(log_taylor_about(2.0, 1.0, 10), Err(Error::Divergent(_))));
        assert!(log_taylor_about(0.5, 0.0, 10).is_err());
    }

    #[test]
    fn taylor_about_one_matches_plain_series() {
        for terms in 1..12 {
            for &x in &[0.3, 0.9, 1.2, 1.7] {
                let y: f64 = x - 1.0;
                let plain: f64 = (1..=terms).map(|j| (-1f64).powi(j as i32 + 1) * y.powi(j as i32) / j as f64).sum();
                let got = log_taylor_about(x, 1.0, terms).unwrap();
                assert!((got - plain).abs() < 1e-15);
                assert_eq!(got, log_series_about_one(x, terms).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn series_errors_shrink_with_terms(x in 0.05f64..20.0, a in 0.5f64..2.0, u in -0.95f64..0.95) {
            let exact = x.ln();
            let mut prev = f64::INFINITY;
            for t in 1..30 {
                let e = (log_bilinear(x, t).unwrap() - exact).abs();
                prop_assert!(e <= prev + 1e-15);
                prev = e;
            }
            let xt = a * (1.0 + u);
            let exact = (xt / a).ln();
            let mut prev = f64::INFINITY;
            for t in 1..30 {
                let e = (log_taylor_about(xt, a, t).unwrap() - exact).abs();
                // alternating series: the error bound |y|^(t+1)/(t+1) shrinks,
                // the realised error shrinks every two terms
                if t % 2 == 1 {
                    prop_assert!(e <= prev + 1e-15);
                    prev = e;
                }
            }
        }
    }

    #[test]
    fn uniform_marginal_examples() {
        let u = 0.25f64;
        assert!(mi_uniform_marginal(&[vec![u; 4], vec![u; 4]], u).unwrap().abs() < 1e-15);
        let det = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
        assert!((mi_uniform_marginal(&det, u).unwrap() - 2.0 * 0.75).abs() < 1e-15);
        assert!(mi_uniform_marginal(&[vec![0.5, 0.4]], u).is_err());
    }

    #[test]
    fn uniform_marginal_tracks_exact_mi_near_uniform() {
        // doubly stochastic perturbation keeps both marginals uniform
        let k = 6;
        let u = 1.0 / k as f64;
        for &eps in &[0.01, 0.003] {
            let mut cond = vec![vec![u; k]; k];
            for i in 0..k {
                cond[i][i] += eps;
                cond[i][(i + 1) % k] -= eps;
            }
            let joint = JointPmf::new(Matrix::from_vec(k, k, cond.iter().flatten().map(|p| p * u).collect()).unwrap()).unwrap();
            let exact_nats = mutual_information(&joint) * std::f64::consts::LN_2;
            let approx = mi_uniform_marginal(&cond, u).unwrap();
            assert!((approx - exact_nats).abs() <= (k * k) as f64 * eps * eps);
        }
    }

    #[test]
    fn log_probability_examples() {
        assert_eq!(csi_log_probability(256, 10), -2560.0);
        assert_eq!(csi_log_probability(1, 1), -1.0);
        assert_eq!(csi_log_probability(1024, 10), -10240.0);
    }

    fn qm(rows: &[[u32; 2]], q_amp: u32) -> QuantizedMatrix {
        QuantizedMatrix::new(Matrix::from_rows(rows).unwrap(), q_amp).unwrap()
    }

    #[test]
    fn point_mass_constant_experiment_has_zero_mi() {
        let exp = qm(&[[3, 5], [3, 5], [3, 5]], 4);
        let model = IncrementModel::with_pmf(crate::quant::Pmf::point(7, 0).unwrap(), 4, 4).unwrap();
        let rep = internal_mi(&exp, &model, 1).unwrap();
        assert_eq!(rep.total_bits, 0.0);
        assert_eq!(rep.alphabet_size, 8);
    }

    #[test]
    fn alphabet_limit() {
        let exp = qm(&[[3, 5]], 12);
        let model = IncrementModel::with_pmf(crate::quant::Pmf::point(3, 0).unwrap(), 3, 12).unwrap();
        assert!(matches!(internal_mi(&exp, &model, 1), Err(Error::AlphabetTooLarge { required_r: 2, .. })));
        assert!(internal_mi(&exp, &model, 2).is_ok());
        assert!(internal_mi(&exp, &model, 0).is_err());
    }

    #[test]
    fn external_with_self_equals_internal() {
        let exp = qm(&[[1, 6], [2, 7], [3, 5], [2, 6]], 3);
        let pmf = crate::quant::Pmf::new(vec![0.0, 0.0, 0.25, 0.5, 0.25, 0.0, 0.0]).unwrap();
        let model = IncrementModel::with_pmf(pmf, 3, 3).unwrap();
        let i = internal_mi(&exp, &model, 1).unwrap();
        let e = external_mi(&exp, &exp, &model, 1).unwrap();
        assert_eq!(i.total_bits, e.total_bits);
        assert!(i.per_frame_bits <= i.per_frame_cap_bits);
    }
}

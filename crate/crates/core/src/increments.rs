//! Increment series, σ estimators and autocorrelation diagnostics.

use crate::error::{Error, Result};
use crate::model::{AmplitudeMatrix, Matrix, Stage};
use crate::normalize::{unit_map, UnitScale};
use crate::scalar::{pairwise_sum, Real};

/// h-step increments `A(k+h, n) − A(k, n)` for `k` in `0..M−h`.
pub fn increments<T: Real>(m: &AmplitudeMatrix<T>, h: usize) -> Result<Matrix<T>> {
    m.expect_stage(Stage::UnitNormalized, "increments")?;
    raw_increments(&m.values, h)
}

pub(crate) fn raw_increments<T: Real>(a: &Matrix<T>, h: usize) -> Result<Matrix<T>> {
    if h == 0 {
        return Err(Error::InvalidArgument("increment step h must be >= 1".into()));
    }
    if h >= a.rows() {
        return Err(Error::InsufficientFrames { needed: h + 1, got: a.rows() });
    }
    let rows = a.rows() - h;
    let mut data = Vec::with_capacity(rows * a.cols());
    for k in 0..rows {
        data.extend(a.row(k + h).iter().zip(a.row(k)).map(|(&later, &earlier)| later - earlier));
    }
    Matrix::from_vec(rows, a.cols(), data)
}

/// One-step σ estimate, with the `1/(M−1)` factor outside the square root:
///
/// `σ = (1/N) Σ_n [ sqrt(Σ_k δ²(k, n)) / (M−1) ]`
///
/// This is not the usual sample standard deviation; [`fit_gaussian`] is.
pub fn sigma_paper_one_step<T: Real>(d: &Matrix<T>) -> Result<T> {
    let steps = d.rows();
    if steps == 0 || d.cols() == 0 {
        return Err(Error::InsufficientFrames { needed: 2, got: steps + 1 });
    }
    let per_sc: Vec<T> = (0..d.cols())
        .map(|n| {
            let sq: Vec<T> = (0..steps).map(|k| d.get(k, n).powi(2)).collect();
            pairwise_sum(&sq).sqrt() / T::of_usize(steps)
        })
        .collect();
    Ok(pairwise_sum(&per_sc) / T::of_usize(d.cols()))
}

/// Multi-step σ estimate pooling h-step increments for `h = 1..=⌊M/2⌋`,
/// normalized by `M_T − 1` with `M_T = Σ_h (M − h)`.
pub fn sigma_paper_multi_step<T: Real>(m: &AmplitudeMatrix<T>) -> Result<T> {
    m.expect_stage(Stage::UnitNormalized, "sigma_paper_multi_step")?;
    let rows = m.rows();
    if rows < 4 {
        return Err(Error::InsufficientFrames { needed: 4, got: rows });
    }
    let max_h = rows / 2;
    let total: usize = (1..=max_h).map(|h| rows - h).sum();
    let denom = T::of_usize(total - 1);
    let a = &m.values;
    let per_sc: Vec<T> = (0..a.cols())
        .map(|n| {
            let sq: Vec<T> = (1..=max_h)
                .flat_map(|h| (0..rows - h).map(move |k| (a.get(k + h, n) - a.get(k, n)).powi(2)))
                .collect();
            pairwise_sum(&sq).sqrt() / denom
        })
        .collect();
    Ok(pairwise_sum(&per_sc) / T::of_usize(a.cols()))
}

/// Maximum-likelihood normal fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit<T> {
    pub mu: T,
    /// Population (1/n) standard deviation.
    pub sigma: T,
    pub count: usize,
}

impl<T: Real> GaussianFit<T> {
    /// A zero σ cannot parameterize an increment model.
    pub fn is_degenerate(&self) -> bool {
        self.sigma <= T::zero()
    }
}

/// MLE mean and standard deviation of a pooled sample (all sub-carriers
/// concatenated).
pub fn fit_gaussian<T: Real>(samples: &[T]) -> Result<GaussianFit<T>> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let n = T::of_usize(samples.len());
    let mu = pairwise_sum(samples) / n;
    let sq: Vec<T> = samples.iter().map(|&x| (x - mu).powi(2)).collect();
    let sigma = (pairwise_sum(&sq) / n).sqrt();
    Ok(GaussianFit { mu, sigma, count: samples.len() })
}

/// Same global min/max mapping as the amplitudes, applied to increments.
pub fn normalize_increments<T: Real>(d: &Matrix<T>) -> Result<(Matrix<T>, UnitScale<T>)> {
    unit_map(d)
}

/// Sample autocorrelation for lags `0..=max_lag`, mean removed and divided by
/// the full length at every lag (biased estimator), so `out[0] = 1`.
pub fn autocorrelation<T: Real>(series: &[T], max_lag: usize) -> Result<Vec<T>> {
    if max_lag < 1 {
        return Err(Error::InvalidArgument("max_lag must be >= 1".into()));
    }
    if series.len() <= max_lag {
        return Err(Error::InsufficientSamples { needed: max_lag + 1, got: series.len() });
    }
    let len = T::of_usize(series.len());
    let mean = pairwise_sum(series) / len;
    let centered: Vec<T> = series.iter().map(|&x| x - mean).collect();
    let cov = |lag: usize| {
        let prods: Vec<T> = centered.iter().zip(&centered[lag..]).map(|(&a, &b)| a * b).collect();
        pairwise_sum(&prods) / len
    };
    let c0 = cov(0);
    if !(c0 > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag).map(|lag| if lag == 0 { T::one() } else { cov(lag) / c0 }).collect())
}

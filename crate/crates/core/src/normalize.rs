//! Amplitude conditioning: AGC removal, global `[0, 1]` mapping and the
//! reference CSI.

use crate::error::{Error, Result};
use crate::model::{AmplitudeMatrix, Matrix, ReferenceCsi, Stage};
use crate::scalar::{pairwise_sum, pairwise_sum_by, Real};

/// Divides every frame by its mean amplitude, so each output frame has mean 1.
///
/// AGC rescales whole frames; the result is invariant to any positive
/// per-frame scale factor.
pub fn energy_normalize<T: Real>(m: &AmplitudeMatrix<T>) -> Result<AmplitudeMatrix<T>> {
    m.expect_stage(Stage::Raw, "energy_normalize")?;
    let n = T::of_usize(m.cols());
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for (k, row) in m.values.row_iter().enumerate() {
        let mean = pairwise_sum(row) / n;
        if !(mean > T::zero()) {
            return Err(Error::ZeroEnergyFrame(k));
        }
        data.extend(row.iter().map(|&a| a / mean));
    }
    Ok(AmplitudeMatrix { values: Matrix::from_vec(m.rows(), m.cols(), data)?, stage: Stage::EnergyNormalized })
}

/// Constants of the global min/max mapping, kept so it can be inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitScale<T> {
    /// Global minimum subtracted first.
    pub a_min: T,
    /// Global maximum after subtraction, i.e. the span.
    pub a_max: T,
}

impl<T: Real> UnitScale<T> {
    pub fn apply(&self, x: T) -> T {
        (x - self.a_min) / self.a_max
    }

    pub fn invert(&self, u: T) -> T {
        u * self.a_max + self.a_min
    }
}

fn min_max<T: Real>(values: &[T]) -> (T, T) {
    values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Shared algebra for amplitudes and increments: subtract the global minimum,
/// then divide by the new global maximum.
pub(crate) fn unit_map<T: Real>(values: &Matrix<T>) -> Result<(Matrix<T>, UnitScale<T>)> {
    let (lo, hi) = min_max(values.as_slice());
    let span = hi - lo;
    if !(span > T::zero()) {
        return Err(Error::DegenerateRange(lo.as_f64()));
    }
    let scale = UnitScale { a_min: lo, a_max: span };
    // min maps to exactly 0 and max to exactly span/span = 1
    Ok((values.map(|v| scale.apply(v)), scale))
}

/// Maps an energy-normalized experiment onto `[0, 1]` using the minimum and
/// maximum over the whole experiment. Individual frames need not span the
/// full interval.
pub fn unit_normalize<T: Real>(m: &AmplitudeMatrix<T>) -> Result<(AmplitudeMatrix<T>, UnitScale<T>)> {
    m.expect_stage(Stage::EnergyNormalized, "unit_normalize")?;
    let (values, scale) = unit_map(&m.values)?;
    Ok((AmplitudeMatrix { values, stage: Stage::UnitNormalized }, scale))
}

/// Per-sub-carrier mean over all frames, summed pairwise in frame order.
pub fn reference_csi<T: Real>(m: &AmplitudeMatrix<T>) -> Result<ReferenceCsi<T>> {
    m.expect_stage(Stage::UnitNormalized, "reference_csi")?;
    Ok(ReferenceCsi::Unit(column_means(&m.values)?))
}

pub(crate) fn column_means<T: Real>(values: &Matrix<T>) -> Result<Vec<T>> {
    let rows = values.rows();
    if rows == 0 {
        return Err(Error::NoFrames);
    }
    let count = T::of_usize(rows);
    Ok((0..values.cols())
        .map(|n| {
            let mean = pairwise_sum_by(rows, &|k| values.get(k, n)) / count;
            // guard against one-ulp overshoot of the [0, 1] bounds
            mean.max(T::zero()).min(T::one())
        })
        .collect())
}

//! ECDF-based distribution-shift detection.
//!
//! Each input channel is compared against the training distribution of the
//! predicted class with the 1-D Wasserstein distance. A bootstrap test turns
//! the distance into a p-value, and the per-channel p-values are folded into
//! a single reliable/unreliable verdict with a minimum-p rule.

mod bootstrap;
mod channels;

pub use bootstrap::{bootstrap_pvalue, bootstrap_test, RngSeed};
pub use channels::{read_channel_file, write_channel_file, ChannelFileError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of bootstrap resamples.
pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Default significance threshold for the minimum-p rule.
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("non-finite sample value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("bootstrap size must be positive")]
    ZeroBootstrap,
    #[error("empty p-value list")]
    NoPValues,
    #[error("p-value {0} outside [0, 1]")]
    PValueOutOfRange(f64),
    #[error("alpha {0} outside the open interval (0, 1)")]
    AlphaOutOfRange(f64),
    #[error(
        "channel arity mismatch: {observed} observed channels vs {reference} reference channels"
    )]
    ChannelArityMismatch { observed: usize, reference: usize },
    #[error(
        "channel id mismatch at position {position}: observed {observed}, reference {reference}"
    )]
    ChannelIdMismatch {
        position: usize,
        observed: u32,
        reference: u32,
    },
}

/// Observations of one channel, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    channel_id: u32,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(channel_id: u32, mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySampleSet);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(StatsError::NonFinite { index, value });
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { channel_id, values })
    }

    pub fn channel_id(&self) -> u32 {
        self.channel_id
    }

    /// Sorted values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every observation identical.
    pub fn is_degenerate(&self) -> bool {
        self.values.first() == self.values.last()
    }

    /// A copy with `offset` added to every value.
    pub fn shifted(&self, offset: f64) -> Result<Self, StatsError> {
        Self::new(
            self.channel_id,
            self.values.iter().map(|v| v + offset).collect(),
        )
    }
}

/// Distance and bootstrap p-value for a single channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDriftResult {
    pub channel_id: u32,
    pub distance: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftWarning {
    /// All reference values coincide, so the bootstrap null distribution is a point mass.
    DegenerateReference { channel_id: u32 },
}

/// Outcome of the minimum-p rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub min_p: f64,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub per_channel: Vec<ChannelDriftResult>,
    pub min_p: f64,
    pub unreliable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<DriftWarning>,
}

/// Right-continuous empirical CDF: fraction of samples `<= x`.
pub fn ecdf_eval(samples: &SampleSet, x: f64) -> f64 {
    let count = samples.values.partition_point(|&v| v <= x);
    count as f64 / samples.len() as f64
}

/// 1-Wasserstein distance between two empirical distributions.
///
/// Integrates `|F_a - F_b|` exactly over the merged support. Both step
/// functions are constant between consecutive merged breakpoints, so the
/// integral is a finite sum.
pub fn wasserstein_1d(a: &SampleSet, b: &SampleSet) -> f64 {
    wasserstein_sorted(&a.values, &b.values)
}

pub(crate) fn wasserstein_sorted(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let gap = i as f64 / m - j as f64 / n;
        total += gap.abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    total
}

/// Minimum-p rule: unreliable iff `min(p) <= alpha`.
pub fn assess_reliability(p_values: &[f64], alpha: f64) -> Result<Reliability, StatsError> {
    check_alpha(alpha)?;
    if p_values.is_empty() {
        return Err(StatsError::NoPValues);
    }
    if let Some(&p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::PValueOutOfRange(p));
    }
    let min_p = p_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Reliability {
        min_p,
        unreliable: min_p <= alpha,
    })
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::AlphaOutOfRange(alpha))
    }
}

/// Test every observed channel against the matching reference channel and
/// aggregate with [`assess_reliability`].
///
/// Each channel draws from its own RNG stream derived from `seed` and the
/// channel id.
pub fn assess_frame(
    channels: &[SampleSet],
    reference: &[SampleSet],
    bootstrap: usize,
    alpha: f64,
    seed: RngSeed,
) -> Result<DriftVerdict, StatsError> {
    check_alpha(alpha)?;
    if bootstrap == 0 {
        return Err(StatsError::ZeroBootstrap);
    }
    if channels.len() != reference.len() || channels.is_empty() {
        return Err(StatsError::ChannelArityMismatch {
            observed: channels.len(),
            reference: reference.len(),
        });
    }
    let mut per_channel = Vec::with_capacity(channels.len());
    let mut warnings = Vec::new();
    for (position, (observed, train)) in channels.iter().zip(reference).enumerate() {
        if observed.channel_id() != train.channel_id() {
            return Err(StatsError::ChannelIdMismatch {
                position,
                observed: observed.channel_id(),
                reference: train.channel_id(),
            });
        }
        if train.is_degenerate() {
            warnings.push(DriftWarning::DegenerateReference {
                channel_id: train.channel_id(),
            });
        }
        let channel_seed = seed.for_channel(train.channel_id());
        per_channel.push(bootstrap_test(observed, train, bootstrap, channel_seed)?);
    }
    let p_values: Vec<f64> = per_channel.iter().map(|c| c.p_value).collect();
    let Reliability { min_p, unreliable } = assess_reliability(&p_values, alpha)?;
    Ok(DriftVerdict {
        per_channel,
        min_p,
        unreliable,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> SampleSet {
        SampleSet::new(0, values.to_vec()).unwrap()
    }

    #[test]
    fn sample_set_sorts_and_validates() {
        let s = set(&[3.0, 1.0, 2.0]);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(SampleSet::new(0, vec![]), Err(StatsError::EmptySampleSet));
        assert!(matches!(
            SampleSet::new(0, vec![1.0, f64::NAN]),
            Err(StatsError::NonFinite { index: 1, .. })
        ));
        assert!(SampleSet::new(0, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn ecdf_counts() {
        let s = set(&[1.0, 2.0, 3.0]);
        assert_eq!(ecdf_eval(&s, 2.0), 2.0 / 3.0);
        assert_eq!(ecdf_eval(&s, 0.5), 0.0);
        assert_eq!(ecdf_eval(&s, 3.0), 1.0);
        assert_eq!(ecdf_eval(&s, 2.999), 2.0 / 3.0);
    }

    #[test]
    fn wasserstein_examples() {
        let a = set(&[0.1, 0.5, 0.9]);
        assert_eq!(wasserstein_1d(&a, &a), 0.0);
        assert_eq!(wasserstein_1d(&set(&[0.0]), &set(&[3.0])), 3.0);
        assert!((wasserstein_1d(&set(&[0.0, 1.0]), &set(&[0.0, 2.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_unequal_sizes() {
        // {0} vs {0, 1}: F gap of 1/2 over [0, 1).
        assert!((wasserstein_1d(&set(&[0.0]), &set(&[0.0, 1.0])) - 0.5).abs() < 1e-15);
        // Duplicates collapse into one breakpoint.
        assert!((wasserstein_1d(&set(&[1.0, 1.0, 1.0]), &set(&[2.0])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reliability_rule() {
        let r = assess_reliability(&[0.5, 0.5, 0.5], 0.01).unwrap();
        assert!(!r.unreliable);
        assert!(
            assess_reliability(&[0.005, 0.5, 0.5], 0.01)
                .unwrap()
                .unreliable
        );
        assert!(
            assess_reliability(&[0.0, 0.0, 0.0], 0.01)
                .unwrap()
                .unreliable
        );
        // Tie at the threshold is unreliable.
        assert!(assess_reliability(&[0.01, 0.5], 0.01).unwrap().unreliable);
        assert_eq!(assess_reliability(&[], 0.01), Err(StatsError::NoPValues));
        assert_eq!(
            assess_reliability(&[0.5], 0.0),
            Err(StatsError::AlphaOutOfRange(0.0))
        );
        assert_eq!(
            assess_reliability(&[0.5], 1.0),
            Err(StatsError::AlphaOutOfRange(1.0))
        );
        assert_eq!(
            assess_reliability(&[1.5], 0.01),
            Err(StatsError::PValueOutOfRange(1.5))
        );
    }

    fn rgb(offset: f64) -> Vec<SampleSet> {
        (0..3)
            .map(|c| {
                let values = (0..40).map(|i| (i * 7 % 40) as f64 / 40.0 + c as f64 * 0.1 + offset);
                SampleSet::new(c, values.collect()).unwrap()
            })
            .collect()
    }

    #[test]
    fn frame_identical_to_reference_is_reliable() {
        let reference = rgb(0.0);
        let v = assess_frame(&reference, &reference, 200, 0.01, RngSeed(7)).unwrap();
        assert!(v
            .per_channel
            .iter()
            .all(|c| c.p_value == 1.0 && c.distance == 0.0));
        assert!(!v.unreliable);
        assert_eq!(v.min_p, 1.0);
    }

    #[test]
    fn shifted_frame_is_unreliable() {
        let reference = rgb(0.0);
        let v = assess_frame(&rgb(1000.0), &reference, 1000, 0.01, RngSeed(7)).unwrap();
        assert!(v.per_channel.iter().all(|c| c.p_value == 0.0));
        assert!(v.unreliable);
    }

    #[test]
    fn frame_arity_mismatch() {
        let reference = rgb(0.0);
        let err = assess_frame(&reference[..2], &reference, 10, 0.01, RngSeed(1)).unwrap_err();
        assert_eq!(
            err,
            StatsError::ChannelArityMismatch {
                observed: 2,
                reference: 3
            }
        );
        assert!(err.to_string().contains("channel arity mismatch"));
    }

    #[test]
    fn degenerate_reference_warns() {
        let reference = vec![SampleSet::new(0, vec![0.5; 10]).unwrap()];
        let v = assess_frame(&reference, &reference, 50, 0.01, RngSeed(3)).unwrap();
        assert_eq!(
            v.warnings,
            vec![DriftWarning::DegenerateReference { channel_id: 0 }]
        );
        assert!(!v.unreliable);
    }
}

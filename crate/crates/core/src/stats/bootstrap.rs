use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wasserstein_sorted, ChannelDriftResult, SampleSet, StatsError};

/// Seed for the bootstrap generator.
///
/// Resampling uses ChaCha8 seeded through `seed_from_u64`; iteration `b`
/// reads ChaCha stream `b`, so results do not depend on how iterations are
/// scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent seed for one channel of a frame.
    pub fn for_channel(self, channel_id: u32) -> RngSeed {
        self.derive(0x6368_616e_0000_0000 | u64::from(channel_id))
    }

    /// Mixes `salt` into the seed (splitmix64 finalizer).
    pub fn derive(self, salt: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }

    fn iteration_rng(self, iteration: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(iteration);
        rng
    }
}

/// Bootstrap p-value of `test` against `train`.
///
/// Fraction of `bootstrap` resamples (size `|test|`, drawn with replacement
/// from `train`) whose distance to `train` is at least the observed distance.
pub fn bootstrap_pvalue(
    test: &SampleSet,
    train: &SampleSet,
    bootstrap: usize,
    seed: RngSeed,
) -> Result<f64, StatsError> {
    bootstrap_test(test, train, bootstrap, seed).map(|r| r.p_value)
}

/// Like [`bootstrap_pvalue`] but also reports the observed distance.
pub fn bootstrap_test(
    test: &SampleSet,
    train: &SampleSet,
    bootstrap: usize,
    seed: RngSeed,
) -> Result<ChannelDriftResult, StatsError> {
    if bootstrap == 0 {
        return Err(StatsError::ZeroBootstrap);
    }
    let observed = wasserstein_sorted(test.values(), train.values());
    let reference = train.values();
    let n = reference.len() as u64;
    let size = test.len();

    let exceed = (0..bootstrap as u64)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(size), Vec::with_capacity(size)),
            |(indices, resample), b| {
                let mut rng = seed.iteration_rng(b);
                indices.clear();
                indices.extend((0..size).map(|_| rng.random_range(0..n) as usize));
                indices.sort_unstable();
                resample.clear();
                resample.extend(indices.iter().map(|&i| reference[i]));
                wasserstein_sorted(resample, reference) >= observed
            },
        )
        .filter(|&hit| hit)
        .count();

    Ok(ChannelDriftResult {
        channel_id: test.channel_id(),
        distance: observed,
        p_value: exceed as f64 / bootstrap as f64,
    })
}

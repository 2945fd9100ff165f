//! Synthetic stand-ins for per-class pixel statistics.
//!
//! Each class/channel pair gets a Beta-shaped intensity distribution
//! quantized to 8-bit levels in [0, 1]. In-distribution frames are evenly
//! spaced quantiles of the reference; dark frames are the same quantiles
//! compressed toward 0 (low brightness and contrast).

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{ReferenceError, ReferenceStore};
use crate::platoon::{Calibration, TrafficSignClass};
use crate::stats::{write_channel_file, RngSeed, SampleSet};

pub const FIXTURE_SEED: u64 = 20_250_701;
pub const CHANNELS: u32 = 3;
pub const REFERENCE_SAMPLES: usize = 400;
pub const FRAME_SAMPLES: usize = 64;
pub const DARK_FACTOR: f64 = 0.15;

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Training-side samples for one class.
pub fn reference_class(class: TrafficSignClass, samples: usize, seed: RngSeed) -> Vec<SampleSet> {
    let k = f64::from(class.id());
    (0..CHANNELS)
        .map(|c| {
            let cf = f64::from(c);
            let a = 2.0 + (k * 3.0 + cf) % 5.0 * 0.5;
            let b = 2.0 + (k + 2.0 * cf) % 4.0 * 0.5;
            let beta = Beta::new(a, b).expect("positive shape parameters");
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.derive(u64::from(class.id())).for_channel(c).0);
            let values = (0..samples)
                .map(|_| quantize(beta.sample(&mut rng)))
                .collect();
            SampleSet::new(c, values).expect("finite samples")
        })
        .collect()
}

pub fn generate_reference(
    classes: impl IntoIterator<Item = TrafficSignClass>,
    samples: usize,
    seed: RngSeed,
) -> ReferenceStore {
    let mut store = ReferenceStore::new();
    for class in classes {
        store
            .insert(class, reference_class(class, samples, seed))
            .expect("uniform channel layout");
    }
    store
}

fn quantiles(set: &SampleSet, size: usize) -> Vec<f64> {
    let v = set.values();
    (0..size)
        .map(|i| v[((2 * i + 1) * v.len()) / (2 * size)])
        .collect()
}

/// Evenly spaced quantiles of each reference channel.
pub fn in_distribution_frame(reference: &[SampleSet], size: usize) -> Vec<SampleSet> {
    reference
        .iter()
        .map(|s| SampleSet::new(s.channel_id(), quantiles(s, size)).expect("non-empty"))
        .collect()
}

/// Quantiles scaled by `factor` toward black.
pub fn dark_frame(reference: &[SampleSet], size: usize, factor: f64) -> Vec<SampleSet> {
    reference
        .iter()
        .map(|s| {
            let values = quantiles(s, size)
                .into_iter()
                .map(|v| quantize(v * factor))
                .collect();
            SampleSet::new(s.channel_id(), values).expect("non-empty")
        })
        .collect()
}

/// Quantiles translated by `offset`.
pub fn shifted_frame(reference: &[SampleSet], size: usize, offset: f64) -> Vec<SampleSet> {
    reference
        .iter()
        .map(|s| {
            let values = quantiles(s, size).into_iter().map(|v| v + offset).collect();
            SampleSet::new(s.channel_id(), values).expect("finite")
        })
        .collect()
}

/// Writes `reference/`, `frames/` and `calibration/platoon.bn` under `root`.
pub fn write_fixtures(root: &Path, seed: RngSeed) -> Result<(), ReferenceError> {
    let classes = (0..=8).map(|c| TrafficSignClass::new(c).expect("valid class"));
    let store = generate_reference(classes, REFERENCE_SAMPLES, seed);
    store.write_dir(&root.join("reference"))?;

    let frames = root.join("frames");
    let io = |path: &Path, source| ReferenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(&frames).map_err(|e| io(&frames, e))?;
    for (class, channels) in store.iter() {
        for (suffix, frame) in [
            ("id", in_distribution_frame(channels, FRAME_SAMPLES)),
            ("dark", dark_frame(channels, FRAME_SAMPLES, DARK_FACTOR)),
        ] {
            let path = frames.join(format!("class_{class}_{suffix}.csv"));
            write_channel_file(&path, &frame)
                .map_err(|source| ReferenceError::File { path, source })?;
        }
    }

    let cal_dir = root.join("calibration");
    std::fs::create_dir_all(&cal_dir).map_err(|e| io(&cal_dir, e))?;
    let text = Calibration::builtin()
        .to_text()
        .expect("built-in calibration is valid");
    let cal_path = cal_dir.join("platoon.bn");
    std::fs::write(&cal_path, text).map_err(|e| io(&cal_path, e))?;
    Ok(())
}

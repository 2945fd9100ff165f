use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::platoon::TrafficSignClass;
use crate::stats::{
    read_channel_file, write_channel_file, ChannelFileError, SampleSet, StatsError,
};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("reference directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("no class_<k>.csv files in {0}")]
    NoClassFiles(PathBuf),
    #[error("missing reference file for class {class}: {path}")]
    MissingClassFile {
        class: TrafficSignClass,
        path: PathBuf,
    },
    #[error("class {class} has channels {found:?}, other classes have {expected:?}")]
    ArityMismatch {
        class: TrafficSignClass,
        expected: Vec<u32>,
        found: Vec<u32>,
    },
    #[error("empty sample set for class {class}")]
    EmptySampleSet { class: TrafficSignClass },
    #[error("class file name {0} does not name a class in 0..=42")]
    BadClassFile(PathBuf),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: ChannelFileError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Training-side channel samples per class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceStore {
    classes: BTreeMap<TrafficSignClass, Vec<SampleSet>>,
}

impl ReferenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Channels must be sorted by id and match the ids of classes already stored.
    pub fn insert(
        &mut self,
        class: TrafficSignClass,
        mut channels: Vec<SampleSet>,
    ) -> Result<(), ReferenceError> {
        if channels.is_empty() {
            return Err(ReferenceError::EmptySampleSet { class });
        }
        channels.sort_by_key(SampleSet::channel_id);
        let found: Vec<u32> = channels.iter().map(SampleSet::channel_id).collect();
        if let Some(expected) = self.channel_ids() {
            if expected != found {
                return Err(ReferenceError::ArityMismatch {
                    class,
                    expected,
                    found,
                });
            }
        }
        self.classes.insert(class, channels);
        Ok(())
    }

    pub fn get(&self, class: TrafficSignClass) -> Option<&[SampleSet]> {
        self.classes.get(&class).map(Vec::as_slice)
    }

    pub fn classes(&self) -> impl Iterator<Item = TrafficSignClass> + '_ {
        self.classes.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TrafficSignClass, &[SampleSet])> {
        self.classes.iter().map(|(c, s)| (*c, s.as_slice()))
    }

    pub fn channel_ids(&self) -> Option<Vec<u32>> {
        self.classes
            .values()
            .next()
            .map(|s| s.iter().map(SampleSet::channel_id).collect())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Writes one `class_<k>.csv` per class.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ReferenceError> {
        std::fs::create_dir_all(dir).map_err(|source| ReferenceError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (class, channels) in &self.classes {
            let path = class_file(dir, *class);
            write_channel_file(&path, channels)
                .map_err(|source| ReferenceError::File { path, source })?;
        }
        Ok(())
    }
}

pub fn class_file(dir: &Path, class: TrafficSignClass) -> PathBuf {
    dir.join(format!("class_{class}.csv"))
}

fn class_of(path: &Path) -> Option<Result<TrafficSignClass, ReferenceError>> {
    let name = path.file_name()?.to_str()?;
    let id = name.strip_prefix("class_")?.strip_suffix(".csv")?;
    Some(
        id.parse::<i64>()
            .ok()
            .and_then(|v| TrafficSignClass::new(v).ok())
            .ok_or_else(|| ReferenceError::BadClassFile(path.to_path_buf())),
    )
}

fn load_class(path: &Path, class: TrafficSignClass) -> Result<Vec<SampleSet>, ReferenceError> {
    match read_channel_file(path) {
        Ok(sets) => Ok(sets),
        Err(ChannelFileError::Empty)
        | Err(ChannelFileError::Samples {
            source: StatsError::EmptySampleSet,
            ..
        }) => Err(ReferenceError::EmptySampleSet { class }),
        Err(ChannelFileError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ReferenceError::MissingClassFile {
                class,
                path: path.to_path_buf(),
            })
        }
        Err(source) => {
            // A zero-byte file has no header either; report it as empty.
            if std::fs::metadata(path)
                .map(|m| m.len() == 0)
                .unwrap_or(false)
            {
                return Err(ReferenceError::EmptySampleSet { class });
            }
            Err(ReferenceError::File {
                path: path.to_path_buf(),
                source,
            })
        }
    }
}

/// Loads every `class_<k>.csv` in `dir`.
pub fn load_reference(dir: &Path) -> Result<ReferenceStore, ReferenceError> {
    if !dir.is_dir() {
        return Err(ReferenceError::MissingDirectory(dir.to_path_buf()));
    }
    let entries = std::fs::read_dir(dir).map_err(|source| ReferenceError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| ReferenceError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if let Some(class) = class_of(&path) {
            files.push((class?, path));
        }
    }
    if files.is_empty() {
        return Err(ReferenceError::NoClassFiles(dir.to_path_buf()));
    }
    files.sort_by_key(|(class, _)| *class);
    let mut store = ReferenceStore::new();
    for (class, path) in files {
        let channels = load_class(&path, class)?;
        store.insert(class, channels)?;
    }
    Ok(store)
}

/// Loads exactly the listed classes; each must have its own file.
pub fn load_reference_classes(
    dir: &Path,
    classes: &[TrafficSignClass],
) -> Result<ReferenceStore, ReferenceError> {
    if !dir.is_dir() {
        return Err(ReferenceError::MissingDirectory(dir.to_path_buf()));
    }
    let mut store = ReferenceStore::new();
    for &class in classes {
        let channels = load_class(&class_file(dir, class), class)?;
        store.insert(class, channels)?;
    }
    Ok(store)
}

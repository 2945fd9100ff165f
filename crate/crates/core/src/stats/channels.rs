//! Channel sample files: CSV with header `channel_id,value`, one row per observation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SampleSet, StatsError};

#[derive(Debug, Error)]
pub enum ChannelFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed channel file: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}, expected \"channel_id,value\"")]
    BadHeader { found: String },
    #[error("no samples")]
    Empty,
    #[error("channel {channel_id}: {source}")]
    Samples {
        channel_id: u32,
        #[source]
        source: StatsError,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    channel_id: u32,
    value: f64,
}

/// Reads a channel file into one [`SampleSet`] per channel id, ordered by id.
pub fn read_channel_file(path: &Path) -> Result<Vec<SampleSet>, ChannelFileError> {
    read_channels(File::open(path)?)
}

pub(crate) fn read_channels<R: Read>(reader: R) -> Result<Vec<SampleSet>, ChannelFileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "channel_id" || &header[1] != "value" {
        return Err(ChannelFileError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut grouped: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let Row { channel_id, value } = row?;
        grouped.entry(channel_id).or_default().push(value);
    }
    if grouped.is_empty() {
        return Err(ChannelFileError::Empty);
    }
    grouped
        .into_iter()
        .map(|(channel_id, values)| {
            SampleSet::new(channel_id, values)
                .map_err(|source| ChannelFileError::Samples { channel_id, source })
        })
        .collect()
}

/// Writes channels in the same format, values in sorted order.
pub fn write_channel_file(path: &Path, channels: &[SampleSet]) -> Result<(), ChannelFileError> {
    let mut out = Vec::new();
    write_channels(&mut out, channels)?;
    File::create(path)?.write_all(&out)?;
    Ok(())
}

pub(crate) fn write_channels<W: Write>(
    writer: W,
    channels: &[SampleSet],
) -> Result<(), ChannelFileError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for set in channels {
        for &value in set.values() {
            wtr.serialize(Row {
                channel_id: set.channel_id(),
                value,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

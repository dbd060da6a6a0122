//! Session store: one directory per session holding a JSON manifest and one
//! binary sample file per batch.
//!
//! ```text
//! <root>/session_<id>/manifest.json
//! <root>/session_<id>/batch_<bb>.emgs
//! ```
//!
//! A batch file holds the batch as one continuous stream; the manifest's
//! prompt schedule gives each utterance's onset into it. Rest intervals are
//! not kept in memory and are written as zeros.
//!
//! Files are written to a temporary name and renamed into place, so
//! concurrent readers see either the old or the new file, never a partial one.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AcquisitionConfig, Condition, Dataset, ProtocolConfig, Recording, Utterance};
use crate::features::FeatureVector;
use crate::ingest::{segment_utterances, PromptEvent};
use crate::{Error, Result};

pub const BATCH_MAGIC: [u8; 4] = *b"EMGS";
pub const BATCH_VERSION: u16 = 1;
/// magic + version + n_channels + n_samples + sample_rate
pub const BATCH_HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: bad magic {found:?}, expected \"EMGS\"")]
    BadMagic { path: String, found: [u8; 4] },
    #[error("{path}: unsupported version {version}")]
    UnsupportedVersion { path: String, version: u16 },
    #[error("{path}: truncated, expected {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: u64,
        found: u64,
    },
    #[error("{0}")]
    Inconsistent(String),
    #[error("no session directories under {0}")]
    Empty(String),
}

/// Per-session metadata document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub condition: Condition,
    pub acquisition: AcquisitionConfig,
    pub protocol: ProtocolConfig,
    /// Ordered by (batch, prompt index).
    pub schedule: Vec<PromptEvent>,
}

/// Writes a batch sample file. Samples are stored channel-major.
pub fn write_batch_file(path: &Path, rec: &Recording<f32>) -> Result<()> {
    let n_channels = u16::try_from(rec.n_channels())
        .map_err(|_| StoreError::Inconsistent("more than 65535 channels".into()))?;
    let mut buf = Vec::with_capacity(BATCH_HEADER_LEN + 4 * rec.n_channels() * rec.len());
    buf.extend_from_slice(&BATCH_MAGIC);
    buf.extend_from_slice(&BATCH_VERSION.to_le_bytes());
    buf.extend_from_slice(&n_channels.to_le_bytes());
    buf.extend_from_slice(&(rec.len() as u64).to_le_bytes());
    buf.extend_from_slice(&rec.sample_rate().to_le_bytes());
    for row in rec.rows() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

pub fn read_batch_file(path: &Path) -> Result<Recording<f32>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_batch(&bytes, &path.display().to_string())
}

fn decode_batch(bytes: &[u8], path: &str) -> Result<Recording<f32>> {
    if bytes.len() < BATCH_HEADER_LEN {
        return Err(StoreError::Truncated {
            path: path.into(),
            expected: BATCH_HEADER_LEN as u64,
            found: bytes.len() as u64,
        }
        .into());
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != BATCH_MAGIC {
        return Err(StoreError::BadMagic {
            path: path.into(),
            found: magic,
        }
        .into());
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != BATCH_VERSION {
        return Err(StoreError::UnsupportedVersion {
            path: path.into(),
            version,
        }
        .into());
    }
    let n_channels = u16::from_le_bytes(bytes[6..8].try_into().unwrap()) as usize;
    let n_samples = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let sample_rate = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = BATCH_HEADER_LEN as u64 + 4 * n_channels as u64 * n_samples;
    if bytes.len() as u64 != expected {
        return Err(StoreError::Truncated {
            path: path.into(),
            expected,
            found: bytes.len() as u64,
        }
        .into());
    }
    let n_samples = n_samples as usize;
    let body = &bytes[BATCH_HEADER_LEN..];
    let rows = (0..n_channels)
        .map(|c| {
            body[4 * c * n_samples..4 * (c + 1) * n_samples]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok(Recording::new(rows, sample_rate)?)
}

pub fn session_dir(root: &Path, session_id: &str) -> PathBuf {
    root.join(format!("session_{session_id}"))
}

pub fn batch_file_name(batch_id: u32) -> String {
    format!("batch_{batch_id:02}.emgs")
}

/// Persists `d`. Returns every file written, manifests first per session.
pub fn write_store(root: &Path, d: &Dataset) -> Result<Vec<PathBuf>> {
    let rate = d.acquisition.sample_rate;
    let stride = d.protocol.prompt_stride_samples(rate);
    let utt_len = d.protocol.articulation_samples(rate);
    let n_channels = d.acquisition.n_active();
    let mut written = Vec::new();

    for session_id in d.session_ids() {
        let dir = session_dir(root, &session_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let mut batches: BTreeMap<u32, Vec<&Utterance>> = BTreeMap::new();
        for u in d.session(&session_id) {
            batches.entry(u.batch_id).or_default().push(u);
        }

        let mut schedule = Vec::new();
        let mut batch_streams = Vec::new();
        for (&batch_id, members) in &mut batches {
            members.sort_by_key(|u| u.prompt_index);
            let mut stream = Recording::<f32>::zeros(n_channels, members.len() * stride, rate);
            for (slot, u) in members.iter().enumerate() {
                if u.recording.len() != utt_len || u.recording.n_channels() != n_channels {
                    return Err(StoreError::Inconsistent(format!(
                        "session {session_id} batch {batch_id} prompt {}: shape {}x{} expected {n_channels}x{utt_len}",
                        u.prompt_index,
                        u.recording.n_channels(),
                        u.recording.len()
                    ))
                    .into());
                }
                let onset = slot * stride;
                for (dst, src) in stream.rows_mut().iter_mut().zip(u.recording.rows()) {
                    dst[onset..onset + utt_len].copy_from_slice(src);
                }
                schedule.push(PromptEvent {
                    batch_id,
                    prompt_index: u.prompt_index,
                    word: u.word,
                    onset_sample: onset as u64,
                });
            }
            batch_streams.push((batch_id, stream));
        }

        let manifest = SessionManifest {
            session_id: session_id.clone(),
            condition: d.condition,
            acquisition: d.acquisition.clone(),
            protocol: d.protocol.clone(),
            schedule,
        };
        let manifest_path = dir.join(MANIFEST_FILE);
        write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
        written.push(manifest_path);

        for (batch_id, stream) in batch_streams {
            let path = dir.join(batch_file_name(batch_id));
            write_batch_file(&path, &stream)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn read_manifest(path: &Path) -> Result<SessionManifest> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&text)?)
}

/// Loads every `session_*` directory under `root`, sorted by name.
pub fn read_store(root: &Path) -> Result<Dataset> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("session_"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(StoreError::Empty(root.display().to_string()).into());
    }

    let mut dataset: Option<Dataset> = None;
    for dir in dirs {
        let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
        let d = dataset.get_or_insert_with(|| Dataset {
            utterances: Vec::new(),
            condition: manifest.condition,
            acquisition: manifest.acquisition.clone(),
            protocol: manifest.protocol.clone(),
        });
        if d.condition != manifest.condition
            || d.acquisition != manifest.acquisition
            || d.protocol != manifest.protocol
        {
            return Err(StoreError::Inconsistent(format!(
                "session {} disagrees with earlier sessions on condition or configuration",
                manifest.session_id
            ))
            .into());
        }

        let mut by_batch: BTreeMap<u32, Vec<PromptEvent>> = BTreeMap::new();
        for ev in &manifest.schedule {
            by_batch.entry(ev.batch_id).or_default().push(ev.clone());
        }
        let all_channels: Vec<usize> = (0..manifest.acquisition.n_active()).collect();
        for (batch_id, events) in by_batch {
            let stream = read_batch_file(&dir.join(batch_file_name(batch_id)))?;
            let utterances = segment_utterances(
                &stream,
                &events,
                &manifest.protocol,
                &all_channels,
                &manifest.session_id,
            )?;
            d.utterances.extend(utterances);
        }
    }
    Ok(dataset.expect("at least one session"))
}

/// One row of the feature export.
pub struct FeatureRow<'a> {
    pub session_id: &'a str,
    pub batch_id: u32,
    pub word_code: usize,
    pub features: &'a FeatureVector<f64>,
}

/// Writes the feature/label CSV: `session_id,batch_id,word_code,<features...>`.
pub fn write_features_csv<'a>(
    path: &Path,
    feature_names: &[String],
    rows: impl IntoIterator<Item = FeatureRow<'a>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["session_id".to_string(), "batch_id".into(), "word_code".into()];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    for row in rows {
        if row.features.len() != feature_names.len() {
            return Err(StoreError::Inconsistent(format!(
                "feature vector has {} values, header has {}",
                row.features.len(),
                feature_names.len()
            ))
            .into());
        }
        let mut rec = vec![
            row.session_id.to_string(),
            row.batch_id.to_string(),
            row.word_code.to_string(),
        ];
        rec.extend(row.features.values().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    let write = || -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_file_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.emgs");
        let rec = Recording::new(
            vec![vec![1.5f32, -0.0, f32::MIN_POSITIVE], vec![3.25, 1e-30, -7.0]],
            500.0,
        )
        .unwrap();
        write_batch_file(&path, &rec).unwrap();
        let back = read_batch_file(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rec.rows().iter().flatten().zip(back.rows().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"EMGS");
        assert_eq!(bytes.len(), BATCH_HEADER_LEN + 4 * 6);
    }

    #[test]
    fn corrupt_batch_files_are_rejected() {
        let rec = Recording::new(vec![vec![1.0f32; 4]], 500.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.emgs");
        write_batch_file(&path, &rec).unwrap();
        let mut bytes = fs::read(&path).unwrap();

        let err = decode_batch(&bytes[..bytes.len() - 1], "x").unwrap_err();
        assert!(matches!(err, Error::Store(StoreError::Truncated { .. })));

        bytes[0] = b'X';
        let err = decode_batch(&bytes, "x").unwrap_err();
        assert!(matches!(err, Error::Store(StoreError::BadMagic { .. })));
    }
}

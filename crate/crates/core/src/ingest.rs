//! Acquisition frame parsing, code-to-microvolt conversion, and segmentation
//! of continuous streams into labeled utterances.
//!
//! Frame layout (little-endian header, big-endian samples):
//!
//! ```text
//! 0      magic 0xA5
//! 1..3   seq (u16 LE)
//! 3      reserved
//! 4..    3 bytes per channel, two's complement, MSB first
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AcquisitionConfig, ProtocolConfig, Recording, Utterance, Word};
use crate::Scalar;

pub const FRAME_MAGIC: u8 = 0xA5;
pub const FRAME_HEADER_LEN: usize = 4;
pub const CODE_MAX: i32 = (1 << 23) - 1;
pub const CODE_MIN: i32 = -(1 << 23);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("bad frame magic 0x{found:02X} at byte offset {offset}")]
    BadMagic { offset: usize, found: u8 },
    #[error("short frame at byte offset {offset}: need {needed} bytes, {available} available")]
    ShortFrame {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("code {0} outside the signed 24-bit range")]
    CodeOutOfRange(i32),
    #[error(
        "prompt (batch {batch_id}, index {prompt_index}) at sample {onset_sample} needs {needed} samples, stream has {stream_len}"
    )]
    OutOfBounds {
        batch_id: u32,
        prompt_index: u32,
        onset_sample: u64,
        needed: usize,
        stream_len: usize,
    },
    #[error("channel {channel} not present in a {available}-channel stream")]
    MissingChannel { channel: usize, available: usize },
}

/// One sample instant across all recorded channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub seq: u16,
    pub codes: Vec<i32>,
}

/// A prompt in the stream: which word, and where its articulation starts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEvent {
    pub batch_id: u32,
    pub prompt_index: u32,
    pub word: Word,
    pub onset_sample: u64,
}

#[inline]
pub fn frame_len(n_channels: usize) -> usize {
    FRAME_HEADER_LEN + 3 * n_channels
}

/// Decodes one frame from the start of `bytes`.
pub fn parse_frame(bytes: &[u8], n_channels: usize) -> Result<Frame, IngestError> {
    parse_frame_at(bytes, 0, n_channels)
}

fn parse_frame_at(bytes: &[u8], offset: usize, n_channels: usize) -> Result<Frame, IngestError> {
    let needed = frame_len(n_channels);
    let avail = bytes.len().saturating_sub(offset);
    if avail >= 1 && bytes[offset] != FRAME_MAGIC {
        return Err(IngestError::BadMagic {
            offset,
            found: bytes[offset],
        });
    }
    if avail < needed {
        return Err(IngestError::ShortFrame {
            offset,
            needed,
            available: avail,
        });
    }
    let b = &bytes[offset..offset + needed];
    let seq = u16::from_le_bytes([b[1], b[2]]);
    let codes = b[FRAME_HEADER_LEN..]
        .chunks_exact(3)
        .map(|c| decode_i24([c[0], c[1], c[2]]))
        .collect();
    Ok(Frame { seq, codes })
}

/// Big-endian 24-bit two's complement, sign-extended from bit 23.
#[inline]
pub fn decode_i24(b: [u8; 3]) -> i32 {
    (i32::from_be_bytes([b[0], b[1], b[2], 0])) >> 8
}

#[inline]
pub fn encode_i24(code: i32) -> Result<[u8; 3], IngestError> {
    if !(CODE_MIN..=CODE_MAX).contains(&code) {
        return Err(IngestError::CodeOutOfRange(code));
    }
    let b = code.to_be_bytes();
    Ok([b[1], b[2], b[3]])
}

/// Serializes a frame; inverse of [`parse_frame`].
pub fn emit_frame(frame: &Frame) -> Result<Vec<u8>, IngestError> {
    let mut out = Vec::with_capacity(frame_len(frame.codes.len()));
    emit_frame_into(frame.seq, &frame.codes, &mut out)?;
    Ok(out)
}

pub fn emit_frame_into(seq: u16, codes: &[i32], out: &mut Vec<u8>) -> Result<(), IngestError> {
    out.push(FRAME_MAGIC);
    out.extend_from_slice(&seq.to_le_bytes());
    out.push(0);
    for &c in codes {
        out.extend_from_slice(&encode_i24(c)?);
    }
    Ok(())
}

/// Microvolts per code step: vref / (gain * (2^23 - 1)) * 1e6.
#[inline]
pub fn microvolts_per_code(cfg: &AcquisitionConfig) -> f64 {
    cfg.vref / (cfg.gain * CODE_MAX as f64) * 1e6
}

#[inline]
pub fn code_to_microvolts(code: i32, cfg: &AcquisitionConfig) -> f64 {
    code as f64 * microvolts_per_code(cfg)
}

/// Nearest code for a voltage, clamped to the 24-bit range.
#[inline]
pub fn microvolts_to_code(uv: f64, cfg: &AcquisitionConfig) -> i32 {
    let c = (uv / microvolts_per_code(cfg)).round();
    c.clamp(CODE_MIN as f64, CODE_MAX as f64) as i32
}

/// A run of frames missing from the sequence counter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    /// Last sequence number received before the gap.
    pub after_seq: u16,
    pub lost: u32,
    /// First filled sample index in the output recording.
    pub at_sample: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
}

impl GapReport {
    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn frames_lost(&self) -> u64 {
        self.gaps.iter().map(|g| g.lost as u64).sum()
    }

    /// True if any filled sample falls inside `[start, end)`.
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.gaps
            .iter()
            .any(|g| g.at_sample < end && g.at_sample + g.lost as usize > start)
    }
}

/// Parses a concatenation of frames over `cfg.n_channels_recorded` channels
/// into a microvolt recording. Sequence-counter discontinuities are filled by
/// holding the last sample and listed in the gap report.
pub fn ingest_packet_stream(
    bytes: &[u8],
    cfg: &AcquisitionConfig,
) -> Result<(Recording<f64>, GapReport), IngestError> {
    let n = cfg.n_channels_recorded;
    let step = frame_len(n);
    let scale = microvolts_per_code(cfg);
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(bytes.len() / step); n];
    let mut report = GapReport::default();
    let mut last_seq: Option<u16> = None;

    let mut offset = 0;
    while offset < bytes.len() {
        let frame = parse_frame_at(bytes, offset, n)?;
        if let Some(prev) = last_seq {
            let lost = frame.seq.wrapping_sub(prev.wrapping_add(1)) as u32;
            if lost > 0 {
                report.gaps.push(Gap {
                    after_seq: prev,
                    lost,
                    at_sample: rows[0].len(),
                });
                for row in rows.iter_mut() {
                    let hold = *row.last().expect("gap follows a frame");
                    row.extend(std::iter::repeat_n(hold, lost as usize));
                }
            }
        }
        for (row, &code) in rows.iter_mut().zip(&frame.codes) {
            row.push(code as f64 * scale);
        }
        last_seq = Some(frame.seq);
        offset += step;
    }

    let rec = Recording::new(rows, cfg.sample_rate).expect("decoded samples are finite");
    Ok((rec, report))
}

/// Cuts one utterance per prompt: samples `[onset, onset + articulation)`
/// of `channels`, converted to stored f32 precision.
pub fn segment_utterances<T: Scalar>(
    stream: &Recording<T>,
    schedule: &[PromptEvent],
    proto: &ProtocolConfig,
    channels: &[usize],
    session_id: &str,
) -> Result<Vec<Utterance>, IngestError> {
    if let Some(&channel) = channels.iter().find(|&&c| c >= stream.n_channels()) {
        return Err(IngestError::MissingChannel {
            channel,
            available: stream.n_channels(),
        });
    }
    let len = proto.articulation_samples(stream.sample_rate());
    schedule
        .iter()
        .map(|ev| {
            let start = usize::try_from(ev.onset_sample).unwrap_or(usize::MAX);
            let end = start.checked_add(len).filter(|&e| e <= stream.len()).ok_or(
                IngestError::OutOfBounds {
                    batch_id: ev.batch_id,
                    prompt_index: ev.prompt_index,
                    onset_sample: ev.onset_sample,
                    needed: len,
                    stream_len: stream.len(),
                },
            )?;
            let rows = channels
                .iter()
                .map(|&c| {
                    stream.channel(c)[start..end]
                        .iter()
                        .map(|v| v.to_f32().expect("finite sample"))
                        .collect()
                })
                .collect();
            Ok(Utterance {
                word: ev.word,
                recording: Recording::new(rows, stream.sample_rate())
                    .expect("segment of a valid recording"),
                session_id: session_id.to_string(),
                batch_id: ev.batch_id,
                prompt_index: ev.prompt_index,
            })
        })
        .collect()
}

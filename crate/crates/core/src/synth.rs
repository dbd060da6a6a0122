//! Synthetic labeled EMG sessions.
//!
//! Each channel of an utterance is
//!
//! ```text
//! baseline noise + envelope(word, channel) * band-limited carrier + 50 Hz hum
//! ```
//!
//! where the envelope is a Hann bump placed by the word's template. The
//! activation peak amplitude is `baseline_uv * 10^(snr_db / 20) * gain`.
//! Sessions after the first are seen through a perturbed electrode map:
//! Givens rotations of adjacent channel pairs and per-channel gain changes,
//! both scaled by `repositioning_strength`.
//!
//! Every utterance draws from its own generator keyed by
//! (seed, session, batch, slot), so output does not depend on scheduling.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::design_highpass;
use crate::ingest::{emit_frame_into, microvolts_to_code, PromptEvent};
use crate::model::store::SessionManifest;
use crate::model::{
    invalid, AcquisitionConfig, Condition, ConfigError, Dataset, ProtocolConfig, Recording, Utterance, Word,
    N_WORDS,
};
use crate::seed::rng_for;

const STREAM_ORDER: u64 = 1;
const STREAM_UTTERANCE: u64 = 2;
const STREAM_MIXING: u64 = 3;
const STREAM_PERMUTE: u64 = 4;
const STREAM_ORACLE: u64 = 5;

const CARRIER_CUTOFF_HZ: f64 = 20.0;
const POWERLINE_HZ: f64 = 50.0;
/// Largest adjacent-channel rotation at full repositioning strength.
const MAX_ROTATION: f64 = PI / 3.0;
/// Log-std of the per-channel gain change at full repositioning strength.
const MAX_GAIN_LOG_STD: f64 = 0.6;

/// Activation envelope of one word on one channel. `gain == 0` leaves the
/// channel at baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationTemplate {
    pub onset_s: f64,
    pub duration_s: f64,
    pub gain: f64,
}

impl ActivationTemplate {
    pub const SILENT: Self = Self {
        onset_s: 0.0,
        duration_s: 0.1,
        gain: 0.0,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub condition: Condition,
    /// Activation-to-baseline power ratio at unit template gain.
    pub snr_db: f64,
    pub baseline_uv: f64,
    /// Log-std of the per-utterance, per-channel baseline level.
    pub baseline_jitter: f64,
    pub powerline_amp_uv: f64,
    /// 0 keeps every session's electrode map identical.
    pub repositioning_strength: f64,
    /// Onsets move uniformly within `± onset_jitter_s`.
    pub onset_jitter_s: f64,
    /// Log-std of the per-utterance activation gain.
    pub gain_jitter: f64,
    /// `class_templates[word][channel]`.
    pub class_templates: Vec<Vec<ActivationTemplate>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::vocalized(0)
    }
}

impl SynthConfig {
    pub fn vocalized(seed: u64) -> Self {
        Self {
            seed,
            condition: Condition::Vocalized,
            snr_db: 10.0,
            baseline_uv: 5.0,
            baseline_jitter: 0.35,
            powerline_amp_uv: 20.0,
            repositioning_strength: 0.5,
            onset_jitter_s: 0.1,
            gain_jitter: 0.35,
            class_templates: default_templates(AcquisitionConfig::default().n_active()),
        }
    }

    pub fn silent(seed: u64) -> Self {
        Self {
            condition: Condition::Silent,
            snr_db: 3.0,
            ..Self::vocalized(seed)
        }
    }

    pub fn validate(&self, proto: &ProtocolConfig, n_channels: usize) -> Result<(), ConfigError> {
        if !self.snr_db.is_finite() {
            return Err(invalid("snr_db must be finite"));
        }
        if !(0.0..=1.0).contains(&self.repositioning_strength) {
            return Err(invalid(format!(
                "repositioning_strength {} outside [0, 1]",
                self.repositioning_strength
            )));
        }
        if !(self.baseline_uv > 0.0 && self.baseline_uv.is_finite()) {
            return Err(invalid("baseline_uv must be > 0"));
        }
        for (name, v) in [
            ("powerline_amp_uv", self.powerline_amp_uv),
            ("baseline_jitter", self.baseline_jitter),
            ("onset_jitter_s", self.onset_jitter_s),
            ("gain_jitter", self.gain_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if self.class_templates.len() != N_WORDS {
            return Err(invalid(format!(
                "class_templates has {} words, expected {N_WORDS}",
                self.class_templates.len()
            )));
        }
        for (w, row) in self.class_templates.iter().enumerate() {
            if row.len() != n_channels {
                return Err(invalid(format!(
                    "class_templates[{w}] has {} channels, expected {n_channels}",
                    row.len()
                )));
            }
            for (c, t) in row.iter().enumerate() {
                let ok = t.onset_s >= 0.0
                    && t.duration_s > 0.0
                    && t.gain >= 0.0
                    && t.gain.is_finite()
                    && t.onset_s + t.duration_s <= proto.articulation_s;
                if !ok {
                    return Err(invalid(format!("class_templates[{w}][{c}] = {t:?} is invalid")));
                }
            }
        }
        Ok(())
    }
}

/// Word `w` drives channels `3w`, `3w + 1` and `3w + 5` (mod the channel
/// count) with decreasing gain, starting `0.15 + 0.1 * (w % 4)` s into the
/// utterance.
pub fn default_templates(n_channels: usize) -> Vec<Vec<ActivationTemplate>> {
    (0..N_WORDS)
        .map(|w| {
            let mut row = vec![ActivationTemplate::SILENT; n_channels];
            if n_channels == 0 {
                return row;
            }
            let onset_s = 0.15 + 0.1 * (w % 4) as f64;
            for (offset, gain) in [(0, 1.0), (1, 0.7), (5, 0.5)] {
                let c = (3 * w + offset) % n_channels;
                if row[c].gain == 0.0 {
                    row[c] = ActivationTemplate {
                        onset_s,
                        duration_s: 0.6,
                        gain,
                    };
                }
            }
            row
        })
        .collect()
}

/// Electrode-map perturbation of one session.
#[derive(Clone, Debug, PartialEq)]
struct Mixing {
    /// Applied in order to channel pairs `(c, c + 1)`.
    rotations: Vec<(f64, f64)>,
    gains: Vec<f64>,
}

impl Mixing {
    fn identity(n: usize) -> Self {
        Self {
            rotations: vec![(1.0, 0.0); n.saturating_sub(1)],
            gains: vec![1.0; n],
        }
    }

    fn for_session(seed: u64, session: usize, n: usize, strength: f64) -> Self {
        if session == 0 || strength == 0.0 {
            return Self::identity(n);
        }
        let mut rng = rng_for(seed, &[STREAM_MIXING, session as u64]);
        let rotations = (0..n.saturating_sub(1))
            .map(|_| {
                let theta = strength * MAX_ROTATION * rng.random_range(-1.0..=1.0);
                (theta.cos(), theta.sin())
            })
            .collect();
        let gains = (0..n)
            .map(|_| (strength * MAX_GAIN_LOG_STD * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        Self { rotations, gains }
    }

    fn apply(&self, rows: &mut [Vec<f64>]) {
        for (c, &(cos, sin)) in self.rotations.iter().enumerate() {
            let (head, tail) = rows.split_at_mut(c + 1);
            for (a, b) in head[c].iter_mut().zip(tail[0].iter_mut()) {
                let (x, y) = (*a, *b);
                *a = cos * x - sin * y;
                *b = sin * x + cos * y;
            }
        }
        for (row, &g) in rows.iter_mut().zip(&self.gains) {
            row.iter_mut().for_each(|v| *v *= g);
        }
    }
}

pub fn session_id(index: usize) -> String {
    format!("S{}", index + 1)
}

/// Shuffled word order of one batch: each word `reps_per_batch` times.
fn prompt_order(seed: u64, session: usize, batch: usize, proto: &ProtocolConfig) -> Vec<Word> {
    let mut words: Vec<Word> = (0..proto.utterances_per_batch())
        .map(|i| Word::ALL[i % N_WORDS])
        .collect();
    words.shuffle(&mut rng_for(seed, &[STREAM_ORDER, session as u64, batch as u64]));
    words
}

struct Slot {
    session: usize,
    batch: usize,
    index: usize,
    word: Word,
}

fn slots(seed: u64, proto: &ProtocolConfig) -> Vec<Slot> {
    let mut out = Vec::with_capacity(proto.total_utterances());
    for session in 0..proto.n_sessions {
        for batch in 0..proto.batches_per_session {
            for (index, word) in prompt_order(seed, session, batch, proto).into_iter().enumerate() {
                out.push(Slot {
                    session,
                    batch,
                    index,
                    word,
                });
            }
        }
    }
    out
}

fn to_utterance(slot: &Slot, rows: Vec<Vec<f64>>, sample_rate: f64) -> Utterance {
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as f32).collect())
        .collect();
    Utterance {
        word: slot.word,
        recording: Recording::new(rows, sample_rate).expect("generated samples are finite"),
        session_id: session_id(slot.session),
        batch_id: slot.batch as u32,
        prompt_index: slot.index as u32,
    }
}

fn hann_bump(t: f64, onset: f64, duration: f64) -> f64 {
    let u = (t - onset) / duration;
    if (0.0..=1.0).contains(&u) {
        0.5 * (1.0 - (2.0 * PI * u).cos())
    } else {
        0.0
    }
}

/// Generates a full synthetic dataset following `proto`.
pub fn generate_dataset(
    proto: &ProtocolConfig,
    acq: &AcquisitionConfig,
    sc: &SynthConfig,
) -> Result<Dataset, ConfigError> {
    proto.validate()?;
    acq.validate()?;
    let n_ch = acq.n_active();
    sc.validate(proto, n_ch)?;

    let fs = acq.sample_rate;
    let len = proto.articulation_samples(fs);
    let carrier_hp = design_highpass::<f64>(2, CARRIER_CUTOFF_HZ, fs)
        .map_err(|e| invalid(format!("carrier filter: {e}")))?;
    let mixings: Vec<Mixing> = (0..proto.n_sessions)
        .map(|s| Mixing::for_session(sc.seed, s, n_ch, sc.repositioning_strength))
        .collect();
    let amp = sc.baseline_uv * 10f64.powf(sc.snr_db / 20.0);

    let utterances = slots(sc.seed, proto)
        .par_iter()
        .map(|slot| {
            let mut rng = rng_for(
                sc.seed,
                &[STREAM_UTTERANCE, slot.session as u64, slot.batch as u64, slot.index as u64],
            );
            let templates = &sc.class_templates[slot.word.code()];
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_ch);
            for t in templates {
                let level = sc.baseline_uv * (sc.baseline_jitter * rng.sample::<f64, _>(StandardNormal)).exp();
                let mut x: Vec<f64> = (0..len)
                    .map(|_| level * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if t.gain > 0.0 {
                    let shift = if sc.onset_jitter_s > 0.0 {
                        rng.random_range(-sc.onset_jitter_s..=sc.onset_jitter_s)
                    } else {
                        0.0
                    };
                    let onset = (t.onset_s + shift).max(0.0);
                    let g = t.gain * (sc.gain_jitter * rng.sample::<f64, _>(StandardNormal)).exp();
                    let white: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
                    let carrier = carrier_hp.filter(&white);
                    for (i, (v, c)) in x.iter_mut().zip(carrier).enumerate() {
                        *v += amp * g * hann_bump(i as f64 / fs, onset, t.duration_s) * c;
                    }
                }
                rows.push(x);
            }
            mixings[slot.session].apply(&mut rows);
            for row in rows.iter_mut() {
                let phase = rng.random_range(0.0..2.0 * PI);
                for (i, v) in row.iter_mut().enumerate() {
                    *v += sc.powerline_amp_uv * (2.0 * PI * POWERLINE_HZ * i as f64 / fs + phase).sin();
                }
            }
            to_utterance(slot, rows, fs)
        })
        .collect();

    Ok(Dataset {
        utterances,
        condition: sc.condition,
        acquisition: acq.clone(),
        protocol: proto.clone(),
    })
}

/// Trivially separable dataset: word code `w` adds `w * separation` to
/// channel 0, both as a constant offset and as the amplitude of a 100 Hz
/// tone, on top of 1 µV Gaussian noise. The offset keeps the label readable
/// from raw channel means; the tone keeps it readable after high-pass
/// filtering.
pub fn oracle_dataset(
    proto: &ProtocolConfig,
    acq: &AcquisitionConfig,
    separation: f64,
    seed: u64,
) -> Result<Dataset, ConfigError> {
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(invalid(format!("separation must be > 0, got {separation}")));
    }
    proto.validate()?;
    acq.validate()?;
    let fs = acq.sample_rate;
    let len = proto.articulation_samples(fs);
    let n_ch = acq.n_active();

    let utterances = slots(seed, proto)
        .par_iter()
        .map(|slot| {
            let mut rng = rng_for(
                seed,
                &[STREAM_ORACLE, slot.session as u64, slot.batch as u64, slot.index as u64],
            );
            let mut rows: Vec<Vec<f64>> = (0..n_ch)
                .map(|_| (0..len).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let level = slot.word.code() as f64 * separation;
            for (i, v) in rows[0].iter_mut().enumerate() {
                *v += level * (1.0 + (2.0 * PI * 100.0 * i as f64 / fs).sin());
            }
            to_utterance(slot, rows, fs)
        })
        .collect();

    Ok(Dataset {
        utterances,
        condition: Condition::Vocalized,
        acquisition: acq.clone(),
        protocol: proto.clone(),
    })
}

/// Nearest-offset decoding of an oracle utterance from its raw channel-0 mean.
pub fn oracle_decode(u: &Utterance, separation: f64) -> Option<Word> {
    let ch = u.recording.channel(0);
    let mean = ch.iter().map(|&v| v as f64).sum::<f64>() / ch.len() as f64;
    let code = (mean / separation).round();
    if code < 0.0 {
        return None;
    }
    Word::from_code(code as usize)
}

/// Shuffles labels among the utterances of each batch, keeping per-batch
/// balance but breaking any link between label and signal.
pub fn permute_labels(d: &Dataset, seed: u64) -> Dataset {
    let mut out = d.clone();
    let mut groups: Vec<((String, u32), Vec<usize>)> = Vec::new();
    for (i, u) in d.utterances.iter().enumerate() {
        let key = (u.session_id.clone(), u.batch_id);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    for (g, (_, members)) in groups.iter().enumerate() {
        let mut words: Vec<Word> = members.iter().map(|&i| d.utterances[i].word).collect();
        words.shuffle(&mut rng_for(seed, &[STREAM_PERMUTE, g as u64]));
        for (&i, w) in members.iter().zip(words) {
            out.utterances[i].word = w;
        }
    }
    out
}

/// Encodes one session as a raw packet capture: batches back to back in
/// batch order, prompts in prompt order, each followed by its rest interval
/// of zeros. Channels outside the active set are zero. The returned
/// manifest's schedule gives onsets into the capture.
pub fn emit_capture(d: &Dataset, session_id: &str) -> Result<(Vec<u8>, SessionManifest), ConfigError> {
    let acq = &d.acquisition;
    let fs = acq.sample_rate;
    let stride = d.protocol.prompt_stride_samples(fs);
    let utt_len = d.protocol.articulation_samples(fs);
    let mut members: Vec<&Utterance> = d.session(session_id).collect();
    if members.is_empty() {
        return Err(invalid(format!("no utterances for session {session_id}")));
    }
    members.sort_by_key(|u| (u.batch_id, u.prompt_index));

    let n_rec = acq.n_channels_recorded;
    let mut bytes = Vec::with_capacity(members.len() * stride * crate::ingest::frame_len(n_rec));
    let mut schedule = Vec::with_capacity(members.len());
    let mut codes = vec![0i32; n_rec];
    let mut seq: u16 = 0;
    for (slot, u) in members.iter().enumerate() {
        if u.recording.len() != utt_len || u.recording.n_channels() != acq.n_active() {
            return Err(invalid(format!(
                "utterance {}/{} has shape {}x{}",
                u.batch_id,
                u.prompt_index,
                u.recording.n_channels(),
                u.recording.len()
            )));
        }
        schedule.push(PromptEvent {
            batch_id: u.batch_id,
            prompt_index: u.prompt_index,
            word: u.word,
            onset_sample: (slot * stride) as u64,
        });
        for i in 0..stride {
            codes.iter_mut().for_each(|c| *c = 0);
            if i < utt_len {
                for (k, &ch) in acq.active_channels.iter().enumerate() {
                    codes[ch] = microvolts_to_code(u.recording.channel(k)[i] as f64, acq);
                }
            }
            emit_frame_into(seq, &codes, &mut bytes).expect("codes are clamped to 24 bits");
            seq = seq.wrapping_add(1);
        }
    }

    let manifest = SessionManifest {
        session_id: session_id.to_string(),
        condition: d.condition,
        acquisition: acq.clone(),
        protocol: d.protocol.clone(),
        schedule,
    };
    Ok((bytes, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_dataset;

    fn tiny() -> ProtocolConfig {
        ProtocolConfig {
            reps_per_batch: 1,
            batches_per_session: 2,
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn shape_and_validity() {
        let d = generate_dataset(&tiny(), &AcquisitionConfig::default(), &SynthConfig::vocalized(1)).unwrap();
        assert_eq!(d.len(), 3 * 2 * 8);
        assert!(validate_dataset(&d).is_empty(), "{:?}", validate_dataset(&d));
        let u = &d.utterances[0];
        assert_eq!(u.recording.n_channels(), 14);
        assert_eq!(u.recording.len(), 2000);
    }

    #[test]
    fn deterministic_per_seed() {
        let acq = AcquisitionConfig::default();
        let a = generate_dataset(&tiny(), &acq, &SynthConfig::silent(7)).unwrap();
        let b = generate_dataset(&tiny(), &acq, &SynthConfig::silent(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&tiny(), &acq, &SynthConfig::silent(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_strength_means_identity_mixing() {
        for s in 0..3 {
            assert_eq!(Mixing::for_session(3, s, 14, 0.0), Mixing::identity(14));
        }
        assert_ne!(Mixing::for_session(3, 1, 14, 0.5), Mixing::identity(14));
        assert_eq!(Mixing::for_session(3, 0, 14, 1.0), Mixing::identity(14));
    }

    #[test]
    fn rotations_preserve_energy() {
        let mut m = Mixing::for_session(9, 2, 4, 1.0);
        m.gains = vec![1.0; 4];
        let mut rows = vec![vec![1.0, -2.0], vec![0.5, 3.0], vec![0.0, 1.0], vec![4.0, 0.0]];
        let before: f64 = rows.iter().flatten().map(|v| v * v).sum();
        m.apply(&mut rows);
        let after: f64 = rows.iter().flatten().map(|v| v * v).sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let acq = AcquisitionConfig::default();
        let mut sc = SynthConfig::vocalized(0);
        sc.repositioning_strength = 1.5;
        assert!(generate_dataset(&tiny(), &acq, &sc).is_err());
        let mut sc = SynthConfig::vocalized(0);
        sc.class_templates[2][3] = ActivationTemplate {
            onset_s: 3.8,
            duration_s: 0.5,
            gain: 1.0,
        };
        assert!(generate_dataset(&tiny(), &acq, &sc).is_err());
        let mut sc = SynthConfig::vocalized(0);
        sc.snr_db = f64::NAN;
        assert!(generate_dataset(&tiny(), &acq, &sc).is_err());
        assert!(oracle_dataset(&tiny(), &acq, 0.0, 0).is_err());
    }

    #[test]
    fn oracle_labels_decode_from_raw_means() {
        let d = oracle_dataset(&tiny(), &AcquisitionConfig::default(), 1000.0, 2).unwrap();
        assert!(validate_dataset(&d).is_empty());
        for u in &d.utterances {
            assert_eq!(oracle_decode(u, 1000.0), Some(u.word));
        }
    }

    #[test]
    fn permutation_keeps_batch_balance() {
        let d = generate_dataset(&tiny(), &AcquisitionConfig::default(), &SynthConfig::vocalized(0)).unwrap();
        let p = permute_labels(&d, 5);
        assert!(validate_dataset(&p).is_empty());
        assert_ne!(d.labels(), p.labels());
        assert_eq!(p, permute_labels(&d, 5));
    }

    #[test]
    fn templates_fit_in_analysis_window() {
        for row in default_templates(14) {
            assert_eq!(row.iter().filter(|t| t.gain > 0.0).count(), 3);
            assert!(row.iter().all(|t| t.onset_s + t.duration_s <= 1.4));
        }
    }
}

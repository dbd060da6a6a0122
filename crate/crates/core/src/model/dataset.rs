use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AcquisitionConfig, Condition, ProtocolConfig, Recording, Word, N_WORDS};

/// One prompted articulation with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub word: Word,
    /// Active channels x articulation samples, f32 microvolts.
    pub recording: Recording<f32>,
    pub session_id: String,
    pub batch_id: u32,
    /// Position of the prompt within its batch.
    pub prompt_index: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
    pub condition: Condition,
    pub acquisition: AcquisitionConfig,
    pub protocol: ProtocolConfig,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Distinct session ids in order of first appearance.
    pub fn session_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for u in &self.utterances {
            if !out.iter().any(|s| s == &u.session_id) {
                out.push(u.session_id.clone());
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<Word> {
        self.utterances.iter().map(|u| u.word).collect()
    }

    /// Utterances of one session, in stored order.
    pub fn session(&self, session_id: &str) -> impl Iterator<Item = &Utterance> {
        let id = session_id.to_string();
        self.utterances.iter().filter(move |u| u.session_id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// A word's count in a batch differs from `reps_per_batch`.
    CountImbalance { expected: usize, found: usize },
    /// Recording length differs from the articulation length.
    Length { expected: usize, found: usize },
    ChannelCount { expected: usize, found: usize },
    /// Prompt order of the batch is sorted by word code.
    SortedPromptOrder,
    DuplicatePromptIndex { prompt_index: u32 },
    SampleRate { expected: String, found: String },
}

/// A broken dataset invariant, located by session/batch/word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub session_id: String,
    pub batch_id: u32,
    pub word: Option<Word>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "session {} batch {}", self.session_id, self.batch_id)?;
        if let Some(w) = self.word {
            write!(f, " word {w}")?;
        }
        match &self.kind {
            ViolationKind::CountImbalance { expected, found } => {
                write!(f, ": count imbalance, expected {expected} found {found}")
            }
            ViolationKind::Length { expected, found } => {
                write!(f, ": length {found} samples, expected {expected}")
            }
            ViolationKind::ChannelCount { expected, found } => {
                write!(f, ": {found} channels, expected {expected}")
            }
            ViolationKind::SortedPromptOrder => write!(f, ": prompt order is sorted"),
            ViolationKind::DuplicatePromptIndex { prompt_index } => {
                write!(f, ": prompt index {prompt_index} repeated")
            }
            ViolationKind::SampleRate { expected, found } => {
                write!(f, ": sample rate {found}, expected {expected}")
            }
        }
    }
}

/// Checks every dataset invariant. Returns one entry per broken rule.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let rate = d.acquisition.sample_rate;
    let expected_len = d.protocol.articulation_samples(rate);
    let expected_channels = d.acquisition.n_active();

    let mut batches: BTreeMap<(String, u32), Vec<&Utterance>> = BTreeMap::new();
    for u in &d.utterances {
        batches
            .entry((u.session_id.clone(), u.batch_id))
            .or_default()
            .push(u);
    }

    for ((session_id, batch_id), mut members) in batches {
        let at = |word: Option<Word>, kind: ViolationKind| Violation {
            session_id: session_id.clone(),
            batch_id,
            word,
            kind,
        };

        for u in &members {
            if u.recording.len() != expected_len {
                out.push(at(
                    Some(u.word),
                    ViolationKind::Length {
                        expected: expected_len,
                        found: u.recording.len(),
                    },
                ));
            }
            if u.recording.n_channels() != expected_channels {
                out.push(at(
                    Some(u.word),
                    ViolationKind::ChannelCount {
                        expected: expected_channels,
                        found: u.recording.n_channels(),
                    },
                ));
            }
            if u.recording.sample_rate() != rate {
                out.push(at(
                    Some(u.word),
                    ViolationKind::SampleRate {
                        expected: rate.to_string(),
                        found: u.recording.sample_rate().to_string(),
                    },
                ));
            }
        }

        let mut counts = [0usize; N_WORDS];
        for u in &members {
            counts[u.word.code()] += 1;
        }
        for w in Word::ALL {
            if counts[w.code()] != d.protocol.reps_per_batch {
                out.push(at(
                    Some(w),
                    ViolationKind::CountImbalance {
                        expected: d.protocol.reps_per_batch,
                        found: counts[w.code()],
                    },
                ));
            }
        }

        members.sort_by_key(|u| u.prompt_index);
        for pair in members.windows(2) {
            if pair[0].prompt_index == pair[1].prompt_index {
                out.push(at(
                    None,
                    ViolationKind::DuplicatePromptIndex {
                        prompt_index: pair[0].prompt_index,
                    },
                ));
            }
        }
        let distinct = counts.iter().filter(|&&c| c > 0).count();
        if distinct > 1 && members.windows(2).all(|p| p[0].word <= p[1].word) {
            out.push(at(None, ViolationKind::SortedPromptOrder));
        }
    }
    out
}

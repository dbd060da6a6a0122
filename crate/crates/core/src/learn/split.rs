//! Train/test partitions for the three evaluation schemes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::model::{Dataset, ProtocolConfig, Word, N_WORDS};
use crate::seed::rng_for;

/// Per-sample provenance needed to build splits.
pub trait SampleIndex {
    fn n_samples(&self) -> usize;
    fn word(&self, i: usize) -> Word;
    fn session(&self, i: usize) -> &str;
    fn batch(&self, i: usize) -> u32;
    fn protocol(&self) -> &ProtocolConfig;

    /// Distinct sessions in order of first appearance.
    fn sessions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for i in 0..self.n_samples() {
            let s = self.session(i);
            if !out.iter().any(|o| o == s) {
                out.push(s.to_string());
            }
        }
        out
    }
}

impl SampleIndex for Dataset {
    fn n_samples(&self) -> usize {
        self.utterances.len()
    }
    fn word(&self, i: usize) -> Word {
        self.utterances[i].word
    }
    fn session(&self, i: usize) -> &str {
        &self.utterances[i].session_id
    }
    fn batch(&self, i: usize) -> u32 {
        self.utterances[i].batch_id
    }
    fn protocol(&self) -> &ProtocolConfig {
        &self.protocol
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// e.g. `session S1 batch 3`, `fold 2`, `held-out S2`.
    pub name: String,
    /// The session this split belongs to or holds out, if any.
    pub session: Option<String>,
    /// Sorted sample indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Session-specific cross-validation: fold k tests batch k of `session_id`
/// and trains on the session's other batches.
pub fn session_7fold<D: SampleIndex + ?Sized>(d: &D, session_id: &str) -> Result<Vec<Split>, LearnError> {
    let members: Vec<usize> = (0..d.n_samples()).filter(|&i| d.session(i) == session_id).collect();
    if members.is_empty() {
        return Err(LearnError::UnknownSession(session_id.to_string()));
    }
    let batches: BTreeSet<u32> = members.iter().map(|&i| d.batch(i)).collect();
    let expected = d.protocol().batches_per_session;
    if batches.len() != expected {
        return Err(LearnError::MissingBatch {
            session: session_id.to_string(),
            expected,
            found: batches.len(),
        });
    }
    Ok(batches
        .iter()
        .map(|&b| {
            let (test, train): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| d.batch(i) == b);
            Split {
                name: format!("session {session_id} batch {b}"),
                session: Some(session_id.to_string()),
                train,
                test,
            }
        })
        .collect())
}

/// Session-specific folds for every session, session by session.
pub fn all_session_folds<D: SampleIndex + ?Sized>(d: &D) -> Result<Vec<Split>, LearnError> {
    let mut out = Vec::new();
    for s in d.sessions() {
        out.extend(session_7fold(d, &s)?);
    }
    Ok(out)
}

/// Stratified k-fold over all samples. Indices are shuffled by `seed`, then
/// each label's samples are dealt round-robin to the folds, so per-fold
/// label counts differ by at most one.
pub fn stratified_kfold<D: SampleIndex + ?Sized>(d: &D, k: usize, seed: u64) -> Result<Vec<Split>, LearnError> {
    if k < 2 {
        return Err(LearnError::InvalidParams(format!("need k >= 2 folds, got {k}")));
    }
    let mut counts = [0usize; N_WORDS];
    for i in 0..d.n_samples() {
        counts[d.word(i).code()] += 1;
    }
    for w in Word::ALL {
        if counts[w.code()] < k {
            return Err(LearnError::TooFewPerLabel {
                word: w,
                count: counts[w.code()],
                needed: k,
            });
        }
    }

    let mut order: Vec<usize> = (0..d.n_samples()).collect();
    order.shuffle(&mut rng_for(seed, &[0x5F01D]));
    let mut fold_of = vec![0usize; d.n_samples()];
    let mut dealt = [0usize; N_WORDS];
    for &i in &order {
        let c = d.word(i).code();
        fold_of[i] = dealt[c] % k;
        dealt[c] += 1;
    }

    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..d.n_samples()).partition(|&i| fold_of[i] == f);
            Split {
                name: format!("fold {f}"),
                session: None,
                train,
                test,
            }
        })
        .collect())
}

/// Global stratified 5-fold cross-validation.
pub fn global_5fold<D: SampleIndex + ?Sized>(d: &D, seed: u64) -> Result<Vec<Split>, LearnError> {
    stratified_kfold(d, 5, seed)
}

/// Leave-one-session-out: split k tests session k, trains on the rest.
pub fn loso_splits<D: SampleIndex + ?Sized>(d: &D) -> Result<Vec<Split>, LearnError> {
    let sessions = d.sessions();
    let expected = d.protocol().n_sessions;
    if sessions.len() != expected {
        return Err(LearnError::WrongSessionCount {
            expected,
            found: sessions.len(),
        });
    }
    Ok(sessions
        .iter()
        .map(|s| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..d.n_samples()).partition(|&i| d.session(i) == s);
            Split {
                name: format!("held-out {s}"),
                session: Some(s.clone()),
                train,
                test,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Metadata-only stand-in with a full-size protocol layout.
    struct Meta {
        rows: Vec<(Word, String, u32)>,
        proto: ProtocolConfig,
    }

    impl SampleIndex for Meta {
        fn n_samples(&self) -> usize {
            self.rows.len()
        }
        fn word(&self, i: usize) -> Word {
            self.rows[i].0
        }
        fn session(&self, i: usize) -> &str {
            &self.rows[i].1
        }
        fn batch(&self, i: usize) -> u32 {
            self.rows[i].2
        }
        fn protocol(&self) -> &ProtocolConfig {
            &self.proto
        }
    }

    fn meta(sessions: usize, batches: u32) -> Meta {
        let proto = ProtocolConfig::default();
        let mut rows = Vec::new();
        for s in 0..sessions {
            for b in 0..batches {
                for r in 0..proto.utterances_per_batch() {
                    rows.push((Word::from_code(r % 8).unwrap(), format!("S{}", s + 1), b));
                }
            }
        }
        Meta { rows, proto }
    }

    #[test]
    fn session_folds() {
        let m = meta(3, 7);
        let folds = session_7fold(&m, "S2").unwrap();
        assert_eq!(folds.len(), 7);
        for f in &folds {
            assert_eq!(f.test.len(), 160);
            assert_eq!(f.train.len(), 960);
        }
        assert!(matches!(
            session_7fold(&meta(1, 6), "S1"),
            Err(LearnError::MissingBatch { expected: 7, found: 6, .. })
        ));
        assert!(matches!(
            session_7fold(&m, "S9"),
            Err(LearnError::UnknownSession(_))
        ));
        assert_eq!(all_session_folds(&m).unwrap().len(), 21);
    }

    #[test]
    fn stratified_counts_are_exact() {
        let m = meta(3, 7);
        let a = global_5fold(&m, 1).unwrap();
        for f in &a {
            assert_eq!(f.test.len(), 672);
            let mut per = [0; 8];
            f.test.iter().for_each(|&i| per[m.word(i).code()] += 1);
            assert_eq!(per, [84; 8]);
        }
        let b = global_5fold(&m, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, global_5fold(&m, 1).unwrap());
    }

    #[test]
    fn too_few_per_label() {
        let mut m = meta(1, 1);
        m.rows.truncate(8 * 4);
        assert!(matches!(
            global_5fold(&m, 0),
            Err(LearnError::TooFewPerLabel { needed: 5, count: 4, .. })
        ));
    }

    #[test]
    fn loso() {
        let m = meta(3, 7);
        let s = loso_splits(&m).unwrap();
        assert_eq!(s.len(), 3);
        for sp in &s {
            assert_eq!(sp.test.len(), 1120);
            assert_eq!(sp.train.len(), 2240);
        }
        assert!(matches!(
            loso_splits(&meta(2, 7)),
            Err(LearnError::WrongSessionCount { expected: 3, found: 2 })
        ));
    }
}

//! Featurize, split, fit, predict and aggregate.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, ForestParams};
use super::split::{all_session_folds, global_5fold, loso_splits, SampleIndex, Split};
use super::LearnError;
use crate::features::Featurizer;
use crate::model::{Dataset, PipelineConfig, ProtocolConfig, Word, N_WORDS};
use crate::seed::derive_seed;
use crate::Result;

/// Expected accuracy of uniform guessing over eight balanced words.
pub const CHANCE_LEVEL: f64 = 1.0 / N_WORDS as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "SESSION_7FOLD")]
    Session7Fold,
    #[serde(rename = "GLOBAL_5FOLD")]
    Global5Fold,
    #[serde(rename = "LOSO")]
    Loso,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Session7Fold, Scheme::Global5Fold, Scheme::Loso];

    /// Command-line spelling.
    pub fn flag(self) -> &'static str {
        match self {
            Scheme::Session7Fold => "session",
            Scheme::Global5Fold => "global",
            Scheme::Loso => "loso",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Session7Fold => "SESSION_7FOLD",
            Scheme::Global5Fold => "GLOBAL_5FOLD",
            Scheme::Loso => "LOSO",
        }
    }

    pub fn splits<D: SampleIndex + ?Sized>(self, d: &D, seed: u64) -> Result<Vec<Split>, LearnError> {
        match self {
            Scheme::Session7Fold => all_session_folds(d),
            Scheme::Global5Fold => global_5fold(d, seed),
            Scheme::Loso => loso_splits(d),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| s.eq_ignore_ascii_case(k.flag()) || s.eq_ignore_ascii_case(k.label()))
            .ok_or_else(|| format!("unknown scheme {s:?}; expected session, global or loso"))
    }
}

/// One feature vector per utterance plus the provenance needed for splits.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub features: Vec<Vec<f64>>,
    pub words: Vec<Word>,
    pub session_ids: Vec<String>,
    pub batch_ids: Vec<u32>,
    pub protocol: ProtocolConfig,
}

impl SampleIndex for FeatureTable {
    fn n_samples(&self) -> usize {
        self.features.len()
    }
    fn word(&self, i: usize) -> Word {
        self.words[i]
    }
    fn session(&self, i: usize) -> &str {
        &self.session_ids[i]
    }
    fn batch(&self, i: usize) -> u32 {
        self.batch_ids[i]
    }
    fn protocol(&self) -> &ProtocolConfig {
        &self.protocol
    }
}

/// Featurizes every utterance independently, in dataset order.
pub fn featurize_dataset(d: &Dataset, pipeline: &PipelineConfig) -> Result<FeatureTable> {
    let fz = Featurizer::<f64>::new(pipeline, d.acquisition.sample_rate)?;
    let features = d
        .utterances
        .par_iter()
        .map(|u| fz.featurize(u).map(|v| v.into_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        features,
        words: d.utterances.iter().map(|u| u.word).collect(),
        session_ids: d.utterances.iter().map(|u| u.session_id.clone()).collect(),
        batch_ids: d.utterances.iter().map(|u| u.batch_id).collect(),
        protocol: d.protocol.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub name: String,
    pub session: Option<String>,
    pub train_size: usize,
    pub test_size: usize,
    /// `confusion[true][predicted]`, indexed by word code.
    pub confusion: [[u32; N_WORDS]; N_WORDS],
    /// `None` for labels absent from the test set.
    pub per_label_accuracy: [Option<f64>; N_WORDS],
    pub overall_accuracy: f64,
}

impl FoldResult {
    pub fn from_confusion(
        name: String,
        session: Option<String>,
        train_size: usize,
        confusion: [[u32; N_WORDS]; N_WORDS],
    ) -> Self {
        let mut per_label_accuracy = [None; N_WORDS];
        let (mut hits, mut total) = (0u64, 0u64);
        for (i, row) in confusion.iter().enumerate() {
            let n: u32 = row.iter().sum();
            if n > 0 {
                per_label_accuracy[i] = Some(row[i] as f64 / n as f64);
            }
            hits += row[i] as u64;
            total += n as u64;
        }
        Self {
            name,
            session,
            train_size,
            test_size: total as usize,
            confusion,
            per_label_accuracy,
            overall_accuracy: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
        }
    }
}

/// Mean and population std across folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_folds: usize,
    pub per_label_mean: [Option<f64>; N_WORDS],
    pub per_label_std: [Option<f64>; N_WORDS],
    pub overall_mean: f64,
    pub overall_std: f64,
    /// Population std of the eight per-label means.
    pub overall_std_across_labels: f64,
    /// Sum of the fold confusion matrices.
    pub pooled_confusion: [[u32; N_WORDS]; N_WORDS],
}

impl Aggregate {
    pub fn from_folds(folds: &[FoldResult]) -> Self {
        let mut per_label_mean = [None; N_WORDS];
        let mut per_label_std = [None; N_WORDS];
        for c in 0..N_WORDS {
            let v: Vec<f64> = folds.iter().filter_map(|f| f.per_label_accuracy[c]).collect();
            if let Some((m, s)) = mean_std(&v) {
                per_label_mean[c] = Some(m);
                per_label_std[c] = Some(s);
            }
        }
        let overall: Vec<f64> = folds.iter().map(|f| f.overall_accuracy).collect();
        let (overall_mean, overall_std) = mean_std(&overall).unwrap_or((0.0, 0.0));
        let label_means: Vec<f64> = per_label_mean.iter().flatten().copied().collect();
        let overall_std_across_labels = mean_std(&label_means).map_or(0.0, |(_, s)| s);
        let mut pooled_confusion = [[0u32; N_WORDS]; N_WORDS];
        for f in folds {
            for (dst, src) in pooled_confusion.iter_mut().zip(&f.confusion) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        Self {
            n_folds: folds.len(),
            per_label_mean,
            per_label_std,
            overall_mean,
            overall_std,
            overall_std_across_labels,
            pooled_confusion,
        }
    }
}

/// Session-specific aggregate for the session scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: String,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub seed: u64,
    pub forest: ForestParams,
    pub n_samples: usize,
    pub feature_dim: usize,
    pub chance_level: f64,
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
    /// Per-session breakdown; filled for the session scheme only.
    pub per_session: Vec<SessionSummary>,
}

/// Featurizes `d` and evaluates it under `scheme`.
pub fn evaluate(d: &Dataset, scheme: Scheme, p: &ForestParams, pipeline: &PipelineConfig) -> Result<EvalReport> {
    let table = featurize_dataset(d, pipeline)?;
    Ok(evaluate_table(&table, scheme, p)?)
}

/// Evaluates a precomputed feature table. Fold `k` fits its forest with seed
/// `derive_seed(p.seed, [k])`; the global scheme shuffles with `p.seed`.
pub fn evaluate_table(t: &FeatureTable, scheme: Scheme, p: &ForestParams) -> Result<EvalReport, LearnError> {
    if t.features.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    let splits = scheme.splits(t, p.seed)?;
    let folds = splits
        .par_iter()
        .enumerate()
        .map(|(k, s)| run_fold(t, s, p, derive_seed(p.seed, &[k as u64])))
        .collect::<Result<Vec<_>, _>>()?;

    let per_session = if scheme == Scheme::Session7Fold {
        t.sessions()
            .into_iter()
            .map(|s| {
                let mine: Vec<FoldResult> = folds
                    .iter()
                    .filter(|f| f.session.as_deref() == Some(s.as_str()))
                    .cloned()
                    .collect();
                SessionSummary {
                    session: s,
                    aggregate: Aggregate::from_folds(&mine),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(EvalReport {
        scheme,
        seed: p.seed,
        forest: p.clone(),
        n_samples: t.features.len(),
        feature_dim: t.features[0].len(),
        chance_level: CHANCE_LEVEL,
        aggregate: Aggregate::from_folds(&folds),
        folds,
        per_session,
    })
}

fn run_fold(t: &FeatureTable, s: &Split, p: &ForestParams, seed: u64) -> Result<FoldResult, LearnError> {
    let x: Vec<Vec<f64>> = s.train.iter().map(|&i| t.features[i].clone()).collect();
    let y: Vec<Word> = s.train.iter().map(|&i| t.words[i]).collect();
    let params = ForestParams { seed, ..p.clone() };
    let model = fit_forest(&x, &y, &params)?;
    let mut confusion = [[0u32; N_WORDS]; N_WORDS];
    for &i in &s.test {
        let pred = model.predict(&t.features[i])?;
        confusion[t.words[i].code()][pred.word.code()] += 1;
    }
    Ok(FoldResult::from_confusion(
        s.name.clone(),
        s.session.clone(),
        s.train.len(),
        confusion,
    ))
}

fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}

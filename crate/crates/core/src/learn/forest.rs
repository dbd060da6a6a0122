//! Bagged ensemble of CART trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, GrowParams};
use super::LearnError;
use crate::model::{Word, N_WORDS};
use crate::seed::rng_for;
use crate::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
}

/// Features considered at each split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(n_features))`, at least 1.
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub criterion: Criterion,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), LearnError> {
        if self.n_trees == 0 {
            return Err(LearnError::InvalidParams("n_trees must be >= 1".into()));
        }
        let k = self.max_features.resolve(n_features);
        if k == 0 || k > n_features {
            return Err(LearnError::InvalidParams(format!(
                "max_features {k} outside 1..={n_features}"
            )));
        }
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(LearnError::InvalidParams(
                "min_samples_split must be >= 2 and min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub trees: Vec<DecisionTree<T>>,
    pub params: ForestParams,
    pub n_classes: usize,
    pub feature_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub word: Word,
    pub proba: [f64; N_WORDS],
}

/// Fits an 8-class forest. Tree `t` draws its bootstrap sample and split
/// features from a generator keyed by `(seed, t)`, so the model does not
/// depend on how trees are scheduled across threads.
pub fn fit_forest<T: Scalar>(
    x: &[Vec<T>],
    y: &[Word],
    p: &ForestParams,
) -> Result<ForestModel<T>, LearnError> {
    let codes: Vec<usize> = y.iter().map(|w| w.code()).collect();
    fit_classes(x, &codes, N_WORDS, p)
}

/// Generic multi-class fit on integer labels `< n_classes`.
pub fn fit_classes<T: Scalar>(
    x: &[Vec<T>],
    y: &[usize],
    n_classes: usize,
    p: &ForestParams,
) -> Result<ForestModel<T>, LearnError> {
    if x.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(LearnError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != dim) {
        return Err(LearnError::DimensionMismatch {
            expected: dim,
            got: row.len(),
        });
    }
    if dim == 0 {
        return Err(LearnError::InvalidParams("zero-dimensional features".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(LearnError::InvalidParams(format!("label {bad} >= {n_classes} classes")));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::InvalidParams("non-finite feature value".into()));
    }
    p.validate(dim)?;

    let grow = GrowParams {
        n_classes,
        max_features: p.max_features.resolve(dim),
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
        min_samples_leaf: p.min_samples_leaf,
    };
    let n = x.len();
    let trees = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(p.seed, &[t as u64]);
            let samples: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::grow(x, y, samples, &grow, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        params: p.clone(),
        n_classes,
        feature_dim: dim,
    })
}

impl<T: Scalar> ForestModel<T> {
    /// Mean over trees of the leaf class frequencies.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<f64>, LearnError> {
        if x.len() != self.feature_dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        let mut proba = vec![0.0f64; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_counts(x);
            let total: u32 = counts.iter().sum();
            for (p, &c) in proba.iter_mut().zip(counts) {
                *p += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        proba.iter_mut().for_each(|p| *p /= n);
        Ok(proba)
    }

    /// Argmax class, ties to the lowest code.
    pub fn predict_class(&self, x: &[T]) -> Result<usize, LearnError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<Prediction, LearnError> {
        let p = self.predict_proba(x)?;
        let mut proba = [0.0; N_WORDS];
        for (dst, src) in proba.iter_mut().zip(&p) {
            *dst = *src;
        }
        let word = Word::from_code(argmax(&p)).ok_or(LearnError::InvalidParams(
            "model has more classes than words".into(),
        ))?;
        Ok(Prediction { word, proba })
    }
}

/// Predicted word and class probabilities for one feature vector.
pub fn predict<T: Scalar>(m: &ForestModel<T>, x: &[T]) -> Result<Prediction, LearnError> {
    m.predict(x)
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

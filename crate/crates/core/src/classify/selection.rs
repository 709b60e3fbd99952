//! Classifier × feature-space comparison on the shared split.

use std::fmt::Write as _;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train_classifier, ClassifierKind, Hyperparams};
use super::pipeline::Split;
use super::rebalance::smote;
use crate::aspect::{Aspect, Sentiment};
use crate::evaluate::{classification_report, SENTIMENT_CLASSES};
use crate::ingest::AspectLabelSet;
use crate::vectorize::FeatureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetup {
    Tfidf,
    /// TF-IDF with SMOTE applied to the training rows.
    TfidfSmote,
    Embedding,
}

impl FeatureSetup {
    pub const ALL: [FeatureSetup; 3] = [FeatureSetup::Tfidf, FeatureSetup::TfidfSmote, FeatureSetup::Embedding];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSetup::Tfidf => "tfidf",
            FeatureSetup::TfidfSmote => "tfidf_smote",
            FeatureSetup::Embedding => "embedding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub classifier: ClassifierKind,
    pub features: FeatureSetup,
    pub aspect: Aspect,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    /// Why the combination produced no score.
    pub note: Option<String>,
}

/// Trains every classifier on every feature setup for each aspect's
/// 3-class task (NA read as neutral) and scores it on the validation rows.
pub fn model_selection(
    tfidf: ArrayView2<'_, f64>,
    embedding: ArrayView2<'_, f64>,
    labels: &[AspectLabelSet],
    split: &Split,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Vec<SelectionRow> {
    let mut jobs = Vec::new();
    for kind in ClassifierKind::ALL {
        for setup in FeatureSetup::ALL {
            for aspect in Aspect::ALL {
                jobs.push((kind, setup, aspect));
            }
        }
    }
    let label = |i: usize, a: Aspect| labels[i].get(a).map_or(0, Sentiment::value);
    jobs.par_iter()
        .map(|&(kind, setup, aspect)| {
            let (x, space) = match setup {
                FeatureSetup::Embedding => (embedding, FeatureSpace::Embedding),
                _ => (tfidf, FeatureSpace::Tfidf),
            };
            let y_train: Vec<i32> = split.train.iter().map(|&i| label(i, aspect)).collect();
            let y_val: Vec<i32> = split.validation.iter().map(|&i| label(i, aspect)).collect();
            let x_train = x.select(Axis(0), &split.train);
            let x_val = x.select(Axis(0), &split.validation);
            let outcome = (|| {
                let (xt, yt) = if setup == FeatureSetup::TfidfSmote {
                    smote(x_train.view(), &y_train, 5, seed)?
                } else {
                    (x_train, y_train)
                };
                let model = train_classifier(kind, xt.view(), &yt, space, hyperparams, seed)?;
                let pred = model.predict(x_val.view())?;
                classification_report(&y_val, &pred, &SENTIMENT_CLASSES)
            })();
            match outcome {
                Ok(r) => SelectionRow {
                    classifier: kind,
                    features: setup,
                    aspect,
                    accuracy: Some(r.accuracy),
                    macro_f1: Some(r.macro_f1()),
                    note: None,
                },
                Err(e) => SelectionRow {
                    classifier: kind,
                    features: setup,
                    aspect,
                    accuracy: None,
                    macro_f1: None,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Per-row results followed by the mean accuracy of each combination.
pub fn selection_table_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::from("classifier,features,aspect,accuracy,macro_f1,note\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    for r in rows {
        let note = r.note.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.classifier.name(),
            r.features.name(),
            r.aspect.name(),
            opt(r.accuracy),
            opt(r.macro_f1),
            note
        );
    }
    for kind in ClassifierKind::ALL {
        for setup in FeatureSetup::ALL {
            let acc: Vec<f64> = rows
                .iter()
                .filter(|r| r.classifier == kind && r.features == setup)
                .filter_map(|r| r.accuracy)
                .collect();
            let mean = (acc.len() == Aspect::ALL.len()).then(|| acc.iter().sum::<f64>() / acc.len() as f64);
            let _ = writeln!(out, "{},{},mean,{},,", kind.name(), setup.name(), opt(mean));
        }
    }
    out
}

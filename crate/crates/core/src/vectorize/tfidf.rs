use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{l2_normalize, FeatureSpace, FeatureVector};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 400;

/// Smoothed TF-IDF over the most frequent corpus terms.
///
/// `idf(t) = ln((1 + N) / (1 + df_t)) + 1`; columns are in lexicographic
/// token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfFile", into = "TfidfFile")]
pub struct TfidfModel {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

#[derive(Serialize, Deserialize)]
struct TfidfFile {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl From<TfidfFile> for TfidfModel {
    fn from(f: TfidfFile) -> Self {
        let index = f
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfModel {
            vocabulary: f.vocabulary,
            index,
            idf: f.idf,
            doc_count: f.doc_count,
        }
    }
}

impl From<TfidfModel> for TfidfFile {
    fn from(m: TfidfModel) -> Self {
        TfidfFile {
            vocabulary: m.vocabulary,
            idf: m.idf,
            doc_count: m.doc_count,
        }
    }
}

pub fn fit_tfidf(corpus: &[Vec<String>], max_features: usize) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
    }
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for doc in corpus {
        let mut seen: Vec<&str> = Vec::with_capacity(doc.len());
        for token in doc {
            counts.entry(token).or_default().0 += 1;
            seen.push(token);
        }
        seen.sort_unstable();
        seen.dedup();
        for token in seen {
            counts.get_mut(token).expect("counted above").1 += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    let mut ranked: Vec<(&str, u64, u64)> = counts.into_iter().map(|(t, (c, d))| (t, c, d)).collect();
    // Stable sort keeps the lexicographic order among equal counts.
    ranked.sort_by_key(|a| std::cmp::Reverse(a.1));
    ranked.truncate(max_features);
    ranked.sort_by(|a, b| a.0.cmp(b.0));

    let n = corpus.len() as f64;
    let vocabulary: Vec<String> = ranked.iter().map(|r| r.0.to_string()).collect();
    let idf = ranked
        .iter()
        .map(|&(_, _, df)| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
        .collect();
    Ok(TfidfFile {
        vocabulary,
        idf,
        doc_count: corpus.len(),
    }
    .into())
}

impl TfidfModel {
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Raw counts times idf, L2-normalized. Unknown tokens are ignored.
    pub fn transform(&self, doc: &[String]) -> FeatureVector {
        let mut values = vec![0.0; self.dim()];
        for token in doc {
            if let Some(col) = self.column(token) {
                values[col] += 1.0;
            }
        }
        for (v, idf) in values.iter_mut().zip(&self.idf) {
            *v *= idf;
        }
        l2_normalize(&mut values);
        FeatureVector {
            space: FeatureSpace::Tfidf,
            values,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TfidfModel> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.iter().map(|t| t.to_string()).collect())
            .collect()
    }

    #[test]
    fn idf_hand_values() {
        let model = fit_tfidf(&docs(&[&["a", "b", "a"], &["b", "c"]]), 400).unwrap();
        assert_eq!(model.vocabulary(), ["a", "b", "c"]);
        assert_abs_diff_eq!(model.idf()[0], 1.405_465_108_108_164_4, epsilon = 1e-12);
        assert_abs_diff_eq!(model.idf()[1], 1.0, epsilon = 1e-15);

        let v = model.transform(&docs(&[&["a", "a", "b"]])[0]);
        assert_abs_diff_eq!(v.values[0], 0.9422, epsilon = 1e-4);
        assert_abs_diff_eq!(v.values[1], 0.3352, epsilon = 1e-4);
        assert_eq!(v.values[2], 0.0);
    }

    #[test]
    fn oov_only_doc_is_zero() {
        let model = fit_tfidf(&docs(&[&["a"], &["b"]]), 400).unwrap();
        let v = model.transform(&docs(&[&["zzz"]])[0]);
        assert_eq!(v.norm(), 0.0);
        let unit = model.transform(&docs(&[&["a"]])[0]);
        assert_eq!(unit.values, vec![1.0, 0.0]);
    }

    #[test]
    fn vocabulary_truncates_to_most_frequent() {
        let corpus: Vec<Vec<String>> = (0..500)
            .map(|i| {
                let mut d = vec![format!("t{i:03}")];
                if i < 10 {
                    d.push(format!("t{i:03}"));
                }
                d
            })
            .collect();
        let model = fit_tfidf(&corpus, 400).unwrap();
        assert_eq!(model.dim(), 400);
        // Frequent terms survive; ties resolve lexicographically.
        assert!(model.column("t000").is_some());
        assert!(model.column("t399").is_some());
        assert!(model.column("t400").is_none());
    }

    #[test]
    fn all_empty_docs_is_error() {
        let err = fit_tfidf(&[vec![], vec![]], 400).unwrap_err();
        assert!(err.to_string().contains("empty vocabulary"));
    }

    #[test]
    fn json_round_trip() {
        let model = fit_tfidf(&docs(&[&["x", "y"], &["y"]]), 400).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"vocabulary\"") && json.contains("\"doc_count\""));
        let back: TfidfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.column("y"), Some(1));
    }
}

//! Collapsed-Gibbs LDA over sentiment-grouped restaurant review sets.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ingest::CorpusRecord;
use crate::rng::{self, stream_for_key};
use crate::textprep::{TextPipeline, TokenList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentGroup {
    Positive,
    Neutral,
    Negative,
}

impl SentimentGroup {
    pub const ALL: [SentimentGroup; 3] = [SentimentGroup::Positive, SentimentGroup::Neutral, SentimentGroup::Negative];

    pub fn from_stars(stars: u8) -> SentimentGroup {
        match stars {
            s if s > 3 => SentimentGroup::Positive,
            3 => SentimentGroup::Neutral,
            _ => SentimentGroup::Negative,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SentimentGroup::Positive => "positive",
            SentimentGroup::Neutral => "neutral",
            SentimentGroup::Negative => "negative",
        }
    }
}

/// Review indices keyed by sentiment group, then business id.
pub type GroupedReviews = BTreeMap<SentimentGroup, BTreeMap<String, Vec<usize>>>;

pub fn group_by_sentiment(records: &[CorpusRecord]) -> GroupedReviews {
    let mut groups = GroupedReviews::new();
    for (i, r) in records.iter().enumerate() {
        groups
            .entry(SentimentGroup::from_stars(r.stars))
            .or_default()
            .entry(r.business_id.clone())
            .or_default()
            .push(i);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            topics: 5,
            alpha: 0.1,
            beta: 0.01,
            iterations: 1000,
        }
    }
}

impl LdaParams {
    fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(Error::invalid("lda needs at least one topic"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("lda alpha and beta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub params: LdaParams,
    pub seed: u64,
    pub sweeps: usize,
    vocab: Vec<String>,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u64>,
}

impl LdaModel {
    /// Builds count tables from explicit topic assignments.
    pub fn from_assignments(
        docs: &[TokenList],
        assignments: Vec<Vec<u32>>,
        params: LdaParams,
    ) -> Result<LdaModel> {
        params.validate()?;
        let (vocab, encoded) = encode(docs)?;
        if assignments.len() != encoded.len()
            || assignments.iter().zip(&encoded).any(|(z, d)| z.len() != d.len())
            || assignments.iter().flatten().any(|&k| k as usize >= params.topics)
        {
            return Err(Error::invalid("topic assignments do not match the documents"));
        }
        let mut m = LdaModel {
            params,
            seed: 0,
            sweeps: 0,
            vocab,
            doc_topic: vec![vec![0; params.topics]; encoded.len()],
            topic_word: Vec::new(),
            topic_total: vec![0; params.topics],
            docs: encoded,
            assignments,
        };
        m.topic_word = vec![vec![0; m.vocab.len()]; params.topics];
        for d in 0..m.docs.len() {
            for i in 0..m.docs[d].len() {
                let (w, k) = (m.docs[d][i] as usize, m.assignments[d][i] as usize);
                m.doc_topic[d][k] += 1;
                m.topic_word[k][w] += 1;
                m.topic_total[k] += 1;
            }
        }
        Ok(m)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.assignments
    }

    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    pub fn topic_word_counts(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    pub fn doc_lengths(&self) -> Vec<usize> {
        self.docs.iter().map(Vec::len).collect()
    }

    pub fn total_tokens(&self) -> u64 {
        self.topic_total.iter().sum()
    }

    /// Smoothed word distribution of topic `k`.
    pub fn topic_distribution(&self, k: usize) -> Vec<f64> {
        let v = self.vocab.len() as f64;
        let denom = self.topic_total[k] as f64 + v * self.params.beta;
        self.topic_word[k]
            .iter()
            .map(|&c| (f64::from(c) + self.params.beta) / denom)
            .collect()
    }

    /// The `k` most probable words per topic; ties go to the
    /// lexicographically smaller word.
    pub fn top_words(&self, k: usize) -> Vec<Vec<(String, f64)>> {
        (0..self.params.topics)
            .map(|t| {
                let probs = self.topic_distribution(t);
                let mut order: Vec<usize> = (0..probs.len()).collect();
                // Vocabulary indices are already in lexicographic order.
                order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
                order
                    .into_iter()
                    .take(k)
                    .map(|w| (self.vocab[w].clone(), probs[w]))
                    .collect()
            })
            .collect()
    }

    /// Collapsed joint log-likelihood log p(w, z).
    pub fn log_likelihood(&self) -> f64 {
        let (a, b) = (self.params.alpha, self.params.beta);
        let k = self.params.topics as f64;
        let v = self.vocab.len() as f64;
        let mut ll = 0.0;
        for (row, &total) in self.topic_word.iter().zip(&self.topic_total) {
            ll += ln_gamma(v * b) - ln_gamma(total as f64 + v * b);
            ll += row.iter().map(|&c| ln_gamma(f64::from(c) + b) - ln_gamma(b)).sum::<f64>();
        }
        for (row, doc) in self.doc_topic.iter().zip(&self.docs) {
            ll += ln_gamma(k * a) - ln_gamma(doc.len() as f64 + k * a);
            ll += row.iter().map(|&c| ln_gamma(f64::from(c) + a) - ln_gamma(a)).sum::<f64>();
        }
        ll
    }

    /// One pass over every token position.
    fn sweep(&mut self, rng: &mut rng::StageRng) {
        let LdaParams { topics, alpha, beta, .. } = self.params;
        let vbeta = self.vocab.len() as f64 * beta;
        let mut cumulative = vec![0.0; topics];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.assignments[d][i] as usize;
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut acc = 0.0;
                for (k, slot) in cumulative.iter_mut().enumerate() {
                    acc += (f64::from(self.doc_topic[d][k]) + alpha) * (f64::from(self.topic_word[k][w]) + beta)
                        / (self.topic_total[k] as f64 + vbeta);
                    *slot = acc;
                }
                let u = rng::unit(rng) * acc;
                let new = cumulative.partition_point(|&c| c <= u).min(topics - 1);

                self.assignments[d][i] = new as u32;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
        self.sweeps += 1;
    }
}

/// Sorted vocabulary and documents as vocabulary indices.
fn encode(docs: &[TokenList]) -> Result<(Vec<String>, Vec<Vec<u32>>)> {
    let mut vocab: Vec<String> = docs.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    if vocab.is_empty() {
        return Err(Error::Insufficient("lda corpus has an empty vocabulary".into()));
    }
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let encoded = docs
        .iter()
        .map(|d| d.iter().map(|t| index[t.as_str()]).collect())
        .collect();
    Ok((vocab, encoded))
}

pub fn fit_lda(docs: &[TokenList], params: LdaParams, seed: u64) -> Result<LdaModel> {
    fit_lda_observed(docs, params, seed, |_, _| {})
}

/// Like [`fit_lda`], calling `observer` after every sweep.
pub fn fit_lda_observed<F>(docs: &[TokenList], params: LdaParams, seed: u64, mut observer: F) -> Result<LdaModel>
where
    F: FnMut(usize, &LdaModel),
{
    params.validate()?;
    let mut rng = rng::stream(seed, 0);
    let assignments = docs
        .iter()
        .map(|d| d.iter().map(|_| rng::index(&mut rng, params.topics) as u32).collect())
        .collect();
    let mut model = LdaModel::from_assignments(docs, assignments, params)?;
    model.seed = seed;
    for s in 0..params.iterations {
        model.sweep(&mut rng);
        observer(s, &model);
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerRestaurant,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub group: SentimentGroup,
    pub business_id: Option<String>,
    pub topics: Vec<Vec<(String, f64)>>,
}

/// Fits one sampler per (group, business) pair, or per group when pooled.
/// Sets whose reviews contain no tokens are skipped.
pub fn fit_groups(
    records: &[CorpusRecord],
    pipeline: &TextPipeline,
    granularity: Granularity,
    params: LdaParams,
    top_k: usize,
    seed: u64,
) -> Result<Vec<TopicSummary>> {
    let grouped = group_by_sentiment(records);
    let mut jobs: Vec<(SentimentGroup, Option<String>, Vec<usize>)> = Vec::new();
    for (group, by_business) in grouped {
        match granularity {
            Granularity::PerRestaurant => {
                jobs.extend(by_business.into_iter().map(|(b, idx)| (group, Some(b), idx)));
            }
            Granularity::Pooled => {
                let mut idx: Vec<usize> = by_business.into_values().flatten().collect();
                idx.sort_unstable();
                jobs.push((group, None, idx));
            }
        }
    }
    let results: Vec<Option<TopicSummary>> = jobs
        .into_par_iter()
        .map(|(group, business, idx)| {
            let docs: Vec<TokenList> = idx.iter().map(|&i| pipeline.preprocess(&records[i].text)).collect();
            if docs.iter().all(Vec::is_empty) {
                return Ok(None);
            }
            let key = format!("{}/{}", group.name(), business.as_deref().unwrap_or("*"));
            let model = fit_lda(&docs, params, seed ^ stream_for_key(&key))?;
            Ok(Some(TopicSummary {
                group,
                business_id: business,
                topics: model.top_words(top_k),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&str]) -> Vec<TokenList> {
        raw.iter()
            .map(|d| d.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn stars_to_groups() {
        assert_eq!(SentimentGroup::from_stars(4), SentimentGroup::Positive);
        assert_eq!(SentimentGroup::from_stars(3), SentimentGroup::Neutral);
        assert_eq!(SentimentGroup::from_stars(1), SentimentGroup::Negative);
    }

    #[test]
    fn hand_count_ranking() {
        // Topic 0 holds apple x3, pear x1; topic 1 holds fig x2.
        let d = docs(&["apple apple apple pear fig fig"]);
        let params = LdaParams {
            topics: 2,
            ..LdaParams::default()
        };
        let m = LdaModel::from_assignments(&d, vec![vec![0, 0, 0, 0, 1, 1]], params).unwrap();
        let top = m.top_words(3);
        let words: Vec<&str> = top[0].iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(words, ["apple", "pear", "fig"]);
        let expected = (3.0 + 0.01) / (4.0 + 3.0 * 0.01);
        assert!((top[0][0].1 - expected).abs() < 1e-15);
        // Unseen words tie and fall back to lexicographic order.
        let words: Vec<&str> = top[1].iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(words, ["fig", "apple", "pear"]);
    }

    #[test]
    fn single_word_topic_ranks_it_first() {
        let d = docs(&["zebra", "ant bee"]);
        let params = LdaParams {
            topics: 2,
            ..LdaParams::default()
        };
        let m = LdaModel::from_assignments(&d, vec![vec![1], vec![0, 0]], params).unwrap();
        assert_eq!(m.top_words(1)[1][0].0, "zebra");
    }

    #[test]
    fn k_larger_than_vocabulary() {
        let m = fit_lda(&docs(&["a b c"]), LdaParams { iterations: 3, ..LdaParams::default() }, 1).unwrap();
        assert!(m.top_words(10).iter().all(|t| t.len() == 3));
    }

    #[test]
    fn empty_vocabulary() {
        let err = fit_lda(&docs(&["", ""]), LdaParams::default(), 1).unwrap_err();
        assert!(err.to_string().contains("empty vocabulary"));
    }

    #[test]
    fn groups_by_business() {
        let mk = |id: &str, b: &str, stars: u8| CorpusRecord {
            review_id: id.into(),
            user_id: "u".into(),
            business_id: b.into(),
            stars,
            text: "great food".into(),
            date: String::new(),
            state: "PA".into(),
            overall_rating: 4.0,
            cuisine: crate::ingest::Cuisine::American,
        };
        let recs = vec![mk("1", "x", 5), mk("2", "y", 4), mk("3", "x", 3), mk("4", "x", 5)];
        let g = group_by_sentiment(&recs);
        assert_eq!(g[&SentimentGroup::Positive]["x"], vec![0, 3]);
        assert_eq!(g[&SentimentGroup::Neutral]["x"], vec![2]);
        assert!(!g.contains_key(&SentimentGroup::Negative));
    }
}

//! Deterministic text normalization.
//!
//! The pipeline is NFC normalization, lowercasing, punctuation stripping,
//! whitespace tokenization, stopword removal and lexicon-backed
//! lemmatization. Tokens only ever contain `[a-z0-9']`, with apostrophes
//! strictly inside a token.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub type TokenList = Vec<String>;

/// Stopword list plus lemma lexicon.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    stopwords: HashSet<String>,
    /// Inflected form -> lemma.
    forms: HashMap<String, String>,
    /// Known base forms (every lemma target is included).
    lemmas: HashSet<String>,
}

impl TextPipeline {
    pub fn bundled() -> &'static TextPipeline {
        static PIPELINE: OnceLock<TextPipeline> = OnceLock::new();
        PIPELINE.get_or_init(|| {
            TextPipeline::from_sources(
                include_str!("../data/stopwords_en.txt"),
                include_str!("../data/lemma_lexicon.txt"),
            )
            .expect("bundled text resources are valid")
        })
    }

    pub fn from_files(stopwords: Option<&Path>, lexicon: Option<&Path>) -> Result<TextPipeline> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let stop = match stopwords {
            Some(p) => read(p)?,
            None => include_str!("../data/stopwords_en.txt").to_string(),
        };
        let lex = match lexicon {
            Some(p) => read(p)?,
            None => include_str!("../data/lemma_lexicon.txt").to_string(),
        };
        TextPipeline::from_sources(&stop, &lex)
    }

    pub fn from_sources(stopwords: &str, lexicon: &str) -> Result<TextPipeline> {
        let stopwords = data_lines(stopwords).map(str::to_string).collect();
        let mut forms = HashMap::new();
        let mut lemmas = HashSet::new();
        for line in data_lines(lexicon) {
            match line.split_once('\t') {
                Some((form, lemma)) => {
                    let (form, lemma) = (form.trim(), lemma.trim());
                    if form.is_empty() || lemma.is_empty() {
                        return Err(Error::invalid(format!("bad lexicon line {line:?}")));
                    }
                    forms.insert(form.to_string(), lemma.to_string());
                    lemmas.insert(lemma.to_string());
                }
                None => {
                    lemmas.insert(line.to_string());
                }
            }
        }
        for lemma in &lemmas {
            forms.remove(lemma);
        }
        Ok(TextPipeline {
            stopwords,
            forms,
            lemmas,
        })
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn preprocess(&self, text: &str) -> TokenList {
        let cleaned: String = text
            .nfc()
            .flat_map(char::to_lowercase)
            .map(|c| match c {
                'a'..='z' | '0'..='9' | '\'' => c,
                '\u{2019}' => '\'',
                _ => ' ',
            })
            .collect();
        cleaned
            .split_whitespace()
            .filter_map(|raw| self.normalize_token(raw))
            .collect()
    }

    /// Stopword filter and lemmatization, repeated until the token is
    /// stable so that re-running the pipeline on its output is a no-op.
    fn normalize_token(&self, raw: &str) -> Option<String> {
        let mut token = raw.trim_matches('\'').to_string();
        for _ in 0..8 {
            if token.is_empty() || self.is_stopword(&token) {
                return None;
            }
            let next = self.lemmatize(&token);
            let next = next.trim_matches('\'');
            if next == token {
                break;
            }
            token = next.to_string();
        }
        (!token.is_empty() && !self.is_stopword(&token)).then_some(token)
    }

    pub fn lemmatize(&self, token: &str) -> String {
        if self.lemmas.contains(token) {
            return token.to_string();
        }
        if let Some(lemma) = self.forms.get(token) {
            return lemma.clone();
        }
        if let Some(stem) = token.strip_suffix("ies") {
            if !stem.is_empty() {
                return format!("{stem}y");
            }
        }
        if let Some(stem) = token.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if token.ends_with('s') && !token.ends_with("ss") && token.len() > 3 {
            return token[..token.len() - 1].to_string();
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = token.strip_suffix(suffix) {
                if stem.len() >= 3 && self.lemmas.contains(stem) {
                    return stem.to_string();
                }
            }
        }
        token.to_string()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::trim_start)
}

/// Normalizes text with the bundled stopword list and lexicon.
pub fn preprocess(text: &str) -> TokenList {
    TextPipeline::bundled().preprocess(text)
}

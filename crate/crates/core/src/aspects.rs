//! LLM-assisted aspect discovery: prompt construction, response files,
//! aspect-name canonicalization and inter-model agreement.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::aspect::Aspect;
use crate::error::{Error, Result};
use crate::ingest::CorpusRecord;

pub const PROMPT: &str = "From the customer reviews above, identify key aspects of the dining experience for labeling purposes. For each identified aspect, assign a rating to each review on a 5-point scale.";

/// Numbered review texts followed by the discovery prompt.
pub fn emit_prompt(reviews: &[CorpusRecord]) -> Result<String> {
    if reviews.is_empty() {
        return Err(Error::Insufficient("prompt needs at least one review".into()));
    }
    let mut out = String::new();
    for (i, r) in reviews.iter().enumerate() {
        let _ = writeln!(out, "Review {}: {}", i + 1, r.text.trim());
        out.push('\n');
    }
    out.push_str(PROMPT);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalAspect {
    /// `None` stands for "other".
    pub aspect: Option<Aspect>,
    pub source: String,
}

impl CanonicalAspect {
    pub fn name(&self) -> &'static str {
        self.aspect.map_or("other", Aspect::name)
    }
}

pub struct AliasTable {
    aliases: HashMap<String, Aspect>,
}

impl AliasTable {
    pub fn bundled() -> &'static AliasTable {
        static TABLE: OnceLock<AliasTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            AliasTable::parse(include_str!("../data/aspect_aliases.tsv")).expect("bundled aspect alias table is valid")
        })
    }

    pub fn parse(text: &str) -> Result<AliasTable> {
        let mut aliases = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (canonical, alias) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("aspect alias line {}: expected two tab-separated columns", i + 1)))?;
            let aspect: Aspect = canonical.trim().parse()?;
            aliases.insert(normalize_name(alias), aspect);
        }
        Ok(AliasTable { aliases })
    }

    pub fn canonicalize(&self, raw: &str) -> CanonicalAspect {
        let key = normalize_name(raw);
        let aspect = self
            .aliases
            .get(&key)
            .copied()
            .or_else(|| key.ends_with(" quality").then_some(Aspect::FoodQuality));
        CanonicalAspect {
            aspect,
            source: raw.to_string(),
        }
    }
}

/// Lowercase, parenthesised qualifiers removed, whitespace collapsed.
fn normalize_name(raw: &str) -> String {
    let mut kept = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for c in raw.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ if depth == 0 => kept.extend(c.to_lowercase()),
            _ => {}
        }
    }
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn canonicalize_aspect(raw: &str) -> CanonicalAspect {
    AliasTable::bundled().canonicalize(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AspectResponse {
    pub business_id: String,
    pub model_tag: String,
    pub aspects: Vec<String>,
    /// Per-review 5-point ratings keyed by raw aspect name. Stored, not
    /// used downstream.
    #[serde(default)]
    pub ratings: BTreeMap<String, Vec<u8>>,
}

impl AspectResponse {
    fn validate(&self) -> Result<()> {
        if self.business_id.trim().is_empty() {
            return Err(Error::invalid("response has an empty business_id"));
        }
        if let Some(a) = self.aspects.iter().find(|a| a.trim().is_empty()) {
            return Err(Error::invalid(format!(
                "business {}: empty aspect name {a:?}",
                self.business_id
            )));
        }
        for (aspect, ratings) in &self.ratings {
            if let Some(r) = ratings.iter().find(|r| !(1..=5).contains(*r)) {
                return Err(Error::invalid(format!(
                    "business {}: rating {r} for {aspect:?} is outside 1-5",
                    self.business_id
                )));
            }
        }
        Ok(())
    }

    pub fn canonical_aspects(&self) -> BTreeSet<Option<Aspect>> {
        self.aspects.iter().map(|a| canonicalize_aspect(a).aspect).collect()
    }
}

/// Parses a JSON array of responses or one response per line.
pub fn parse_responses(text: &str, source: &str) -> Result<Vec<AspectResponse>> {
    let trimmed = text.trim_start();
    let responses: Vec<AspectResponse> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            path: source.into(),
            line: e.line() as u64,
            message: e.to_string(),
        })?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    path: source.into(),
                    line: i as u64 + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?
    };
    for r in &responses {
        r.validate()?;
    }
    Ok(responses)
}

pub fn load_responses(path: &Path) -> Result<Vec<AspectResponse>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_responses(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoveryRow {
    pub aspect: Aspect,
    /// Share of businesses where at least one model named the aspect.
    pub occurrence_pct: f64,
    /// Among those businesses, the share where both did. Undefined when the
    /// aspect never occurs.
    pub agreement_pct: Option<f64>,
}

fn by_business(responses: &[AspectResponse]) -> BTreeMap<&str, BTreeSet<Option<Aspect>>> {
    let mut map: BTreeMap<&str, BTreeSet<Option<Aspect>>> = BTreeMap::new();
    for r in responses {
        map.entry(r.business_id.as_str()).or_default().extend(r.canonical_aspects());
    }
    map
}

/// Occurrence and agreement of each canonical aspect between two models'
/// responses over the same businesses.
pub fn aspect_agreement(first: &[AspectResponse], second: &[AspectResponse]) -> Result<Vec<DiscoveryRow>> {
    let a = by_business(first);
    let b = by_business(second);
    let ka: BTreeSet<&str> = a.keys().copied().collect();
    let kb: BTreeSet<&str> = b.keys().copied().collect();
    if ka != kb {
        let only_a: Vec<&str> = ka.difference(&kb).copied().collect();
        let only_b: Vec<&str> = kb.difference(&ka).copied().collect();
        return Err(Error::invalid(format!(
            "response sets cover different businesses; only in first: [{}]; only in second: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    if ka.is_empty() {
        return Err(Error::Insufficient("no aspect responses".into()));
    }
    let n = ka.len() as f64;
    Ok(Aspect::ALL
        .iter()
        .map(|&aspect| {
            let key = Some(aspect);
            let (mut either, mut both) = (0usize, 0usize);
            for id in &ka {
                let (x, y) = (a[id].contains(&key), b[id].contains(&key));
                either += usize::from(x || y);
                both += usize::from(x && y);
            }
            DiscoveryRow {
                aspect,
                occurrence_pct: 100.0 * either as f64 / n,
                agreement_pct: (either > 0).then(|| 100.0 * both as f64 / either as f64),
            }
        })
        .collect())
}

pub fn agreement_csv(rows: &[DiscoveryRow]) -> String {
    let mut out = String::from("aspect,occurrence_pct,agreement_pct\n");
    for r in rows {
        let agreement = r.agreement_pct.map_or_else(|| "—".to_string(), |p| format!("{p:.2}"));
        let _ = writeln!(out, "{},{:.2},{}", r.aspect.name(), r.occurrence_pct, agreement);
    }
    out
}

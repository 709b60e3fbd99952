//! Review/business ingestion, the restaurant join, cuisine normalization,
//! corpus statistics, reproducible sampling and annotation label files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::aspect::{label_cell, Aspect, Sentiment};
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of malformed lines tolerated before a file is rejected.
pub const DEFAULT_MALFORMED_TOLERANCE: f64 = 0.01;

/// State code for businesses whose state field is missing or empty.
pub const UNKNOWN_STATE: &str = "??";

const RESTAURANT_MARKER: &str = "restaurant";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub user_id: String,
    pub business_id: String,
    pub stars: u8,
    pub text: String,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Business {
    pub business_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub address: String,
    #[serde(default)]
    pub city: String,
    #[serde(default)]
    pub state: String,
    #[serde(default)]
    pub postal_code: String,
    /// Average overall rating; stored as `stars` in the Yelp layout.
    #[serde(rename = "stars")]
    pub overall_rating: f64,
    #[serde(default)]
    pub review_count: u64,
    #[serde(default)]
    pub categories: String,
}

/// Raw review line as found in Yelp dumps (stars may be written as 5.0).
#[derive(Deserialize)]
struct RawReview {
    review_id: String,
    user_id: String,
    business_id: String,
    stars: f64,
    text: String,
    date: String,
}

/// Raw business line; categories and state may be null in the dumps.
#[derive(Deserialize)]
struct RawBusiness {
    business_id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    address: Option<String>,
    #[serde(default)]
    city: Option<String>,
    #[serde(default)]
    state: Option<String>,
    #[serde(default)]
    postal_code: Option<String>,
    stars: f64,
    #[serde(default)]
    review_count: Option<u64>,
    #[serde(default)]
    categories: Option<String>,
}

impl RawReview {
    fn validate(self) -> Option<Review> {
        let stars = self.stars;
        if self.review_id.is_empty() || stars.fract() != 0.0 || !(1.0..=5.0).contains(&stars) {
            return None;
        }
        Some(Review {
            review_id: self.review_id,
            user_id: self.user_id,
            business_id: self.business_id,
            stars: stars as u8,
            text: self.text,
            date: self.date,
        })
    }
}

impl RawBusiness {
    fn validate(self) -> Option<Business> {
        if self.business_id.is_empty() || !(1.0..=5.0).contains(&self.stars) {
            return None;
        }
        let state = self
            .state
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| UNKNOWN_STATE.to_string());
        Some(Business {
            business_id: self.business_id,
            name: self.name.unwrap_or_default(),
            address: self.address.unwrap_or_default(),
            city: self.city.unwrap_or_default(),
            state,
            postal_code: self.postal_code.unwrap_or_default(),
            overall_rating: self.stars,
            review_count: self.review_count.unwrap_or(0),
            categories: self.categories.unwrap_or_default(),
        })
    }
}

/// Canonical cuisine label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cuisine {
    American,
    Italian,
    Mexican,
    Chinese,
    Japanese,
    Thai,
    Mediterranean,
    Indian,
    #[serde(rename = "Cajun/Creole")]
    CajunCreole,
    Vietnamese,
    Other,
}

impl Cuisine {
    pub const ALL: [Cuisine; 11] = [
        Cuisine::American,
        Cuisine::Italian,
        Cuisine::Mexican,
        Cuisine::Chinese,
        Cuisine::Japanese,
        Cuisine::Thai,
        Cuisine::Mediterranean,
        Cuisine::Indian,
        Cuisine::CajunCreole,
        Cuisine::Vietnamese,
        Cuisine::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cuisine::American => "American",
            Cuisine::Italian => "Italian",
            Cuisine::Mexican => "Mexican",
            Cuisine::Chinese => "Chinese",
            Cuisine::Japanese => "Japanese",
            Cuisine::Thai => "Thai",
            Cuisine::Mediterranean => "Mediterranean",
            Cuisine::Indian => "Indian",
            Cuisine::CajunCreole => "Cajun/Creole",
            Cuisine::Vietnamese => "Vietnamese",
            Cuisine::Other => "Other",
        }
    }

    pub fn parse(name: &str) -> Option<Cuisine> {
        Cuisine::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Cuisine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One joined review + business row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub review_id: String,
    pub user_id: String,
    pub business_id: String,
    pub stars: u8,
    pub text: String,
    pub date: String,
    pub state: String,
    pub overall_rating: f64,
    pub cuisine: Cuisine,
}

// ---------------------------------------------------------------------------
// Cuisine normalization

/// Alias table mapping category phrases to canonical cuisines.
#[derive(Debug, Clone)]
pub struct CuisineTable {
    /// (alias words, cuisine), longest alias first.
    aliases: Vec<(Vec<String>, Cuisine)>,
    ignored: Vec<Vec<String>>,
}

impl CuisineTable {
    pub fn bundled() -> &'static CuisineTable {
        static TABLE: OnceLock<CuisineTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CuisineTable::parse(include_str!("../data/cuisine_aliases.tsv"))
                .expect("bundled cuisine table is valid")
        })
    }

    pub fn parse(text: &str) -> Result<CuisineTable> {
        let mut aliases = Vec::new();
        let mut ignored = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (canon, alias) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("cuisine table line {}: missing tab", n + 1)))?;
            let words = words_of(&alias.to_lowercase());
            if canon == "!" {
                ignored.push(words);
                continue;
            }
            let cuisine = Cuisine::parse(canon).ok_or_else(|| {
                Error::invalid(format!("cuisine table line {}: unknown cuisine {canon:?}", n + 1))
            })?;
            aliases.push((words, cuisine));
        }
        aliases.sort_by_key(|a| std::cmp::Reverse(a.0.len()));
        Ok(CuisineTable { aliases, ignored })
    }

    /// Canonical cuisine for a comma-separated category string. The alias
    /// that appears earliest in the list wins; no match gives `Other`.
    pub fn normalize(&self, categories: &str) -> Cuisine {
        for category in categories.split(',') {
            let mut words: Vec<Option<String>> = words_of(&category.to_lowercase())
                .into_iter()
                .map(Some)
                .collect();
            for phrase in &self.ignored {
                blank_phrase(&mut words, phrase);
            }
            let mut best: Option<(usize, Cuisine)> = None;
            for (alias, cuisine) in &self.aliases {
                if let Some(pos) = find_phrase(&words, alias) {
                    if best.is_none_or(|(p, _)| pos < p) {
                        best = Some((pos, *cuisine));
                    }
                }
            }
            if let Some((_, cuisine)) = best {
                return cuisine;
            }
        }
        Cuisine::Other
    }
}

fn words_of(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == '(' || c == ')')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn find_phrase(words: &[Option<String>], phrase: &[String]) -> Option<usize> {
    if phrase.is_empty() || phrase.len() > words.len() {
        return None;
    }
    (0..=words.len() - phrase.len()).find(|&i| {
        phrase
            .iter()
            .zip(&words[i..])
            .all(|(p, w)| w.as_deref() == Some(p.as_str()))
    })
}

fn blank_phrase(words: &mut [Option<String>], phrase: &[String]) {
    while let Some(i) = find_phrase(words, phrase) {
        for w in &mut words[i..i + phrase.len()] {
            *w = None;
        }
    }
}

/// Canonical cuisine using the bundled alias table.
pub fn normalize_cuisine(categories: &str) -> Cuisine {
    CuisineTable::bundled().normalize(categories)
}

pub fn is_restaurant(categories: &str) -> bool {
    categories.to_lowercase().contains(RESTAURANT_MARKER)
}

// ---------------------------------------------------------------------------
// Parsing and the join

/// Per-file tallies collected while ingesting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub business_lines: u64,
    pub malformed_business_lines: u64,
    pub restaurants: u64,
    pub restaurants_missing_state: u64,
    pub review_lines: u64,
    pub malformed_review_lines: u64,
    pub duplicate_reviews: u64,
    pub unknown_business: u64,
    pub non_restaurant_reviews: u64,
    pub emitted: u64,
}

fn check_tolerance(path: &Path, bad: u64, total: u64, tolerance: f64) -> Result<()> {
    if total > 0 && bad as f64 > tolerance * total as f64 {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            bad,
            total,
            threshold: tolerance,
        });
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Businesses keyed by id. Only restaurants are retained.
#[derive(Debug, Clone, Default)]
pub struct BusinessIndex {
    businesses: HashMap<String, (Business, Cuisine)>,
    /// Ids of well-formed businesses that are not restaurants.
    others: HashSet<String>,
}

impl BusinessIndex {
    pub fn load(path: &Path, tolerance: f64, diag: &mut IngestDiagnostics) -> Result<BusinessIndex> {
        let index = Self::read(open(path)?, path, diag)?;
        check_tolerance(path, diag.malformed_business_lines, diag.business_lines, tolerance)?;
        Ok(index)
    }

    fn read<R: BufRead>(reader: R, path: &Path, diag: &mut IngestDiagnostics) -> Result<BusinessIndex> {
        let mut index = BusinessIndex::default();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            diag.business_lines += 1;
            let Some(business) = serde_json::from_str::<RawBusiness>(&line)
                .ok()
                .and_then(RawBusiness::validate)
            else {
                diag.malformed_business_lines += 1;
                continue;
            };
            if !is_restaurant(&business.categories) {
                index.others.insert(business.business_id);
                continue;
            }
            diag.restaurants += 1;
            if business.state == UNKNOWN_STATE {
                diag.restaurants_missing_state += 1;
            }
            let cuisine = normalize_cuisine(&business.categories);
            index
                .businesses
                .insert(business.business_id.clone(), (business, cuisine));
        }
        Ok(index)
    }

    pub fn get(&self, business_id: &str) -> Option<&(Business, Cuisine)> {
        self.businesses.get(business_id)
    }

    pub fn len(&self) -> usize {
        self.businesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.businesses.is_empty()
    }

    /// Joins one review against the index, updating the tallies.
    fn join(&self, review: Review, diag: &mut IngestDiagnostics) -> Option<CorpusRecord> {
        match self.businesses.get(&review.business_id) {
            Some((business, cuisine)) => Some(CorpusRecord {
                review_id: review.review_id,
                user_id: review.user_id,
                business_id: review.business_id,
                stars: review.stars,
                text: review.text,
                date: review.date,
                state: business.state.clone(),
                overall_rating: business.overall_rating,
                cuisine: *cuisine,
            }),
            None if self.others.contains(&review.business_id) => {
                diag.non_restaurant_reviews += 1;
                None
            }
            None => {
                diag.unknown_business += 1;
                None
            }
        }
    }
}

/// Streaming join of a review file against a business index.
///
/// Yields restaurant records in file order. Malformed, duplicate and
/// unjoinable lines are skipped and tallied; call [`CorpusReader::finish`]
/// to apply the malformed-line tolerance.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    index: BusinessIndex,
    seen: HashSet<String>,
    diag: IngestDiagnostics,
    path: PathBuf,
    tolerance: f64,
}

impl CorpusReader<BufReader<File>> {
    pub fn open(reviews_path: &Path, business_path: &Path, tolerance: f64) -> Result<Self> {
        let mut diag = IngestDiagnostics::default();
        let index = BusinessIndex::load(business_path, tolerance, &mut diag)?;
        Ok(CorpusReader::new(open(reviews_path)?, reviews_path, index, diag, tolerance))
    }
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(
        reader: R,
        path: &Path,
        index: BusinessIndex,
        diag: IngestDiagnostics,
        tolerance: f64,
    ) -> Self {
        CorpusReader {
            lines: reader.lines(),
            index,
            seen: HashSet::new(),
            diag,
            path: path.to_path_buf(),
            tolerance,
        }
    }

    pub fn diagnostics(&self) -> &IngestDiagnostics {
        &self.diag
    }

    pub fn finish(self) -> Result<IngestDiagnostics> {
        check_tolerance(
            &self.path,
            self.diag.malformed_review_lines,
            self.diag.review_lines,
            self.tolerance,
        )?;
        Ok(self.diag)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<CorpusRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            if line.trim().is_empty() {
                continue;
            }
            self.diag.review_lines += 1;
            let Some(review) = serde_json::from_str::<RawReview>(&line)
                .ok()
                .and_then(RawReview::validate)
            else {
                self.diag.malformed_review_lines += 1;
                continue;
            };
            if !self.seen.insert(review.review_id.clone()) {
                self.diag.duplicate_reviews += 1;
                continue;
            }
            if let Some(record) = self.index.join(review, &mut self.diag) {
                self.diag.emitted += 1;
                return Some(Ok(record));
            }
        }
    }
}

/// Reads and joins both files into memory.
pub fn parse_corpus(
    reviews_path: &Path,
    business_path: &Path,
) -> Result<(Vec<CorpusRecord>, IngestDiagnostics)> {
    let mut reader = CorpusReader::open(reviews_path, business_path, DEFAULT_MALFORMED_TOLERANCE)?;
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((records, reader.finish()?))
}

pub fn write_corpus<W: Write>(mut out: W, records: &[CorpusRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<corpus output>", e))?;
    }
    Ok(())
}

pub fn write_corpus_file(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus(&mut out, records)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Iterates a corpus JSON-lines file produced by `write_corpus`.
pub fn corpus_records(path: &Path) -> Result<impl Iterator<Item = Result<CorpusRecord>>> {
    let path_buf = path.to_path_buf();
    Ok(open(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(move |(n, line)| {
            let line = line.map_err(|e| Error::io(&path_buf, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path_buf.clone(),
                line: n as u64 + 1,
                message: e.to_string(),
            })
        }))
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<CorpusRecord>> {
    corpus_records(path)?.collect()
}

// ---------------------------------------------------------------------------
// Statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub reviews: u64,
    pub users: u64,
    pub businesses: u64,
    pub states: u64,
    pub reviews_per_state: BTreeMap<String, u64>,
    /// `None` for an empty corpus.
    pub mean_review_rating: Option<f64>,
    /// Unweighted mean over distinct businesses.
    pub mean_business_rating: Option<f64>,
    /// Percentage of distinct businesses per canonical cuisine.
    pub cuisine_share_pct: BTreeMap<String, f64>,
    pub businesses_missing_state: u64,
}

/// Incremental accumulator for [`CorpusStats`].
#[derive(Debug, Default)]
pub struct StatsBuilder {
    reviews: u64,
    star_sum: u64,
    users: HashSet<String>,
    businesses: HashMap<String, (f64, Cuisine, bool)>,
    per_state: BTreeMap<String, u64>,
}

impl StatsBuilder {
    pub fn add(&mut self, record: &CorpusRecord) {
        self.reviews += 1;
        self.star_sum += u64::from(record.stars);
        if !self.users.contains(&record.user_id) {
            self.users.insert(record.user_id.clone());
        }
        *self.per_state.entry(record.state.clone()).or_default() += 1;
        if !self.businesses.contains_key(&record.business_id) {
            self.businesses.insert(
                record.business_id.clone(),
                (
                    record.overall_rating,
                    record.cuisine,
                    record.state == UNKNOWN_STATE,
                ),
            );
        }
    }

    pub fn build(self) -> CorpusStats {
        let n_business = self.businesses.len() as u64;
        let mean_review_rating = (self.reviews > 0).then(|| self.star_sum as f64 / self.reviews as f64);
        let mean_business_rating = (n_business > 0).then(|| {
            // Sorted summation keeps the result independent of hash order.
            let mut ratings: Vec<f64> = self.businesses.values().map(|b| b.0).collect();
            ratings.sort_by(f64::total_cmp);
            ratings.iter().sum::<f64>() / n_business as f64
        });
        let mut cuisine_share_pct = BTreeMap::new();
        if n_business > 0 {
            for cuisine in Cuisine::ALL {
                let count = self.businesses.values().filter(|b| b.1 == cuisine).count();
                cuisine_share_pct.insert(
                    cuisine.name().to_string(),
                    100.0 * count as f64 / n_business as f64,
                );
            }
        }
        CorpusStats {
            reviews: self.reviews,
            users: self.users.len() as u64,
            businesses: n_business,
            states: self.per_state.len() as u64,
            reviews_per_state: self.per_state,
            mean_review_rating,
            mean_business_rating,
            cuisine_share_pct,
            businesses_missing_state: self.businesses.values().filter(|b| b.2).count() as u64,
        }
    }
}

pub fn corpus_stats<'a>(records: impl IntoIterator<Item = &'a CorpusRecord>) -> CorpusStats {
    let mut builder = StatsBuilder::default();
    for record in records {
        builder.add(record);
    }
    builder.build()
}

// ---------------------------------------------------------------------------
// Sampling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleStrategy {
    Uniform {
        n: usize,
    },
    PerBusiness {
        businesses: usize,
        per: usize,
        state: Option<String>,
    },
}

/// Draws a reproducible sample without replacement.
///
/// Per-business sampling picks businesses from the sorted id list, then
/// draws reviews for each business from its own RNG stream keyed by the
/// business id, so one business's draw never depends on another's.
pub fn sample_reviews(
    corpus: &[CorpusRecord],
    strategy: &SampleStrategy,
    seed: u64,
) -> Result<Vec<CorpusRecord>> {
    if corpus.is_empty() {
        return Err(Error::Insufficient("cannot sample from an empty corpus".into()));
    }
    match strategy {
        SampleStrategy::Uniform { n } => {
            if *n > corpus.len() {
                return Err(Error::Insufficient(format!(
                    "requested {n} reviews but the corpus has {} (short by {})",
                    corpus.len(),
                    n - corpus.len()
                )));
            }
            let mut rng = rng::stream(seed, 0);
            Ok(rng::sample_indices(&mut rng, corpus.len(), *n)
                .into_iter()
                .map(|i| corpus[i].clone())
                .collect())
        }
        SampleStrategy::PerBusiness {
            businesses,
            per,
            state,
        } => {
            let mut by_business: BTreeMap<&str, Vec<&CorpusRecord>> = BTreeMap::new();
            for record in corpus {
                if state.as_deref().is_none_or(|s| s == record.state) {
                    by_business.entry(&record.business_id).or_default().push(record);
                }
            }
            let eligible: Vec<(&str, Vec<&CorpusRecord>)> = by_business
                .into_iter()
                .filter(|(_, reviews)| reviews.len() >= *per)
                .collect();
            if eligible.len() < *businesses {
                return Err(Error::Insufficient(format!(
                    "requested {businesses} businesses with at least {per} reviews{} but only {} qualify (short by {})",
                    state.as_ref().map(|s| format!(" in {s}")).unwrap_or_default(),
                    eligible.len(),
                    businesses - eligible.len()
                )));
            }
            let mut rng = rng::stream(seed, 0);
            let chosen = rng::sample_indices(&mut rng, eligible.len(), *businesses);
            let mut out = Vec::with_capacity(businesses * per);
            for b in chosen {
                let (id, reviews) = &eligible[b];
                let mut reviews = reviews.clone();
                reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));
                let mut brng = rng::stream(seed, rng::stream_for_key(id));
                for i in rng::sample_indices(&mut brng, reviews.len(), *per) {
                    out.push(reviews[i].clone());
                }
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Annotation labels

pub const LABEL_HEADER: [&str; 7] = [
    "review_id",
    "service",
    "food_quality",
    "ambiance",
    "wait_time",
    "price",
    "menu_variety",
];

/// Six per-aspect labels for one review; `None` marks an irrelevant aspect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectLabelSet {
    pub review_id: String,
    pub labels: [Option<Sentiment>; 6],
}

impl AspectLabelSet {
    pub fn get(&self, aspect: Aspect) -> Option<Sentiment> {
        self.labels[aspect.index()]
    }

    pub fn is_relevant(&self, aspect: Aspect) -> bool {
        self.get(aspect).is_some()
    }
}

fn parse_label(cell: &str) -> Option<Option<Sentiment>> {
    match cell.trim() {
        "NA" => Some(None),
        "-1" => Some(Some(Sentiment::Negative)),
        "0" => Some(Some(Sentiment::Neutral)),
        "1" => Some(Some(Sentiment::Positive)),
        _ => None,
    }
}

pub fn read_labels<R: Read>(reader: R, source: &str) -> Result<Vec<AspectLabelSet>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().map(str::trim).ne(LABEL_HEADER) {
        return Err(Error::invalid(format!(
            "{source}: label header must be {}",
            LABEL_HEADER.join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let review_id = record.get(0).unwrap_or_default().trim().to_string();
        if review_id.is_empty() {
            return Err(Error::invalid(format!("{source}: row {row}: empty review_id")));
        }
        let mut labels = [None; 6];
        for (k, slot) in labels.iter_mut().enumerate() {
            let cell = record.get(k + 1).unwrap_or_default();
            *slot = parse_label(cell).ok_or_else(|| {
                Error::invalid(format!(
                    "{source}: row {row}, column {}: invalid label {}",
                    LABEL_HEADER[k + 1],
                    cell.trim()
                ))
            })?;
        }
        if !seen.insert(review_id.clone()) {
            return Err(Error::invalid(format!(
                "{source}: row {row}: duplicate review_id {review_id}"
            )));
        }
        out.push(AspectLabelSet { review_id, labels });
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<AspectLabelSet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, &path.display().to_string())
}

pub fn write_labels<W: Write>(out: W, labels: &[AspectLabelSet]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(LABEL_HEADER)?;
    for set in labels {
        let mut row = vec![set.review_id.clone()];
        row.extend(set.labels.iter().map(|l| label_cell(*l)));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<labels output>", e))?;
    Ok(())
}

//! Synthetic review corpora with known per-aspect sentiments and a known
//! linear rating model.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aspect::{Aspect, Sentiment};
use crate::error::{Error, Result};
use crate::ingest::{normalize_cuisine, write_labels, AspectLabelSet, Business, CorpusRecord, Review};
use crate::rng::{self, StageRng};

const GENERATOR_STREAM: u64 = 0x5359_4e54;

/// Cell index for a label: negative, neutral, positive, absent.
fn cell(label: Option<Sentiment>) -> usize {
    match label {
        Some(Sentiment::Negative) => 0,
        Some(Sentiment::Neutral) => 1,
        Some(Sentiment::Positive) => 2,
        None => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// Every (aspect, polarity) cell has its own vocabulary.
    Disjoint,
    /// Aspect nouns combined with polarity words shared across aspects.
    Overlap,
}

/// Sentence templates per aspect and per polarity cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    /// `cells[aspect][cell]`, cell order negative, neutral, positive, absent.
    pub cells: Vec<[Vec<String>; 4]>,
    /// Aspect-free sentences sprinkled into reviews.
    pub filler: Vec<String>,
}

fn owned(s: &[&str]) -> Vec<String> {
    s.iter().map(|t| t.to_string()).collect()
}

impl TemplateBank {
    pub fn for_mode(mode: TemplateMode) -> TemplateBank {
        match mode {
            TemplateMode::Disjoint => TemplateBank::disjoint(),
            TemplateMode::Overlap => TemplateBank::overlapping(),
        }
    }

    pub fn disjoint() -> TemplateBank {
        let service = [
            owned(&[
                "Our waiter was rude and dismissive.",
                "The server ignored requests, acting hostile.",
                "Staffers were surly and condescending.",
            ]),
            owned(&[
                "The cashier took our order routinely.",
                "Counter attendant processed everything mechanically.",
                "Employee interaction was procedural.",
            ]),
            owned(&[
                "Our bartender was friendly and attentive.",
                "The hostess greeted everyone warmly.",
                "Courteous personnel welcomed newcomers.",
            ]),
            owned(&[
                "We parked nearby before heading inside.",
                "Coworkers suggested this spot recently.",
                "Lunch plans happened spontaneously.",
            ]),
        ];
        let food = [
            owned(&[
                "The chicken tasted bland and soggy.",
                "Burnt noodles arrived with stale bread.",
                "Greasy rubbery dumplings were inedible.",
            ]),
            owned(&[
                "The soup was edible enough.",
                "Sandwich was middling.",
                "Salad flavor was mediocre.",
            ]),
            owned(&[
                "The steak was delicious and juicy.",
                "Flavorful curry with crispy tempura.",
                "Perfectly seasoned salmon was amazing.",
            ]),
            owned(&[
                "Our group included cousins visiting abroad.",
                "Phone battery died halfway through.",
                "Birthday celebration brought relatives together.",
            ]),
        ];
        let ambiance = [
            owned(&[
                "The dining room was cramped and noisy.",
                "Dingy lighting and sticky booths.",
                "Blaring music drowned conversation miserably.",
            ]),
            owned(&[
                "Decor looked plain and unremarkable.",
                "Furniture looked ordinary.",
                "Interior design was neutral.",
            ]),
            owned(&[
                "Cozy candlelit patio with charming vibe.",
                "Elegant chandeliers and beautiful artwork.",
                "Relaxing romantic setting overlooking gardens.",
            ]),
            owned(&[
                "Traffic downtown was heavy.",
                "Outside weather turned chilly.",
                "Errands beforehand ran late.",
            ]),
        ];
        let wait = [
            owned(&[
                "We waited forever before seating.",
                "Ninety agonizing minutes passed before appetizers.",
                "Painfully sluggish kitchen delayed entrees.",
            ]),
            owned(&[
                "Timing was typical.",
                "Tickets moved along unhurried.",
                "Pacing was customary.",
            ]),
            owned(&[
                "Courses emerged promptly.",
                "Speedy turnaround with zero delay.",
                "Efficient expeditor kept plates flowing instantly.",
            ]),
            owned(&[
                "Parents joined eventually.",
                "Someone celebrated graduation.",
                "Neighbors mentioned this address.",
            ]),
        ];
        let price = [
            owned(&[
                "Prices were outrageous and overpriced.",
                "Expensive bill resembled robbery.",
                "Ridiculous markup on cocktails.",
            ]),
            owned(&[
                "Cost was moderate.",
                "Check total landed midrange.",
                "Pricing was unexceptional.",
            ]),
            owned(&[
                "Great value and cheap specials.",
                "Affordable bargain deals.",
                "Inexpensive happy hour discounts.",
            ]),
            owned(&[
                "Rain started falling afterwards.",
                "Tourists crowded sidewalks.",
                "Anniversary dates matter.",
            ]),
        ];
        let menu = [
            owned(&[
                "The menu offered limited choices.",
                "Repetitive selection lacking diversity.",
                "Sparse lineup disappointed vegetarians.",
            ]),
            owned(&[
                "Repertoire matched expectations.",
                "Assortment was conventional.",
                "Listings covered usual categories.",
            ]),
            owned(&[
                "Extensive alternatives for everybody.",
                "Diverse specialties spanning continents.",
                "Endless creative combinations.",
            ]),
            owned(&[
                "Holiday shopping wrapped up.",
                "Colleagues carpooled there.",
                "Sunday brunch tradition continues.",
            ]),
        ];
        TemplateBank {
            cells: vec![service, food, ambiance, wait, price, menu],
            filler: owned(&["We came here Saturday.", "Would return someday.", "Stopped by twice."]),
        }
    }

    /// Same aspect nouns across polarities; polarity words shared across
    /// aspects.
    pub fn overlapping() -> TemplateBank {
        let nouns: [&[&str]; 6] = [
            &["service", "staff"],
            &["food", "dishes"],
            &["atmosphere", "decor"],
            &["wait", "seating"],
            &["prices", "bill"],
            &["menu", "selection"],
        ];
        let words: [&[&str]; 3] = [&["terrible", "awful"], &["okay", "average"], &["excellent", "wonderful"]];
        let absent = TemplateBank::disjoint();
        let cells = nouns
            .iter()
            .enumerate()
            .map(|(a, ns)| {
                let mut c: [Vec<String>; 4] = Default::default();
                for (p, ws) in words.iter().enumerate() {
                    c[p] = ns
                        .iter()
                        .flat_map(|n| ws.iter().map(move |w| format!("The {n} was {w}.")))
                        .collect();
                }
                c[3] = absent.cells[a][3].clone();
                c
            })
            .collect();
        TemplateBank {
            cells,
            filler: absent.filler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != Aspect::ALL.len() {
            return Err(Error::invalid(format!("template bank needs 6 aspects, got {}", self.cells.len())));
        }
        for (a, cells) in Aspect::ALL.iter().zip(&self.cells) {
            for (c, templates) in cells.iter().enumerate() {
                if templates.is_empty() {
                    let polarity = ["negative", "neutral", "positive", "absent"][c];
                    return Err(Error::invalid(format!("empty template cell: {} / {polarity}", a.name())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_businesses: usize,
    pub reviews_per_business: usize,
    /// Rating weight per aspect, in storage order.
    pub weights: [f64; 6],
    pub sigma: f64,
    pub seed: u64,
    /// Probability that a review mentions a given aspect.
    pub relevance: f64,
    /// Share of mentions that are neutral.
    pub neutral_share: f64,
    pub mode: TemplateMode,
    #[serde(skip)]
    pub bank: Option<TemplateBank>,
}

impl SynthSpec {
    pub fn new(n_businesses: usize, reviews_per_business: usize, seed: u64) -> SynthSpec {
        let mut weights = [0.0; 6];
        weights[Aspect::FoodQuality.index()] = 1.5;
        weights[Aspect::Service.index()] = 0.7;
        SynthSpec {
            n_businesses,
            reviews_per_business,
            weights,
            sigma: 0.1,
            seed,
            relevance: 0.6,
            neutral_share: 0.15,
            mode: TemplateMode::Disjoint,
            bank: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_businesses == 0 || self.reviews_per_business == 0 {
            return Err(Error::invalid("synthetic corpus needs at least one business and one review each"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("aspect weights must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be a non-negative number"));
        }
        for (name, p) in [("relevance", self.relevance), ("neutral_share", self.neutral_share)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    fn bank(&self) -> TemplateBank {
        self.bank.clone().unwrap_or_else(|| TemplateBank::for_mode(self.mode))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_businesses: usize,
    pub reviews_per_business: usize,
    pub intercept: f64,
    pub weights: BTreeMap<String, f64>,
    pub sigma: f64,
    pub relevance: f64,
    pub neutral_share: f64,
    pub mode: TemplateMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub businesses: Vec<Business>,
    pub reviews: Vec<Review>,
    pub labels: Vec<AspectLabelSet>,
    pub truth: GroundTruth,
}

pub const BUSINESS_FILE: &str = "business.json";
pub const REVIEW_FILE: &str = "review.json";
pub const LABEL_FILE: &str = "labels.csv";
pub const TRUTH_FILE: &str = "truth.json";

const STATES: [&str; 14] = ["AB", "AZ", "CA", "DE", "FL", "ID", "IL", "IN", "LA", "MO", "NJ", "NV", "PA", "TN"];

/// Category strings that normalize to each cuisine.
const CATEGORIES: [&str; 11] = [
    "Restaurants, American (New)",
    "Restaurants, Italian, Pizza",
    "Restaurants, Mexican",
    "Restaurants, Chinese",
    "Restaurants, Japanese, Sushi Bars",
    "Restaurants, Thai",
    "Restaurants, Mediterranean",
    "Restaurants, Indian",
    "Restaurants, Cajun/Creole",
    "Restaurants, Vietnamese",
    "Restaurants, Buffets",
];

fn pick<'a, T>(rng: &mut StageRng, items: &'a [T]) -> &'a T {
    &items[rng::index(rng, items.len())]
}

/// Star rating from aspect sentiments: clamp(round(3 + w·s + noise), 1, 5).
pub fn review_stars(weights: &[f64; 6], sentiments: &[f64; 6], noise: f64) -> u8 {
    let raw = 3.0 + weights.iter().zip(sentiments).map(|(w, s)| w * s).sum::<f64>() + noise;
    raw.round().clamp(1.0, 5.0) as u8
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let bank = spec.bank();
    bank.validate()?;
    let mut rng = rng::stream(spec.seed, GENERATOR_STREAM);
    let users = (spec.n_businesses * spec.reviews_per_business / 3).max(1);

    let mut businesses = Vec::with_capacity(spec.n_businesses);
    let mut reviews = Vec::with_capacity(spec.n_businesses * spec.reviews_per_business);
    let mut labels = Vec::with_capacity(reviews.capacity());
    for b in 0..spec.n_businesses {
        let business_id = format!("synth-b{b:06}");
        let state = *pick(&mut rng, &STATES);
        let categories = *pick(&mut rng, &CATEGORIES);
        let propensity: [f64; 6] = std::array::from_fn(|_| rng::unit(&mut rng));
        let mut star_sum = 0u32;
        for r in 0..spec.reviews_per_business {
            let review_id = format!("synth-r{b:06}-{r:04}");
            let mut set = [None; 6];
            let mut values = [0.0; 6];
            for a in 0..6 {
                if rng::unit(&mut rng) < spec.relevance {
                    let s = if rng::unit(&mut rng) < spec.neutral_share {
                        Sentiment::Neutral
                    } else if rng::unit(&mut rng) < propensity[a] {
                        Sentiment::Positive
                    } else {
                        Sentiment::Negative
                    };
                    set[a] = Some(s);
                    values[a] = f64::from(s.value());
                }
            }
            let stars = review_stars(&spec.weights, &values, spec.sigma * rng::normal(&mut rng));
            star_sum += u32::from(stars);

            let mut sentences: Vec<&str> = (0..6)
                .map(|a| pick(&mut rng, &bank.cells[a][cell(set[a])]).as_str())
                .collect();
            if rng::unit(&mut rng) < 0.5 {
                sentences.push(pick(&mut rng, &bank.filler));
            }
            rng::shuffle(&mut rng, &mut sentences);

            reviews.push(Review {
                review_id: review_id.clone(),
                user_id: format!("synth-u{:06}", rng::index(&mut rng, users)),
                business_id: business_id.clone(),
                stars,
                text: sentences.join(" "),
                date: format!("2021-{:02}-{:02} 12:00:00", 1 + r % 12, 1 + b % 28),
            });
            labels.push(AspectLabelSet { review_id, labels: set });
        }
        let mean = f64::from(star_sum) / spec.reviews_per_business as f64;
        businesses.push(Business {
            business_id,
            name: format!("Synthetic Eatery {b}"),
            address: String::new(),
            city: String::new(),
            state: state.to_string(),
            postal_code: String::new(),
            overall_rating: (mean * 2.0).round() / 2.0,
            review_count: spec.reviews_per_business as u64,
            categories: categories.to_string(),
        });
    }

    let truth = GroundTruth {
        seed: spec.seed,
        n_businesses: spec.n_businesses,
        reviews_per_business: spec.reviews_per_business,
        intercept: 3.0,
        weights: Aspect::ALL.iter().map(|a| (a.name().to_string(), spec.weights[a.index()])).collect(),
        sigma: spec.sigma,
        relevance: spec.relevance,
        neutral_share: spec.neutral_share,
        mode: spec.mode,
    };
    Ok(SynthCorpus {
        businesses,
        reviews,
        labels,
        truth,
    })
}

impl SynthCorpus {
    /// Joined records, as ingest would produce them.
    pub fn records(&self) -> Vec<CorpusRecord> {
        let by_id: BTreeMap<&str, &Business> = self.businesses.iter().map(|b| (b.business_id.as_str(), b)).collect();
        self.reviews
            .iter()
            .map(|r| {
                let b = by_id[r.business_id.as_str()];
                CorpusRecord {
                    review_id: r.review_id.clone(),
                    user_id: r.user_id.clone(),
                    business_id: r.business_id.clone(),
                    stars: r.stars,
                    text: r.text.clone(),
                    date: r.date.clone(),
                    state: b.state.clone(),
                    overall_rating: b.overall_rating,
                    cuisine: normalize_cuisine(&b.categories),
                }
            })
            .collect()
    }

    /// Writes business and review JSON lines, labels and ground truth.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths: Vec<PathBuf> = [BUSINESS_FILE, REVIEW_FILE, LABEL_FILE, TRUTH_FILE]
            .iter()
            .map(|f| dir.join(f))
            .collect();
        write_lines(&paths[0], &self.businesses)?;
        write_lines(&paths[1], &self.reviews)?;
        let file = File::create(&paths[2]).map_err(|e| Error::io(&paths[2], e))?;
        write_labels(BufWriter::new(file), &self.labels)?;
        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        std::fs::write(&paths[3], truth).map_err(|e| Error::io(&paths[3], e))?;
        Ok(paths)
    }
}

fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Cuisine;
    use crate::textprep::preprocess;
    use std::collections::HashMap;

    #[test]
    fn disjoint_vocabularies_survive_preprocessing() {
        let bank = TemplateBank::disjoint();
        let mut owner: HashMap<String, (usize, usize)> = HashMap::new();
        let mut shared = Vec::new();
        for (a, cells) in bank.cells.iter().enumerate() {
            for (c, templates) in cells.iter().enumerate() {
                let mut any = false;
                for t in templates {
                    for tok in preprocess(t) {
                        any = true;
                        if let Some(prev) = owner.insert(tok.clone(), (a, c)) {
                            if prev != (a, c) {
                                shared.push((tok, prev, (a, c)));
                            }
                        }
                    }
                }
                assert!(any, "cell {a}/{c} has no content tokens");
            }
        }
        assert!(shared.is_empty(), "tokens shared between cells: {shared:?}");
        for t in &bank.filler {
            for tok in preprocess(t) {
                assert!(!owner.contains_key(&tok), "filler token {tok:?} also in a cell");
            }
        }
    }

    #[test]
    fn categories_cover_every_cuisine() {
        let got: Vec<Cuisine> = CATEGORIES.iter().map(|c| normalize_cuisine(c)).collect();
        assert_eq!(got, Cuisine::ALL);
    }

    #[test]
    fn zero_weights_give_three_stars() {
        assert_eq!(review_stars(&[0.0; 6], &[1.0, -1.0, 0.0, 1.0, 1.0, -1.0], 0.0), 3);
        let mut w = [0.0; 6];
        w[Aspect::FoodQuality.index()] = 2.0;
        let mut s = [0.0; 6];
        s[Aspect::FoodQuality.index()] = 1.0;
        assert_eq!(review_stars(&w, &s, 0.0), 5);
        w[Aspect::FoodQuality.index()] = 9.0;
        assert_eq!(review_stars(&w, &s, 0.0), 5);
    }

    #[test]
    fn noiseless_zero_weight_corpus() {
        let mut spec = SynthSpec::new(3, 5, 1);
        spec.weights = [0.0; 6];
        spec.sigma = 0.0;
        let c = generate(&spec).unwrap();
        assert!(c.reviews.iter().all(|r| r.stars == 3));
        assert!(c.businesses.iter().all(|b| b.overall_rating == 3.0));
    }

    #[test]
    fn empty_cell_is_rejected() {
        let mut bank = TemplateBank::disjoint();
        bank.cells[4][1].clear();
        let mut spec = SynthSpec::new(1, 1, 1);
        spec.bank = Some(bank);
        let err = generate(&spec).unwrap_err();
        assert!(err.to_string().contains("price / neutral"), "{err}");
    }

    #[test]
    fn overlap_bank_is_valid() {
        TemplateBank::overlapping().validate().unwrap();
    }
}

//! The six dining aspects and the three-point sentiment scale shared by
//! every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Service,
    FoodQuality,
    Ambiance,
    WaitTime,
    Price,
    MenuVariety,
}

impl Aspect {
    /// Storage order: the column order of label and prediction files.
    pub const ALL: [Aspect; 6] = [
        Aspect::Service,
        Aspect::FoodQuality,
        Aspect::Ambiance,
        Aspect::WaitTime,
        Aspect::Price,
        Aspect::MenuVariety,
    ];

    /// Column order used by the published metric tables.
    pub const REPORT_ORDER: [Aspect; 6] = [
        Aspect::Service,
        Aspect::Ambiance,
        Aspect::FoodQuality,
        Aspect::MenuVariety,
        Aspect::WaitTime,
        Aspect::Price,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Service => "service",
            Aspect::FoodQuality => "food_quality",
            Aspect::Ambiance => "ambiance",
            Aspect::WaitTime => "wait_time",
            Aspect::Price => "price",
            Aspect::MenuVariety => "menu_variety",
        }
    }

    /// Short column title used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Aspect::Service => "Service",
            Aspect::FoodQuality => "Quality",
            Aspect::Ambiance => "Ambiance",
            Aspect::WaitTime => "Wait Time",
            Aspect::Price => "Price",
            Aspect::MenuVariety => "Menu",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Aspect::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown aspect {s:?}")))
    }
}

/// Sentiment polarity on the -1/0/+1 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i32", try_from = "i32")]
pub enum Sentiment {
    Negative = -1,
    Neutral = 0,
    Positive = 1,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn value(self) -> i32 {
        self as i32
    }

    pub fn from_value(v: i32) -> Option<Sentiment> {
        match v {
            -1 => Some(Sentiment::Negative),
            0 => Some(Sentiment::Neutral),
            1 => Some(Sentiment::Positive),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sentiment::Negative => "Negative",
            Sentiment::Neutral => "Neutral",
            Sentiment::Positive => "Positive",
        }
    }
}

impl From<Sentiment> for i32 {
    fn from(s: Sentiment) -> i32 {
        s.value()
    }
}

impl TryFrom<i32> for Sentiment {
    type Error = String;

    fn try_from(v: i32) -> Result<Self, Self::Error> {
        Sentiment::from_value(v).ok_or_else(|| format!("invalid sentiment {v}"))
    }
}

/// Formats an optional label the way label files store it.
pub fn label_cell(label: Option<Sentiment>) -> String {
    match label {
        Some(s) => s.value().to_string(),
        None => "NA".to_string(),
    }
}

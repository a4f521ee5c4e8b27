//! Cited-reference parsing and venue matching.
//!
//! Two raw layouts are accepted:
//!
//! * comma-separated `AUTHOR, YEAR, VENUE, VOL, PAGE`: the year is the first
//!   field made of exactly four ASCII digits and the venue is the field right
//!   after it. Without such a field the year is `InvalidFormat` and the venue
//!   falls back to the third field.
//! * structured `VENUE|YEAR`, split at the last `|`.
//!
//! Venues are matched by exact equality of normalized abbreviations.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{Corpus, JournalTable, MIN_VALID_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum YearStatus {
    Valid,
    InvalidFormat,
    Pre1900,
    Future,
}

impl YearStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            YearStatus::Valid => "valid",
            YearStatus::InvalidFormat => "invalid_format",
            YearStatus::Pre1900 => "pre1900",
            YearStatus::Future => "future",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitedRef {
    pub venue_abbrev: String,
    pub year: Option<i32>,
    pub year_status: YearStatus,
    pub matched_journal: Option<Arc<str>>,
}

impl CitedRef {
    /// Valid year that falls inside `[1900, census_year]`.
    pub fn valid_year(&self) -> Option<i32> {
        match self.year_status {
            YearStatus::Valid => self.year,
            _ => None,
        }
    }
}

/// Uppercase, collapse runs of whitespace, and strip trailing punctuation.
pub fn normalize_venue(s: &str) -> String {
    let upper = s.to_uppercase();
    let collapsed = upper.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| ".,;:!?".contains(c) || c.is_whitespace())
        .to_owned()
}

pub fn classify_year(year: i32, census_year: i32) -> YearStatus {
    if year < MIN_VALID_YEAR {
        YearStatus::Pre1900
    } else if year > census_year {
        YearStatus::Future
    } else {
        YearStatus::Valid
    }
}

fn year_token(tok: &str) -> Option<i32> {
    let tok = tok.trim();
    if tok.len() == 4 && tok.bytes().all(|b| b.is_ascii_digit()) {
        tok.parse().ok()
    } else {
        None
    }
}

pub fn parse_reference(raw: &str, census_year: i32) -> CitedRef {
    let raw = raw.trim();
    let (venue, year) = if let Some((venue, year)) = raw.rsplit_once('|') {
        (venue, year_token(year))
    } else {
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        match fields.iter().position(|f| year_token(f).is_some()) {
            Some(i) => (fields.get(i + 1).copied().unwrap_or(""), year_token(fields[i])),
            None => (fields.get(2).copied().unwrap_or(""), None),
        }
    };
    let year_status = match year {
        Some(y) => classify_year(y, census_year),
        None => YearStatus::InvalidFormat,
    };
    CitedRef {
        venue_abbrev: normalize_venue(venue),
        year,
        year_status,
        matched_journal: None,
    }
}

/// Exact lookup of a venue (normalized on the way in).
pub fn match_venue(venue_abbrev: &str, journals: &JournalTable) -> Option<Arc<str>> {
    let norm = normalize_venue(venue_abbrev);
    if norm.is_empty() {
        return None;
    }
    journals.resolve_abbrev(&norm).cloned()
}

/// Parse and match in one step.
pub fn resolve_reference(raw: &str, census_year: i32, journals: &JournalTable) -> CitedRef {
    let mut cited = parse_reference(raw, census_year);
    if !cited.venue_abbrev.is_empty() {
        cited.matched_journal = journals.resolve_abbrev(&cited.venue_abbrev).cloned();
    }
    cited
}

/// Parse and match every reference in the corpus, replacing any earlier
/// result. Each distinct raw string is resolved once.
pub fn match_corpus(corpus: &mut Corpus, journals: &JournalTable) {
    let census_year = corpus.census_year;
    let mut distinct: Vec<Arc<str>> = {
        let mut seen: HashMap<&str, ()> = HashMap::new();
        let mut out = Vec::new();
        for doc in &corpus.documents {
            for r in &doc.refs {
                if seen.insert(&*r.raw, ()).is_none() {
                    out.push(Arc::clone(&r.raw));
                }
            }
        }
        out
    };
    distinct.sort_unstable();
    let resolved: HashMap<Arc<str>, Arc<CitedRef>> = distinct
        .into_par_iter()
        .map(|raw| {
            let cited = Arc::new(resolve_reference(&raw, census_year, journals));
            (raw, cited)
        })
        .collect();
    corpus.documents.par_iter_mut().for_each(|doc| {
        for r in &mut doc.refs {
            r.parsed = resolved.get(&r.raw).cloned();
        }
    });
}

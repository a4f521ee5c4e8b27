//! Per-journal citation totals over a citation window, counted as integers
//! or fractionally.
//!
//! Only documents published in the census year cite. A reference counts when
//! its year is valid, falls in the window, and its venue matched a journal.
//! Fractional weights are `1/k` with `k` the citing document's number of valid
//! in-window references (matched or not), or `1/NRef` for the `+` variants.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Corpus, Document, JournalTable, MIN_VALID_YEAR};
use crate::error::{Error, Result};
use crate::tsv::{self, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowKind {
    TwoYear,
    FiveYear,
    AllYears,
}

impl WindowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::TwoYear => "two_year",
            WindowKind::FiveYear => "five_year",
            WindowKind::AllYears => "all_years",
        }
    }
}

impl FromStr for WindowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_year" => Ok(WindowKind::TwoYear),
            "five_year" => Ok(WindowKind::FiveYear),
            "all_years" => Ok(WindowKind::AllYears),
            _ => Err(Error::InvalidInput(format!("unknown window {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub census_year: i32,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, census_year: i32) -> Self {
        WindowSpec { kind, census_year }
    }

    /// Inclusive range of cited publication years.
    pub fn years(&self) -> (i32, i32) {
        let y = self.census_year;
        match self.kind {
            WindowKind::TwoYear => (y - 2, y - 1),
            WindowKind::FiveYear => (y - 5, y - 1),
            WindowKind::AllYears => (MIN_VALID_YEAR, y),
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        let (lo, hi) = self.years();
        (lo..=hi).contains(&year)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.as_str(), self.census_year)
    }
}

pub fn in_window(year: i32, w: &WindowSpec) -> bool {
    w.contains(year)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Counting {
    Integer,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FractionBase {
    /// `1/k`, k = valid in-window references of the citing document.
    InWindow,
    /// `1/NRef`, the citing document's declared total reference count.
    AllRefs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountMode {
    pub counting: Counting,
    /// Only meaningful for fractional counting.
    pub fraction_base: FractionBase,
}

impl CountMode {
    pub const INTEGER: CountMode = CountMode {
        counting: Counting::Integer,
        fraction_base: FractionBase::InWindow,
    };
    pub const FRACTIONAL: CountMode = CountMode {
        counting: Counting::Fractional,
        fraction_base: FractionBase::InWindow,
    };
    pub const FRACTIONAL_ALL_REFS: CountMode = CountMode {
        counting: Counting::Fractional,
        fraction_base: FractionBase::AllRefs,
    };

    pub fn as_str(&self) -> &'static str {
        match (self.counting, self.fraction_base) {
            (Counting::Integer, _) => "integer",
            (Counting::Fractional, FractionBase::InWindow) => "fractional",
            (Counting::Fractional, FractionBase::AllRefs) => "fractional_all_refs",
        }
    }
}

impl FromStr for CountMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer" => Ok(CountMode::INTEGER),
            "fractional" => Ok(CountMode::FRACTIONAL),
            "fractional_all_refs" => Ok(CountMode::FRACTIONAL_ALL_REFS),
            _ => Err(Error::InvalidInput(format!("unknown count mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub window: WindowSpec,
    pub mode: CountMode,
    pub values: BTreeMap<String, f64>,
    /// Citing documents with at least one valid in-window reference.
    pub contributing_docs: usize,
}

impl CountTable {
    pub fn total(&self) -> f64 {
        self.values.values().copied().collect::<CompensatedSum>().value()
    }

    pub fn format_value(&self, v: f64) -> String {
        match self.mode.counting {
            Counting::Integer => format!("{}", v.round() as u64),
            Counting::Fractional => format!("{v:.9}"),
        }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<count table output>", e);
        tsv::write_row(&mut w, &["journal_id", "window", "mode", "value"]).map_err(io)?;
        for (j, &v) in &self.values {
            tsv::write_row(
                &mut w,
                &[j.as_str(), self.window.kind.as_str(), self.mode.as_str(), &self.format_value(v)],
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Valid in-window references of a document (matched or not).
pub fn in_window_ref_count(doc: &Document, w: &WindowSpec) -> usize {
    doc.refs
        .iter()
        .filter_map(|r| r.parsed.as_ref()?.valid_year())
        .filter(|&y| w.contains(y))
        .count()
}

/// Weight carried by each credited reference of `doc`, keyed by its index in
/// `doc.refs`. Only matched, valid, in-window references are credited.
/// Unparsed references are treated as invalid.
pub fn fractional_weights(doc: &Document, w: &WindowSpec, mode: CountMode) -> BTreeMap<usize, f64> {
    let k = in_window_ref_count(doc, w);
    let weight = match (mode.counting, mode.fraction_base) {
        (Counting::Integer, _) => 1.0,
        (Counting::Fractional, FractionBase::InWindow) => {
            if k == 0 {
                return BTreeMap::new();
            }
            1.0 / k as f64
        }
        (Counting::Fractional, FractionBase::AllRefs) => {
            if doc.ref_count == 0 {
                return BTreeMap::new();
            }
            debug_assert!(
                doc.ref_count as usize >= k,
                "document {} declares NRef {} below its {} in-window references",
                doc.doc_id,
                doc.ref_count,
                k
            );
            1.0 / doc.ref_count as f64
        }
    };
    doc.refs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let p = r.parsed.as_ref()?;
            let y = p.valid_year()?;
            (w.contains(y) && p.matched_journal.is_some()).then_some((i, weight))
        })
        .collect()
}

const CHUNK: usize = 8192;

/// Sum credited weights per journal.
///
/// Documents are visited in `doc_id` order and each journal's total is
/// accumulated with compensated summation, so the result does not depend on
/// the input order or the rayon thread count.
pub fn count_citations(corpus: &Corpus, journals: &JournalTable, w: WindowSpec, mode: CountMode) -> CountTable {
    let mut citing: Vec<&Document> = corpus.citing_documents().collect();
    citing.sort_unstable_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut acc = vec![CompensatedSum::default(); journals.len()];
    let mut contributing_docs = 0usize;
    for chunk in citing.chunks(CHUNK) {
        let partial: Vec<(bool, Vec<(usize, f64)>)> = chunk
            .par_iter()
            .map(|doc| {
                let contributes = in_window_ref_count(doc, &w) > 0;
                let mut credits: Vec<(usize, f64)> = Vec::new();
                for (i, weight) in fractional_weights(doc, &w, mode) {
                    let target = doc.refs[i].parsed.as_ref().and_then(|p| p.matched_journal.as_deref());
                    if let Some(idx) = target.and_then(|t| journals.index_of(t)) {
                        match credits.iter_mut().find(|(j, _)| *j == idx) {
                            Some((_, s)) => *s += weight,
                            None => credits.push((idx, weight)),
                        }
                    }
                }
                (contributes, credits)
            })
            .collect();
        for (contributes, credits) in partial {
            contributing_docs += usize::from(contributes);
            for (idx, weight) in credits {
                acc[idx].add(weight);
            }
        }
    }

    let values = journals
        .journals()
        .iter()
        .zip(&acc)
        .map(|(j, s)| (j.journal_id.clone(), s.value()))
        .collect();
    CountTable {
        window: w,
        mode,
        values,
        contributing_docs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_corpus, read_journals, LoadOptions, SourceFormat};
    use crate::refmatch::match_corpus;

    fn setup(docs: &str) -> (Corpus, JournalTable) {
        let journals = read_journals(
            "journal_id\tfull_name\tabbrevs\tfield\tmerge_group\n\
             J\tJ\tJ X\tF\t\n\
             K\tK\tJ Y\tF\t\n"
                .as_bytes(),
        )
        .unwrap();
        let mut corpus = read_corpus(
            docs.as_bytes(),
            SourceFormat::Jsonl,
            2010,
            LoadOptions { allow_truncated: true },
        )
        .unwrap()
        .corpus;
        match_corpus(&mut corpus, &journals);
        (corpus, journals)
    }

    #[test]
    fn window_membership() {
        let two = WindowSpec::new(WindowKind::TwoYear, 2010);
        let five = WindowSpec::new(WindowKind::FiveYear, 2010);
        let all = WindowSpec::new(WindowKind::AllYears, 2010);
        assert!(in_window(2008, &two));
        assert!(in_window(2009, &two));
        assert!(!in_window(2005, &two));
        assert!(!in_window(2010, &two));
        assert!(in_window(2005, &five));
        assert!(!in_window(2004, &five));
        assert!(in_window(1900, &all));
        assert!(in_window(2010, &all));
        assert!(!in_window(2011, &all));
    }

    #[test]
    fn weights_per_mode() {
        let (corpus, _) = setup(
            r#"{"doc_id":"d","journal":"J","year":2010,"type":"article","nref":40,"refs":["J X|2008","J X|2009","J Y|2009","J Y|2008","J X|2001"]}"#,
        );
        let doc = &corpus.documents[0];
        let two = WindowSpec::new(WindowKind::TwoYear, 2010);
        let frac = fractional_weights(doc, &two, CountMode::FRACTIONAL);
        assert_eq!(frac.len(), 4);
        assert!(frac.values().all(|&w| w == 0.25));
        let plus = fractional_weights(doc, &two, CountMode::FRACTIONAL_ALL_REFS);
        assert!(plus.values().all(|&w| w == 0.025));
        let int = fractional_weights(doc, &two, CountMode::INTEGER);
        assert_eq!(int.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn no_in_window_refs_gives_empty_weights() {
        let (corpus, _) = setup(
            r#"{"doc_id":"d","journal":"J","year":2010,"type":"article","refs":["J X|1990"]}"#,
        );
        let two = WindowSpec::new(WindowKind::TwoYear, 2010);
        assert!(fractional_weights(&corpus.documents[0], &two, CountMode::FRACTIONAL).is_empty());
    }

    #[test]
    fn unmatched_refs_enter_k_but_are_not_credited() {
        let (corpus, journals) = setup(
            r#"{"doc_id":"d","journal":"J","year":2010,"type":"article","refs":["J X|2009","NOWHERE|2009","J X|1850","BAD, 19, J X"]}"#,
        );
        let two = WindowSpec::new(WindowKind::TwoYear, 2010);
        let t = count_citations(&corpus, &journals, two, CountMode::FRACTIONAL);
        assert_eq!(t.values["J"], 0.5);
        assert_eq!(t.values["K"], 0.0);
        assert_eq!(t.contributing_docs, 1);
    }

    #[test]
    fn doc_citing_one_journal_twice() {
        let (corpus, journals) = setup(
            r#"{"doc_id":"d","journal":"K","year":2010,"type":"article","refs":["J X|2009","J X|2008"]}"#,
        );
        let two = WindowSpec::new(WindowKind::TwoYear, 2010);
        let frac = count_citations(&corpus, &journals, two, CountMode::FRACTIONAL);
        assert_eq!(frac.values["J"], 1.0);
        let int = count_citations(&corpus, &journals, two, CountMode::INTEGER);
        assert_eq!(int.values["J"], 2.0);
        assert_eq!(int.format_value(int.values["J"]), "2");
        assert_eq!(frac.format_value(0.5), "0.500000000");
    }

    #[test]
    fn non_census_documents_do_not_cite() {
        let (corpus, journals) = setup(
            r#"{"doc_id":"d","journal":"K","year":2009,"type":"article","refs":["J X|2008"]}"#,
        );
        let all = WindowSpec::new(WindowKind::AllYears, 2010);
        let t = count_citations(&corpus, &journals, all, CountMode::INTEGER);
        assert_eq!(t.values["J"], 0.0);
        assert_eq!(t.contributing_docs, 0);
    }

    #[test]
    fn future_refs_are_outside_all_years() {
        let (corpus, journals) = setup(
            r#"{"doc_id":"d","journal":"K","year":2010,"type":"article","refs":["J X|2012","J X|2010"]}"#,
        );
        let all = WindowSpec::new(WindowKind::AllYears, 2010);
        let t = count_citations(&corpus, &journals, all, CountMode::FRACTIONAL);
        assert_eq!(t.values["J"], 1.0);
    }
}

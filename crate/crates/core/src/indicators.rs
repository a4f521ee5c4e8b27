//! Ratio indicators built from count tables: quasi impact factors over two
//! and five years, the fractional citations-per-publication ratio, and the
//! full variable registry emitted by the `indicators` command.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{Corpus, DocType, JournalTable};
use crate::counts::{count_citations, CountMode, CountTable, WindowKind, WindowSpec};
use crate::error::{Error, RecordError, Result};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenominatorWindow {
    TwoYear,
    FiveYear,
    CensusOnly,
}

impl DenominatorWindow {
    pub fn as_str(self) -> &'static str {
        match self {
            DenominatorWindow::TwoYear => "two_year",
            DenominatorWindow::FiveYear => "five_year",
            DenominatorWindow::CensusOnly => "census_only",
        }
    }

    fn years(self, census_year: i32) -> (i32, i32) {
        match self {
            DenominatorWindow::TwoYear => (census_year - 2, census_year - 1),
            DenominatorWindow::FiveYear => (census_year - 5, census_year - 1),
            DenominatorWindow::CensusOnly => (census_year, census_year),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorTable {
    pub window: DenominatorWindow,
    pub census_year: i32,
    pub values: BTreeMap<String, u64>,
}

/// Citable items per journal summed over the window years.
///
/// Journals with `items_by_year` entries use them. Journals without any
/// entries fall back to counting the corpus's own documents of the citable
/// types, when a corpus is supplied; otherwise they get 0.
pub fn compute_denominator(
    journals: &JournalTable,
    corpus: Option<&Corpus>,
    window: DenominatorWindow,
    census_year: i32,
    citable_types: &BTreeSet<DocType>,
) -> DenominatorTable {
    let (lo, hi) = window.years(census_year);
    let mut from_corpus: BTreeMap<&str, u64> = BTreeMap::new();
    if let Some(c) = corpus {
        for d in &c.documents {
            if (lo..=hi).contains(&d.pub_year) && citable_types.contains(&d.doc_type) {
                *from_corpus.entry(d.journal_id.as_str()).or_insert(0) += 1;
            }
        }
    }
    let values = journals
        .journals()
        .iter()
        .map(|j| {
            let n = if j.items_by_year.is_empty() {
                from_corpus.get(j.journal_id.as_str()).copied().unwrap_or(0)
            } else {
                j.items_by_year.range(lo..=hi).map(|(_, &n)| n).sum()
            };
            (j.journal_id.clone(), n)
        })
        .collect();
    DenominatorTable {
        window,
        census_year,
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    pub indicator_id: String,
    pub values: BTreeMap<String, f64>,
    /// Journals whose denominator was zero; they carry no value.
    pub undefined_journals: BTreeSet<String>,
}

impl IndicatorTable {
    pub fn new(indicator_id: impl Into<String>) -> Self {
        IndicatorTable {
            indicator_id: indicator_id.into(),
            values: BTreeMap::new(),
            undefined_journals: BTreeSet::new(),
        }
    }

    pub fn from_counts(indicator_id: impl Into<String>, counts: &CountTable) -> Self {
        IndicatorTable {
            indicator_id: indicator_id.into(),
            values: counts.values.clone(),
            undefined_journals: BTreeSet::new(),
        }
    }

    pub fn from_denominators(indicator_id: impl Into<String>, den: &DenominatorTable) -> Self {
        IndicatorTable {
            indicator_id: indicator_id.into(),
            values: den.values.iter().map(|(j, &n)| (j.clone(), n as f64)).collect(),
            undefined_journals: BTreeSet::new(),
        }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<indicator output>", e);
        tsv::write_row(&mut w, &INDICATOR_TSV_HEADER).map_err(io)?;
        for (j, v) in &self.values {
            tsv::write_row(&mut w, &[j.as_str(), &self.indicator_id, &format!("{v:.6}")]).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// One journal id per line, no header.
    pub fn write_undefined<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<undefined output>", e);
        for j in &self.undefined_journals {
            writeln!(w, "{j}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub const INDICATOR_TSV_HEADER: [&str; 3] = ["journal_id", "indicator_id", "value"];

fn ratio(
    indicator_id: &str,
    numerators: &BTreeMap<String, f64>,
    denominators: &BTreeMap<String, u64>,
) -> IndicatorTable {
    let mut out = IndicatorTable::new(indicator_id);
    for (j, &num) in numerators {
        match denominators.get(j).copied().unwrap_or(0) {
            0 => {
                out.undefined_journals.insert(j.clone());
            }
            d => {
                out.values.insert(j.clone(), num / d as f64);
            }
        }
    }
    out
}

/// Citations in the window divided by citable items over the same window.
pub fn quasi_if(indicator_id: &str, numerators: &CountTable, denominators: &DenominatorTable) -> Result<IndicatorTable> {
    let compatible = matches!(
        (numerators.window.kind, denominators.window),
        (WindowKind::TwoYear, DenominatorWindow::TwoYear) | (WindowKind::FiveYear, DenominatorWindow::FiveYear)
    );
    if !compatible || numerators.window.census_year != denominators.census_year {
        return Err(Error::WindowMismatch {
            numerator: numerators.window.to_string(),
            denominator: format!("{}@{}", denominators.window.as_str(), denominators.census_year),
        });
    }
    Ok(ratio(indicator_id, &numerators.values, &denominators.values))
}

/// All-years fractional citations divided by census-year citable items.
pub fn fc_over_p(all_year_fc: &CountTable, items_census: &DenominatorTable) -> Result<IndicatorTable> {
    if all_year_fc.window.kind != WindowKind::AllYears
        || all_year_fc.mode != CountMode::FRACTIONAL
        || items_census.window != DenominatorWindow::CensusOnly
        || all_year_fc.window.census_year != items_census.census_year
    {
        return Err(Error::WindowMismatch {
            numerator: format!("{} {}", all_year_fc.window, all_year_fc.mode.as_str()),
            denominator: format!("{}@{}", items_census.window.as_str(), items_census.census_year),
        });
    }
    Ok(ratio(FC_OVER_P, &all_year_fc.values, &items_census.values))
}

#[derive(Debug)]
pub struct ImportOutcome {
    pub tables: Vec<IndicatorTable>,
    pub warnings: Vec<String>,
    pub errors: Vec<RecordError>,
}

/// Read an indicator TSV in any of the layouts this crate writes:
///
/// * `journal_id, value` (needs `default_id`),
/// * `journal_id, indicator_id, value`,
/// * `journal_id, indicator_id, pr100, pr6` (yields `PR100(id)` and `PR6(id)`).
///
/// Rows for journals absent from `journals` (when given) are dropped with a
/// warning; non-numeric values are record errors.
pub fn read_indicator_tsv<R: BufRead>(
    reader: R,
    default_id: Option<&str>,
    journals: Option<&JournalTable>,
) -> Result<ImportOutcome> {
    let mut lines = tsv::data_lines(reader);
    let header = match lines.next() {
        Some(Ok((_, h))) => h,
        Some(Err(e)) => return Err(Error::io("<indicator input>", e)),
        None => return Err(Error::Header("empty indicator file".into())),
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    enum Layout {
        Pair,
        Long,
        Percentile,
    }
    let layout = match cols.as_slice() {
        ["journal_id", "value"] => Layout::Pair,
        ["journal_id", "indicator_id", "value"] => Layout::Long,
        ["journal_id", "indicator_id", "pr100", "pr6"] => Layout::Percentile,
        _ => return Err(Error::Header(format!("unrecognized indicator header {header:?}"))),
    };
    if matches!(layout, Layout::Pair) && default_id.is_none() {
        return Err(Error::InvalidInput(
            "two-column indicator file needs an indicator id".into(),
        ));
    }

    let mut tables: Vec<IndicatorTable> = Vec::new();
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for item in lines {
        let (line, text) = item.map_err(|e| Error::io("<indicator input>", e))?;
        let f: Vec<&str> = text.split('\t').map(str::trim).collect();
        let expected = match layout {
            Layout::Pair => 2,
            Layout::Long => 3,
            Layout::Percentile => 4,
        };
        if f.len() != expected {
            errors.push(RecordError {
                line,
                message: format!("expected {expected} columns, found {}", f.len()),
            });
            continue;
        }
        let journal = f[0];
        let entries: Vec<(String, &str)> = match layout {
            Layout::Pair => vec![(default_id.unwrap_or_default().to_owned(), f[1])],
            Layout::Long => vec![(f[1].to_owned(), f[2])],
            Layout::Percentile => vec![(format!("PR100({})", f[1]), f[2]), (format!("PR6({})", f[1]), f[3])],
        };
        let mut parsed = Vec::with_capacity(entries.len());
        for (id, raw) in entries {
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push((id, v)),
                _ => {
                    errors.push(RecordError {
                        line,
                        message: format!("non-numeric value {raw:?}"),
                    });
                    parsed.clear();
                    break;
                }
            }
        }
        if parsed.is_empty() {
            continue;
        }
        if let Some(t) = journals {
            if !t.contains(journal) {
                unknown.insert(journal.to_owned());
                continue;
            }
        }
        for (id, v) in parsed {
            let table = match tables.iter_mut().position(|t| t.indicator_id == id) {
                Some(i) => &mut tables[i],
                None => {
                    tables.push(IndicatorTable::new(id));
                    tables.last_mut().expect("just pushed")
                }
            };
            if table.values.insert(journal.to_owned(), v).is_some() {
                errors.push(RecordError {
                    line,
                    message: format!("duplicate journal {journal:?} for {}", table.indicator_id),
                });
            }
        }
    }
    for j in unknown {
        warnings.push(format!("journal {j:?} is not in the journal table; row ignored"));
    }
    Ok(ImportOutcome {
        tables,
        warnings,
        errors,
    })
}

pub fn read_indicator_file(
    path: &Path,
    default_id: Option<&str>,
    journals: Option<&JournalTable>,
) -> Result<ImportOutcome> {
    read_indicator_tsv(tsv::open(path)?, default_id, journals).map_err(|e| match e {
        Error::Header(m) => Error::Header(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Load externally supplied values (for example journal impact factors from
/// another source) under `indicator_id`.
pub fn import_external_indicator(
    path: &Path,
    indicator_id: &str,
    journals: Option<&JournalTable>,
) -> Result<(IndicatorTable, Vec<String>, Vec<RecordError>)> {
    let mut out = read_indicator_file(path, Some(indicator_id), journals)?;
    let mut table = IndicatorTable::new(indicator_id);
    for t in out.tables.drain(..) {
        if t.indicator_id != indicator_id {
            out.warnings.push(format!(
                "{}: rows for indicator {:?} imported as {indicator_id:?}",
                path.display(),
                t.indicator_id
            ));
        }
        table.values.extend(t.values);
    }
    Ok((table, out.warnings, out.errors))
}

// ---------------------------------------------------------------------------
// Variable registry

pub const FC_OVER_P: &str = "FC/P";

/// Names of the count variables and the window/mode that produces them.
pub const COUNT_VARIABLES: [(&str, WindowKind, CountMode); 8] = [
    ("TC-IC", WindowKind::AllYears, CountMode::INTEGER),
    ("TC-IC2", WindowKind::TwoYear, CountMode::INTEGER),
    ("TC-IC5", WindowKind::FiveYear, CountMode::INTEGER),
    ("TC-FC", WindowKind::AllYears, CountMode::FRACTIONAL),
    ("TC-FC2", WindowKind::TwoYear, CountMode::FRACTIONAL),
    ("TC-FC5", WindowKind::FiveYear, CountMode::FRACTIONAL),
    ("TC-FC2+", WindowKind::TwoYear, CountMode::FRACTIONAL_ALL_REFS),
    ("TC-FC5+", WindowKind::FiveYear, CountMode::FRACTIONAL_ALL_REFS),
];

/// Quasi impact factors: id, numerator count variable, denominator window.
pub const QUASI_IF_VARIABLES: [(&str, &str, DenominatorWindow); 6] = [
    ("IF2-IC", "TC-IC2", DenominatorWindow::TwoYear),
    ("IF5-IC", "TC-IC5", DenominatorWindow::FiveYear),
    ("IF2-FC", "TC-FC2", DenominatorWindow::TwoYear),
    ("IF5-FC", "TC-FC5", DenominatorWindow::FiveYear),
    ("IF2-FC+", "TC-FC2+", DenominatorWindow::TwoYear),
    ("IF5-FC+", "TC-FC5+", DenominatorWindow::FiveYear),
];

pub fn items_variable(census_year: i32) -> String {
    format!("Items{census_year}")
}

#[derive(Debug, Clone)]
pub struct RegistryOptions {
    pub citable_types: BTreeSet<DocType>,
    /// Derive citable items from the corpus for journals without
    /// `items_by_year` entries.
    pub items_from_corpus: bool,
}

impl Default for RegistryOptions {
    fn default() -> Self {
        RegistryOptions {
            citable_types: DocType::default_citable(),
            items_from_corpus: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    pub counts: Vec<(String, CountTable)>,
    /// Every computed variable in registry order.
    pub indicators: Vec<IndicatorTable>,
}

impl Registry {
    pub fn get(&self, id: &str) -> Option<&IndicatorTable> {
        self.indicators.iter().find(|t| t.indicator_id == id)
    }

    pub fn count(&self, id: &str) -> Option<&CountTable> {
        self.counts.iter().find(|(n, _)| n == id).map(|(_, t)| t)
    }

    /// Variables that get percentile ranks: everything except the quasi
    /// impact factors and the census-year item count.
    pub fn percentile_variables(&self) -> impl Iterator<Item = &IndicatorTable> {
        self.indicators.iter().filter(|t| {
            !QUASI_IF_VARIABLES.iter().any(|(id, _, _)| *id == t.indicator_id) && !t.indicator_id.starts_with("Items")
        })
    }
}

/// Compute every variable derivable from a matched corpus: quasi impact
/// factors, fc/p, the citation totals, IF numerators and denominators, and
/// census-year items.
pub fn compute_registry(corpus: &Corpus, journals: &JournalTable, opts: &RegistryOptions) -> Result<Registry> {
    let y = corpus.census_year;
    let counts: Vec<(String, CountTable)> = COUNT_VARIABLES
        .iter()
        .map(|&(id, kind, mode)| (id.to_owned(), count_citations(corpus, journals, WindowSpec::new(kind, y), mode)))
        .collect();
    let count = |id: &str| &counts.iter().find(|(n, _)| n == id).expect("registered count").1;

    let src = opts.items_from_corpus.then_some(corpus);
    let den2 = compute_denominator(journals, src, DenominatorWindow::TwoYear, y, &opts.citable_types);
    let den5 = compute_denominator(journals, src, DenominatorWindow::FiveYear, y, &opts.citable_types);
    let items = compute_denominator(journals, src, DenominatorWindow::CensusOnly, y, &opts.citable_types);

    let mut indicators = Vec::new();
    for (id, num, window) in QUASI_IF_VARIABLES {
        let den = match window {
            DenominatorWindow::TwoYear => &den2,
            _ => &den5,
        };
        indicators.push(quasi_if(id, count(num), den)?);
    }
    indicators.push(fc_over_p(count("TC-FC"), &items)?);
    for (id, _, _) in COUNT_VARIABLES {
        indicators.push(IndicatorTable::from_counts(id, count(id)));
    }
    indicators.push(IndicatorTable::from_counts("IF2-Num", count("TC-IC2")));
    indicators.push(IndicatorTable::from_denominators("IF2-Denom", &den2));
    indicators.push(IndicatorTable::from_counts("IF5-Num", count("TC-IC5")));
    indicators.push(IndicatorTable::from_denominators("IF5-Denom", &den5));
    indicators.push(IndicatorTable::from_denominators(items_variable(y), &items));
    Ok(Registry { counts, indicators })
}

/// Wide layout: one row per journal, one column per indicator; undefined
/// cells are `NA`.
pub fn write_wide_tsv<W: Write>(tables: &[IndicatorTable], journals: &JournalTable, mut w: W) -> Result<()> {
    let io = |e| Error::io("<wide output>", e);
    let mut header = vec!["journal_id".to_owned()];
    header.extend(tables.iter().map(|t| t.indicator_id.clone()));
    tsv::write_row(&mut w, &header).map_err(io)?;
    for j in journals.ids() {
        let mut row = vec![j.to_owned()];
        for t in tables {
            row.push(match t.values.get(j) {
                Some(v) => format!("{v:.6}"),
                None => "NA".to_owned(),
            });
        }
        tsv::write_row(&mut w, &row).map_err(io)?;
    }
    w.flush().map_err(io)
}

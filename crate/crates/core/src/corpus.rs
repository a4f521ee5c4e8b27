//! Citing documents, the journal master table, and corpus-level accounting.
//!
//! Reference strings are interned on load: identical raw strings share one
//! allocation, and after [`crate::refmatch::match_corpus`] they also share
//! one parsed [`CitedRef`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordError, Result};
use crate::refmatch::{self, CitedRef, YearStatus};
use crate::tsv;

pub const MIN_VALID_YEAR: i32 = 1900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DocType {
    Article,
    Review,
    Letter,
    Other,
}

impl DocType {
    pub const ALL: [DocType; 4] = [DocType::Article, DocType::Review, DocType::Letter, DocType::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Article => "article",
            DocType::Review => "review",
            DocType::Letter => "letter",
            DocType::Other => "other",
        }
    }

    /// Map an input string onto the fixed vocabulary. The boolean is false
    /// when the string was not recognized and fell back to `Other`.
    pub fn classify(s: &str) -> (DocType, bool) {
        match s.trim().to_ascii_lowercase().as_str() {
            "article" => (DocType::Article, true),
            "review" => (DocType::Review, true),
            "letter" => (DocType::Letter, true),
            "other" => (DocType::Other, true),
            _ => (DocType::Other, false),
        }
    }

    /// Parse a comma-separated list such as `article,review`.
    pub fn parse_set(s: &str) -> Result<BTreeSet<DocType>> {
        let mut out = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match DocType::classify(part) {
                (t, true) => {
                    out.insert(t);
                }
                (_, false) => {
                    return Err(Error::InvalidInput(format!("unknown document type {part:?}")))
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("empty document type list".into()));
        }
        Ok(out)
    }

    /// Articles and reviews.
    pub fn default_citable() -> BTreeSet<DocType> {
        [DocType::Article, DocType::Review].into_iter().collect()
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawReference {
    pub raw: Arc<str>,
    pub parsed: Option<Arc<CitedRef>>,
}

impl RawReference {
    pub fn new(raw: impl Into<Arc<str>>) -> Self {
        RawReference {
            raw: raw.into(),
            parsed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub journal_id: String,
    pub pub_year: i32,
    pub doc_type: DocType,
    pub refs: Vec<RawReference>,
    /// Declared total number of references (NRef). Equal to `refs.len()`
    /// unless the input declared truncated reference lists.
    pub ref_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceFormat {
    Jsonl,
    Tsv,
}

impl SourceFormat {
    /// Guess from the file extension; anything other than `.tsv` is JSONL.
    pub fn from_path(path: &Path) -> SourceFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => SourceFormat::Tsv,
            _ => SourceFormat::Jsonl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceFormat::Jsonl => "jsonl",
            SourceFormat::Tsv => "tsv",
        }
    }
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(SourceFormat::Jsonl),
            "tsv" => Ok(SourceFormat::Tsv),
            other => Err(Error::InvalidInput(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub census_year: i32,
    pub documents: Vec<Document>,
    pub source_format: SourceFormat,
}

impl Corpus {
    pub fn total_refs(&self) -> usize {
        self.documents.iter().map(|d| d.refs.len()).sum()
    }

    /// Documents published in the census year; these are the citing side.
    pub fn citing_documents(&self) -> impl Iterator<Item = &Document> {
        let year = self.census_year;
        self.documents.iter().filter(move |d| d.pub_year == year)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Accept `nref` larger than the number of listed references.
    pub allow_truncated: bool,
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    pub errors: Vec<RecordError>,
    pub warnings: Vec<String>,
}

pub const CORPUS_TSV_HEADER: [&str; 6] = ["doc_id", "journal", "year", "type", "nref", "refs"];

#[derive(Debug, Serialize, Deserialize)]
struct DocRecord {
    doc_id: String,
    journal: String,
    year: i32,
    #[serde(rename = "type")]
    doc_type: String,
    #[serde(default)]
    nref: Option<u32>,
    refs: Vec<String>,
}

pub fn load_corpus(path: &Path, format: SourceFormat, census_year: i32) -> Result<LoadOutcome> {
    load_corpus_with(path, format, census_year, LoadOptions::default())
}

pub fn load_corpus_with(
    path: &Path,
    format: SourceFormat,
    census_year: i32,
    opts: LoadOptions,
) -> Result<LoadOutcome> {
    let reader = tsv::open(path)?;
    read_corpus(reader, format, census_year, opts).map_err(|e| match e {
        Error::Header(msg) => Error::Header(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Read a corpus from any buffered reader. A malformed header is fatal;
/// malformed records are skipped and reported in [`LoadOutcome::errors`].
pub fn read_corpus<R: BufRead>(
    reader: R,
    format: SourceFormat,
    census_year: i32,
    opts: LoadOptions,
) -> Result<LoadOutcome> {
    let mut builder = CorpusBuilder::new(census_year, opts);
    let mut lines = tsv::data_lines(reader);

    if format == SourceFormat::Tsv {
        match lines.next() {
            Some(Ok((_, header))) => tsv::expect_header(&header, &CORPUS_TSV_HEADER, true)?,
            Some(Err(e)) => return Err(Error::io("<corpus>", e)),
            None => return Err(Error::Header("empty corpus file".into())),
        }
    }

    for item in lines {
        let (line_no, line) = item.map_err(|e| Error::io("<corpus>", e))?;
        let record = match format {
            SourceFormat::Jsonl => serde_json::from_str::<DocRecord>(&line)
                .map_err(|e| format!("invalid JSON record: {e}")),
            SourceFormat::Tsv => parse_tsv_record(&line),
        };
        match record {
            Ok(rec) => builder.push(line_no, rec),
            Err(message) => builder.errors.push(RecordError {
                line: line_no,
                message,
            }),
        }
    }

    Ok(builder.finish(format))
}

fn parse_tsv_record(line: &str) -> std::result::Result<DocRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != CORPUS_TSV_HEADER.len() {
        return Err(format!(
            "expected {} columns, found {}",
            CORPUS_TSV_HEADER.len(),
            cols.len()
        ));
    }
    let year = cols[2]
        .trim()
        .parse::<i32>()
        .map_err(|_| format!("non-numeric year {:?}", cols[2]))?;
    let nref = match cols[4].trim() {
        "" => None,
        s => Some(s.parse::<u32>().map_err(|_| format!("non-numeric nref {s:?}"))?),
    };
    let refs = if cols[5].is_empty() {
        Vec::new()
    } else {
        cols[5].split(';').map(str::to_owned).collect()
    };
    Ok(DocRecord {
        doc_id: cols[0].trim().to_owned(),
        journal: cols[1].trim().to_owned(),
        year,
        doc_type: cols[3].trim().to_owned(),
        nref,
        refs,
    })
}

struct CorpusBuilder {
    census_year: i32,
    opts: LoadOptions,
    documents: Vec<Document>,
    seen: HashSet<String>,
    interned: HashSet<Arc<str>>,
    errors: Vec<RecordError>,
    warnings: Vec<String>,
}

impl CorpusBuilder {
    fn new(census_year: i32, opts: LoadOptions) -> Self {
        CorpusBuilder {
            census_year,
            opts,
            documents: Vec::new(),
            seen: HashSet::new(),
            interned: HashSet::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn intern(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.interned.get(s) {
            return Arc::clone(a);
        }
        let a: Arc<str> = Arc::from(s);
        self.interned.insert(Arc::clone(&a));
        a
    }

    fn push(&mut self, line: usize, rec: DocRecord) {
        if let Err(message) = self.check(&rec) {
            self.errors.push(RecordError { line, message });
            return;
        }
        let (doc_type, known) = DocType::classify(&rec.doc_type);
        if !known {
            self.warnings.push(format!(
                "line {line}: unknown document type {:?} mapped to other",
                rec.doc_type
            ));
        }
        let ref_count = rec.nref.unwrap_or(rec.refs.len() as u32);
        let refs = rec
            .refs
            .iter()
            .map(|r| RawReference::new(self.intern(r)))
            .collect();
        self.seen.insert(rec.doc_id.clone());
        self.documents.push(Document {
            doc_id: rec.doc_id,
            journal_id: rec.journal,
            pub_year: rec.year,
            doc_type,
            refs,
            ref_count,
        });
    }

    fn check(&self, rec: &DocRecord) -> std::result::Result<(), String> {
        if rec.doc_id.is_empty() {
            return Err("empty doc_id".into());
        }
        if self.seen.contains(&rec.doc_id) {
            return Err(format!("duplicate doc_id {:?}", rec.doc_id));
        }
        if rec.journal.is_empty() {
            return Err("empty journal".into());
        }
        if rec.year < MIN_VALID_YEAR || rec.year > self.census_year {
            return Err(format!(
                "publication year {} outside [{MIN_VALID_YEAR}, {}]",
                rec.year, self.census_year
            ));
        }
        if let Some(i) = rec.refs.iter().position(|r| r.trim().is_empty()) {
            return Err(format!("reference {} is empty", i + 1));
        }
        if let Some(nref) = rec.nref {
            let listed = rec.refs.len() as u32;
            if nref < listed {
                return Err(format!("nref {nref} is smaller than the {listed} listed references"));
            }
            if nref > listed && !self.opts.allow_truncated {
                return Err(format!(
                    "nref {nref} exceeds the {listed} listed references and truncated lists are not enabled"
                ));
            }
        }
        Ok(())
    }

    fn finish(self, format: SourceFormat) -> LoadOutcome {
        LoadOutcome {
            corpus: Corpus {
                census_year: self.census_year,
                documents: self.documents,
                source_format: format,
            },
            errors: self.errors,
            warnings: self.warnings,
        }
    }
}

/// Serialize a corpus in either input format. Parsed references are not
/// written; reading the output back yields an identical unparsed corpus.
pub fn write_corpus<W: Write>(corpus: &Corpus, format: SourceFormat, mut w: W) -> Result<()> {
    let io = |e| Error::io("<corpus output>", e);
    if format == SourceFormat::Tsv {
        tsv::write_row(&mut w, &CORPUS_TSV_HEADER).map_err(io)?;
    }
    for doc in &corpus.documents {
        match format {
            SourceFormat::Jsonl => {
                let rec = DocRecord {
                    doc_id: doc.doc_id.clone(),
                    journal: doc.journal_id.clone(),
                    year: doc.pub_year,
                    doc_type: doc.doc_type.as_str().to_owned(),
                    nref: Some(doc.ref_count),
                    refs: doc.refs.iter().map(|r| r.raw.to_string()).collect(),
                };
                serde_json::to_writer(&mut w, &rec)
                    .map_err(|e| Error::InvalidInput(format!("serializing {}: {e}", doc.doc_id)))?;
                w.write_all(b"\n").map_err(io)?;
            }
            SourceFormat::Tsv => {
                let refs: Vec<&str> = doc.refs.iter().map(|r| &*r.raw).collect();
                tsv::write_row(
                    &mut w,
                    &[
                        doc.doc_id.as_str(),
                        &doc.journal_id,
                        &doc.pub_year.to_string(),
                        doc.doc_type.as_str(),
                        &doc.ref_count.to_string(),
                        &refs.join(";"),
                    ],
                )
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

// ---------------------------------------------------------------------------
// Journal master

#[derive(Debug, Clone, PartialEq)]
pub struct Journal {
    pub journal_id: String,
    pub full_name: String,
    pub abbreviations: Vec<String>,
    pub field_code: String,
    pub items_by_year: BTreeMap<i32, u64>,
    pub merge_group: Option<String>,
}

/// Journal master records keyed by `journal_id`, with an index from
/// normalized abbreviation to journal.
///
/// An abbreviation may be listed by several journals only when they all
/// belong to the same merge group; it then resolves to the group's canonical
/// id (the merge-group name), which exists once the parts are merged.
#[derive(Debug, Clone)]
pub struct JournalTable {
    journals: Vec<Journal>,
    by_id: HashMap<String, usize>,
    abbrev_index: HashMap<String, Arc<str>>,
}

pub const JOURNALS_TSV_HEADER: [&str; 5] = ["journal_id", "full_name", "abbrevs", "field", "merge_group"];

impl JournalTable {
    pub fn new(mut journals: Vec<Journal>) -> Result<JournalTable> {
        journals.sort_by(|a, b| a.journal_id.cmp(&b.journal_id));
        let mut by_id = HashMap::with_capacity(journals.len());
        for (i, j) in journals.iter().enumerate() {
            if j.journal_id.is_empty() {
                return Err(Error::InvalidInput("empty journal_id".into()));
            }
            if by_id.insert(j.journal_id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate journal_id {:?}", j.journal_id)));
            }
        }
        // A merge-group name may coincide with a journal id only if that
        // journal is itself a member of the group.
        for j in &journals {
            if let Some(g) = &j.merge_group {
                if let Some(&idx) = by_id.get(g) {
                    if journals[idx].merge_group.as_deref() != Some(g.as_str()) {
                        return Err(Error::InvalidInput(format!(
                            "merge group {g:?} collides with journal {g:?} outside the group"
                        )));
                    }
                }
            }
        }

        let mut abbrev_index: HashMap<String, Arc<str>> = HashMap::new();
        let mut owner: HashMap<String, usize> = HashMap::new();
        for (i, j) in journals.iter().enumerate() {
            for a in &j.abbreviations {
                let norm = refmatch::normalize_venue(a);
                if norm.is_empty() {
                    continue;
                }
                match owner.get(&norm) {
                    None => {
                        owner.insert(norm.clone(), i);
                        abbrev_index.insert(norm, Arc::from(j.journal_id.as_str()));
                    }
                    Some(&prev) if prev == i => {}
                    Some(&prev) => {
                        let other = &journals[prev];
                        match (&other.merge_group, &j.merge_group) {
                            (Some(g1), Some(g2)) if g1 == g2 => {
                                abbrev_index.insert(norm, Arc::from(g1.as_str()));
                            }
                            _ => {
                                return Err(Error::AmbiguousAbbreviation {
                                    abbrev: norm,
                                    first: other.journal_id.clone(),
                                    second: j.journal_id.clone(),
                                })
                            }
                        }
                    }
                }
            }
        }

        Ok(JournalTable {
            journals,
            by_id,
            abbrev_index,
        })
    }

    pub fn journals(&self) -> &[Journal] {
        &self.journals
    }

    pub fn len(&self) -> usize {
        self.journals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journals.is_empty()
    }

    pub fn get(&self, journal_id: &str) -> Option<&Journal> {
        self.by_id.get(journal_id).map(|&i| &self.journals[i])
    }

    /// Position of a journal in [`JournalTable::journals`].
    pub fn index_of(&self, journal_id: &str) -> Option<usize> {
        self.by_id.get(journal_id).copied()
    }

    pub fn contains(&self, journal_id: &str) -> bool {
        self.by_id.contains_key(journal_id)
    }

    /// Resolve an already-normalized abbreviation.
    pub fn resolve_abbrev(&self, normalized: &str) -> Option<&Arc<str>> {
        self.abbrev_index.get(normalized)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.journals.iter().map(|j| j.journal_id.as_str())
    }
}

pub fn load_journals(path: &Path) -> Result<JournalTable> {
    let reader = tsv::open(path)?;
    read_journals(reader).map_err(|e| match e {
        Error::Header(msg) => Error::Header(format!("{}: {msg}", path.display())),
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Journal master TSV: `journal_id, full_name, abbrevs, field, merge_group`
/// followed by any number of `year=count` columns. Any malformed row is
/// fatal since every downstream denominator depends on this table.
pub fn read_journals<R: BufRead>(reader: R) -> Result<JournalTable> {
    let mut lines = tsv::data_lines(reader);
    match lines.next() {
        Some(Ok((_, header))) => tsv::expect_header(&header, &JOURNALS_TSV_HEADER, false)?,
        Some(Err(e)) => return Err(Error::io("<journals>", e)),
        None => return Err(Error::Header("empty journal file".into())),
    }
    let mut journals = Vec::new();
    for item in lines {
        let (line_no, line) = item.map_err(|e| Error::io("<journals>", e))?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < JOURNALS_TSV_HEADER.len() {
            return Err(Error::InvalidInput(format!(
                "line {line_no}: expected at least {} columns",
                JOURNALS_TSV_HEADER.len()
            )));
        }
        let mut items_by_year = BTreeMap::new();
        for cell in cols[5..].iter().map(|c| c.trim()).filter(|c| !c.is_empty()) {
            let (y, n) = cell
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {line_no}: expected year=count, got {cell:?}")))?;
            let y: i32 = y
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("line {line_no}: bad year in {cell:?}")))?;
            let n: u64 = n
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("line {line_no}: bad count in {cell:?}")))?;
            *items_by_year.entry(y).or_insert(0) += n;
        }
        let field_code = cols[3].trim().to_owned();
        if field_code.is_empty() {
            return Err(Error::InvalidInput(format!("line {line_no}: empty field code")));
        }
        let merge_group = Some(cols[4].trim()).filter(|g| !g.is_empty()).map(str::to_owned);
        journals.push(Journal {
            journal_id: cols[0].trim().to_owned(),
            full_name: cols[1].trim().to_owned(),
            abbreviations: cols[2]
                .split('|')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::to_owned)
                .collect(),
            field_code,
            items_by_year,
            merge_group,
        });
    }
    JournalTable::new(journals)
}

pub fn write_journals<W: Write>(table: &JournalTable, mut w: W) -> Result<()> {
    let io = |e| Error::io("<journals output>", e);
    let mut header: Vec<&str> = JOURNALS_TSV_HEADER.to_vec();
    header.push("items");
    tsv::write_row(&mut w, &header).map_err(io)?;
    for j in table.journals() {
        let mut row = vec![
            j.journal_id.clone(),
            j.full_name.clone(),
            j.abbreviations.join("|"),
            j.field_code.clone(),
            j.merge_group.clone().unwrap_or_default(),
        ];
        row.extend(j.items_by_year.iter().map(|(y, n)| format!("{y}={n}")));
        tsv::write_row(&mut w, &row).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Collapse every merge group into one journal whose id is the group name.
///
/// Member documents are reassigned, citable items are summed per year, and
/// abbreviations are unioned. Already-parsed references that point at a
/// member are redirected to the merged journal.
pub fn merge_journal_parts(mut corpus: Corpus, journals: JournalTable) -> Result<(Corpus, JournalTable)> {
    let mut groups: BTreeMap<String, Vec<Journal>> = BTreeMap::new();
    let mut kept = Vec::new();
    for j in journals.journals {
        match j.merge_group.clone() {
            Some(g) => groups.entry(g).or_default().push(j),
            None => kept.push(j),
        }
    }
    if groups.is_empty() {
        let table = JournalTable::new(kept)?;
        return Ok((corpus, table));
    }

    let mut redirect: HashMap<String, Arc<str>> = HashMap::new();
    for (group, members) in groups {
        let first = &members[0];
        if let Some(other) = members.iter().find(|m| m.field_code != first.field_code) {
            return Err(Error::MergeFieldConflict {
                group,
                first: first.field_code.clone(),
                second: other.field_code.clone(),
            });
        }
        let canonical: Arc<str> = Arc::from(group.as_str());
        let mut abbreviations: BTreeSet<String> = BTreeSet::new();
        let mut items_by_year: BTreeMap<i32, u64> = BTreeMap::new();
        for m in &members {
            redirect.insert(m.journal_id.clone(), Arc::clone(&canonical));
            abbreviations.extend(m.abbreviations.iter().cloned());
            for (&y, &n) in &m.items_by_year {
                *items_by_year.entry(y).or_insert(0) += n;
            }
        }
        kept.push(Journal {
            journal_id: group,
            full_name: first.full_name.clone(),
            abbreviations: abbreviations.into_iter().collect(),
            field_code: first.field_code.clone(),
            items_by_year,
            merge_group: None,
        });
    }
    let table = JournalTable::new(kept)?;

    let mut parsed_cache: HashMap<usize, Arc<CitedRef>> = HashMap::new();
    for doc in &mut corpus.documents {
        if let Some(c) = redirect.get(&doc.journal_id) {
            doc.journal_id = c.to_string();
        }
        for r in &mut doc.refs {
            let Some(p) = &r.parsed else { continue };
            let Some(target) = p.matched_journal.as_deref().and_then(|m| redirect.get(m)) else {
                continue;
            };
            let key = Arc::as_ptr(p) as usize;
            let replacement = parsed_cache
                .entry(key)
                .or_insert_with(|| {
                    let mut c = (**p).clone();
                    c.matched_journal = Some(Arc::clone(target));
                    Arc::new(c)
                })
                .clone();
            r.parsed = Some(replacement);
        }
    }
    Ok((corpus, table))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub total_docs: usize,
    pub total_refs: usize,
    /// References without a usable year token.
    pub invalid_year_refs: usize,
    /// Subset of the valid-format references dated before 1900.
    pub pre1900_refs: usize,
    /// Subset of the valid-format references dated after the census year.
    pub future_year_refs: usize,
    pub unmatched_venue_refs: usize,
    pub matched_refs: usize,
    /// Documents whose own journal is not in the journal table.
    pub unknown_journal_docs: usize,
}

fn fraction(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl ValidationReport {
    pub fn invalid_year_fraction(&self) -> f64 {
        fraction(self.invalid_year_refs, self.total_refs)
    }
    pub fn pre1900_fraction(&self) -> f64 {
        fraction(self.pre1900_refs, self.total_refs)
    }
    pub fn future_year_fraction(&self) -> f64 {
        fraction(self.future_year_refs, self.total_refs)
    }
    pub fn unmatched_fraction(&self) -> f64 {
        fraction(self.unmatched_venue_refs, self.total_refs)
    }
    pub fn matched_fraction(&self) -> f64 {
        fraction(self.matched_refs, self.total_refs)
    }

    fn merge(mut self, other: ValidationReport) -> ValidationReport {
        self.total_docs += other.total_docs;
        self.total_refs += other.total_refs;
        self.invalid_year_refs += other.invalid_year_refs;
        self.pre1900_refs += other.pre1900_refs;
        self.future_year_refs += other.future_year_refs;
        self.unmatched_venue_refs += other.unmatched_venue_refs;
        self.matched_refs += other.matched_refs;
        self.unknown_journal_docs += other.unknown_journal_docs;
        self
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<validation output>", e);
        tsv::write_row(&mut w, &["metric", "count", "fraction"]).map_err(io)?;
        let rows: [(&str, usize, Option<f64>); 8] = [
            ("total_docs", self.total_docs, None),
            ("total_refs", self.total_refs, None),
            ("invalid_year_refs", self.invalid_year_refs, Some(self.invalid_year_fraction())),
            ("pre1900_refs", self.pre1900_refs, Some(self.pre1900_fraction())),
            ("future_year_refs", self.future_year_refs, Some(self.future_year_fraction())),
            ("unmatched_venue_refs", self.unmatched_venue_refs, Some(self.unmatched_fraction())),
            ("matched_refs", self.matched_refs, Some(self.matched_fraction())),
            ("unknown_journal_docs", self.unknown_journal_docs, None),
        ];
        for (name, count, frac) in rows {
            let frac = frac.map(|f| format!("{f:.6}")).unwrap_or_default();
            tsv::write_row(&mut w, &[name, &count.to_string(), &frac]).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Tally reference quality over the whole corpus. References that were not
/// parsed yet are resolved on the fly against `journals`.
pub fn validate_corpus(corpus: &Corpus, journals: &JournalTable) -> ValidationReport {
    use rayon::prelude::*;
    corpus
        .documents
        .par_iter()
        .map(|doc| {
            let mut r = ValidationReport {
                total_docs: 1,
                unknown_journal_docs: usize::from(!journals.contains(&doc.journal_id)),
                ..Default::default()
            };
            for raw in &doc.refs {
                let owned;
                let cited = match &raw.parsed {
                    Some(p) => &**p,
                    None => {
                        owned = refmatch::resolve_reference(&raw.raw, corpus.census_year, journals);
                        &owned
                    }
                };
                r.total_refs += 1;
                match cited.year_status {
                    YearStatus::InvalidFormat => {
                        r.invalid_year_refs += 1;
                        continue;
                    }
                    YearStatus::Pre1900 => r.pre1900_refs += 1,
                    YearStatus::Future => r.future_year_refs += 1,
                    YearStatus::Valid => {}
                }
                if cited.matched_journal.is_some() {
                    r.matched_refs += 1;
                } else {
                    r.unmatched_venue_refs += 1;
                }
            }
            r
        })
        .reduce(ValidationReport::default, ValidationReport::merge)
}

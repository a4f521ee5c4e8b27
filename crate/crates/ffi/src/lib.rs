//! C ABI over the `fieldnorm` library.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a
//! [`FieldnormStatus`]; on failure `fieldnorm_last_error()` describes the
//! problem until the next failing call on the same thread. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fieldnorm::corpus::{self, Corpus, DocType, JournalTable, LoadOptions, SourceFormat};
use fieldnorm::indicators::{compute_registry, RegistryOptions};
use fieldnorm::stats::{FieldScheme, Statistic};
use fieldnorm::{percentile, refmatch, stats, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldnormStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Undefined = 5,
    NotFound = 6,
    Panic = 7,
}

/// Corpus format selector for [`fieldnorm_corpus_load`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldnormFormat {
    /// Decide from the file extension (`.tsv` or JSONL).
    Auto = 0,
    Jsonl = 1,
    Tsv = 2,
}

pub struct FieldnormJournals {
    table: JournalTable,
}

pub struct FieldnormCorpus {
    corpus: Corpus,
    rejected: usize,
}

/// One indicator: journal ids in ascending order with their values.
pub struct FieldnormIndicator {
    ids: Vec<CString>,
    values: Vec<f64>,
    undefined: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FieldnormValidationReport {
    pub total_docs: usize,
    pub total_refs: usize,
    pub invalid_year_refs: usize,
    pub pre1900_refs: usize,
    pub future_year_refs: usize,
    pub unmatched_venue_refs: usize,
    pub matched_refs: usize,
    pub unknown_journal_docs: usize,
}

/// Variance components; `eta2` and `perm_p` are NaN when undefined or not
/// requested.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FieldnormVarComp {
    pub sigma2_between: f64,
    pub sigma2_within: f64,
    pub eta2: f64,
    pub perm_p: f64,
    pub groups_used: usize,
    pub journals_used: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> FieldnormStatus {
    match e {
        Error::Io { .. } => FieldnormStatus::Io,
        Error::Header(_) => FieldnormStatus::Parse,
        Error::Undefined(_) => FieldnormStatus::Undefined,
        _ => FieldnormStatus::InvalidArgument,
    }
}

struct Failure(FieldnormStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FieldnormStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FieldnormStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> FieldnormStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FieldnormStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FieldnormStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message describing the last failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fieldnorm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fieldnorm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_journals_load(path: *const c_char, out: *mut *mut FieldnormJournals) -> FieldnormStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let table = corpus::load_journals(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(FieldnormJournals { table }));
        Ok(())
    })
}

/// # Safety
/// `journals` must be null or a handle from [`fieldnorm_journals_load`].
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_journals_len(journals: *const FieldnormJournals) -> usize {
    journals.as_ref().map_or(0, |j| j.table.len())
}

/// # Safety
/// `journals` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_journals_free(journals: *mut FieldnormJournals) {
    if !journals.is_null() {
        drop(Box::from_raw(journals));
    }
}

/// Load a corpus. Malformed records are skipped and counted; see
/// [`fieldnorm_corpus_rejected`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_load(
    path: *const c_char,
    format: FieldnormFormat,
    census_year: i32,
    allow_truncated: bool,
    out: *mut *mut FieldnormCorpus,
) -> FieldnormStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = Path::new(str_arg(path, "path")?);
        let format = match format {
            FieldnormFormat::Auto => SourceFormat::from_path(path),
            FieldnormFormat::Jsonl => SourceFormat::Jsonl,
            FieldnormFormat::Tsv => SourceFormat::Tsv,
        };
        let loaded = corpus::load_corpus_with(path, format, census_year, LoadOptions { allow_truncated })?;
        *out = Box::into_raw(Box::new(FieldnormCorpus {
            corpus: loaded.corpus,
            rejected: loaded.errors.len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_len(corpus: *const FieldnormCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.documents.len())
}

/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_rejected(corpus: *const FieldnormCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.rejected)
}

/// Collapse merge groups in both handles, then resolve every cited
/// reference against the journal table. Call once before counting.
///
/// # Safety
/// Both arguments must be live handles.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_prepare(corpus: *mut FieldnormCorpus, journals: *mut FieldnormJournals) -> FieldnormStatus {
    guard(|| {
        let c = out_arg(corpus, "corpus")?;
        let j = out_arg(journals, "journals")?;
        let empty = Corpus {
            census_year: c.corpus.census_year,
            documents: Vec::new(),
            source_format: c.corpus.source_format,
        };
        let taken = std::mem::replace(&mut c.corpus, empty);
        let table = JournalTable::new(j.table.journals().to_vec())?;
        let (mut merged, table) = corpus::merge_journal_parts(taken, table)?;
        refmatch::match_corpus(&mut merged, &table);
        c.corpus = merged;
        j.table = table;
        Ok(())
    })
}

/// # Safety
/// `corpus` and `journals` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_validate(
    corpus: *const FieldnormCorpus,
    journals: *const FieldnormJournals,
    out: *mut FieldnormValidationReport,
) -> FieldnormStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let j = journals.as_ref().ok_or_else(|| null("journals"))?;
        let out = out_arg(out, "out")?;
        let r = corpus::validate_corpus(&c.corpus, &j.table);
        *out = FieldnormValidationReport {
            total_docs: r.total_docs,
            total_refs: r.total_refs,
            invalid_year_refs: r.invalid_year_refs,
            pre1900_refs: r.pre1900_refs,
            future_year_refs: r.future_year_refs,
            unmatched_venue_refs: r.unmatched_venue_refs,
            matched_refs: r.matched_refs,
            unknown_journal_docs: r.unknown_journal_docs,
        };
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_corpus_free(corpus: *mut FieldnormCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Compute one named indicator (for example `IF5-FC`, `TC-IC2`, `FC/P`)
/// from a prepared corpus. `citable_types` is a comma-separated list of
/// document types or null for the default (article, review).
///
/// # Safety
/// Handles must be live, strings NUL-terminated or null where allowed, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_compute(
    corpus: *const FieldnormCorpus,
    journals: *const FieldnormJournals,
    indicator_id: *const c_char,
    citable_types: *const c_char,
    out: *mut *mut FieldnormIndicator,
) -> FieldnormStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let j = journals.as_ref().ok_or_else(|| null("journals"))?;
        let id = str_arg(indicator_id, "indicator_id")?;
        let mut opts = RegistryOptions::default();
        if !citable_types.is_null() {
            opts.citable_types = DocType::parse_set(str_arg(citable_types, "citable_types")?)?;
        }
        let registry = compute_registry(&c.corpus, &j.table, &opts)?;
        let table = registry
            .get(id)
            .ok_or_else(|| Failure(FieldnormStatus::NotFound, format!("unknown indicator {id:?}")))?;
        *out = Box::into_raw(Box::new(indicator_handle(&table.values, table.undefined_journals.len())));
        Ok(())
    })
}

fn indicator_handle(values: &BTreeMap<String, f64>, undefined: usize) -> FieldnormIndicator {
    FieldnormIndicator {
        ids: values.keys().map(|k| CString::new(k.as_str()).unwrap_or_default()).collect(),
        values: values.values().copied().collect(),
        undefined,
    }
}

/// Number of journals with a defined value.
///
/// # Safety
/// `ind` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_len(ind: *const FieldnormIndicator) -> usize {
    ind.as_ref().map_or(0, |i| i.values.len())
}

/// Number of journals left undefined by a zero denominator.
///
/// # Safety
/// `ind` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_undefined(ind: *const FieldnormIndicator) -> usize {
    ind.as_ref().map_or(0, |i| i.undefined)
}

/// Entry `index` in journal-id order. `journal_id` points into the handle.
///
/// # Safety
/// `ind` must be a live handle and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_get(
    ind: *const FieldnormIndicator,
    index: usize,
    journal_id: *mut *const c_char,
    value: *mut f64,
) -> FieldnormStatus {
    guard(|| {
        let ind = ind.as_ref().ok_or_else(|| null("indicator"))?;
        let (jid, val) = (out_arg(journal_id, "journal_id")?, out_arg(value, "value")?);
        if index >= ind.values.len() {
            return Err(Failure(FieldnormStatus::NotFound, format!("index {index} out of range")));
        }
        *jid = ind.ids[index].as_ptr();
        *val = ind.values[index];
        Ok(())
    })
}

/// Value for one journal; `NotFound` when the journal has no defined value.
///
/// # Safety
/// `ind` must be a live handle, `journal_id` NUL-terminated and `value` valid.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_value(
    ind: *const FieldnormIndicator,
    journal_id: *const c_char,
    value: *mut f64,
) -> FieldnormStatus {
    guard(|| {
        let ind = ind.as_ref().ok_or_else(|| null("indicator"))?;
        let id = str_arg(journal_id, "journal_id")?;
        let out = out_arg(value, "value")?;
        let i = ind
            .ids
            .binary_search_by(|c| c.as_bytes().cmp(id.as_bytes()))
            .map_err(|_| Failure(FieldnormStatus::NotFound, format!("no value for journal {id:?}")))?;
        *out = ind.values[i];
        Ok(())
    })
}

/// # Safety
/// `ind` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_indicator_free(ind: *mut FieldnormIndicator) {
    if !ind.is_null() {
        drop(Box::from_raw(ind));
    }
}

/// Percentile ranks (share of values strictly below, times 100) and PR6
/// classes for `n` values. Either output may be null.
///
/// # Safety
/// `values` must hold `n` doubles; non-null outputs must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_percentile_ranks(values: *const f64, n: usize, pr100: *mut f64, pr6: *mut u8) -> FieldnormStatus {
    guard(|| {
        let v = slice_arg(values, n, "values")?;
        let keyed: BTreeMap<String, f64> = v.iter().enumerate().map(|(i, &x)| (format!("{i:020}"), x)).collect();
        let ranks = percentile::percentile_rank(&keyed)?;
        for (i, p) in ranks.values().enumerate() {
            if !pr100.is_null() {
                *pr100.add(i) = *p;
            }
            if !pr6.is_null() {
                *pr6.add(i) = percentile::pr6_class(*p);
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn fieldnorm_pr6_class(pr100: f64) -> u8 {
    percentile::pr6_class(pr100)
}

unsafe fn correlation(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    f: fn(&[f64], &[f64]) -> fieldnorm::Result<f64>,
) -> FieldnormStatus {
    guard(|| {
        let (x, y) = (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?);
        let out = out_arg(out, "out")?;
        *out = f(x, y)?;
        Ok(())
    })
}

/// # Safety
/// `x` and `y` must hold `n` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> FieldnormStatus {
    correlation(x, y, n, out, stats::pearson)
}

/// Spearman correlation with average ranks for ties.
///
/// # Safety
/// `x` and `y` must hold `n` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> FieldnormStatus {
    correlation(x, y, n, out, stats::spearman)
}

/// One-way variance components of `values` grouped by `groups` (any
/// integer labels). Groups smaller than `min_group_size` are dropped.
/// `n_perm = 0` skips the permutation test; otherwise at least 999.
///
/// # Safety
/// `values` and `groups` must hold `n` elements and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fieldnorm_varcomp(
    values: *const f64,
    groups: *const u32,
    n: usize,
    min_group_size: usize,
    n_perm: usize,
    seed: u64,
    out: *mut FieldnormVarComp,
) -> FieldnormStatus {
    guard(|| {
        let (v, g) = (slice_arg(values, n, "values")?, slice_arg(groups, n, "groups")?);
        let out = out_arg(out, "out")?;
        let mut keyed = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (i, (&x, &label)) in v.iter().zip(g).enumerate() {
            let id = format!("{i:020}");
            keyed.insert(id.clone(), x);
            assignment.insert(id, label.to_string());
        }
        let scheme = FieldScheme::new("ffi", assignment).with_min_group_size(min_group_size);
        let r = stats::varcomp_moments("ffi", &keyed, &scheme)?;
        let perm_p = if n_perm == 0 {
            f64::NAN
        } else {
            stats::permutation_test(&keyed, &scheme, Statistic::Eta2, n_perm, seed)?
        };
        *out = FieldnormVarComp {
            sigma2_between: r.sigma2_between,
            sigma2_within: r.sigma2_within,
            eta2: r.eta2.unwrap_or(f64::NAN),
            perm_p,
            groups_used: r.groups_used,
            journals_used: r.journals_used,
        };
        Ok(())
    })
}

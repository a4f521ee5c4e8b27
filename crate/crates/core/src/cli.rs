//! Command-line front end. Every subcommand writes TSV files plus a
//! `manifest_<command>.tsv` into the output directory.
//!
//! Exit codes: 0 success, 1 finished with warnings, 2 fatal error.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::corpus::{
    self, load_corpus_with, load_journals, merge_journal_parts, validate_corpus, Corpus, DocType, JournalTable,
    LoadOptions, SourceFormat,
};
use crate::error::{Error, RecordError, Result};
use crate::indicators::{compute_registry, read_indicator_file, write_wide_tsv, IndicatorTable, RegistryOptions};
use crate::percentile::{top_k, PercentileTable};
use crate::refmatch::match_corpus;
use crate::stats::{self, correlation_matrix, FieldScheme, Statistic};
use crate::synthgen::{generate_corpus, SynthConfig};
use crate::tsv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fieldnorm", version, about = "Field-normalized journal indicators from citation corpora")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Year whose documents do the citing
    #[arg(long, global = true)]
    pub census_year: Option<i32>,
    /// Journal master TSV.
    #[arg(long, global = true)]
    pub journals: Option<PathBuf>,
    /// Field assignment TSV (`journal_id`, `field`).
    #[arg(long, global = true)]
    pub fields: Option<PathBuf>,
    /// Output directory [default: fieldnorm_out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for permutations and synthetic corpora [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Document types counted as citable items [default: article,review].
    #[arg(long, global = true)]
    pub citable_types: Option<String>,
    /// Fields with fewer journals are left out of variance analyses [default: 10].
    #[arg(long, global = true)]
    pub min_group_size: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CorpusArgs {
    /// Citing-document corpus (JSONL, or TSV when the name ends in .tsv).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Override the corpus format: jsonl or tsv.
    #[arg(long)]
    pub format: Option<String>,
    /// Accept records whose declared reference count exceeds the listed references.
    #[arg(long)]
    pub truncated_refs: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reference-quality report for a corpus.
    Validate(CorpusArgs),
    /// Compute every indicator derivable from a corpus.
    Indicators {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Count citable items from corpus documents for journals without item counts.
        #[arg(long)]
        items_from_corpus: bool,
        /// External indicator file to include, as ID=PATH.
        #[arg(long = "import", value_name = "ID=PATH")]
        imports: Vec<String>,
    },
    /// Top-k listing or top PR6 class of one indicator.
    Rank {
        /// Indicator TSV
        file: PathBuf,
        /// Indicator id, needed when the file holds several indicators.
        #[arg(long)]
        indicator: Option<String>,
        /// Number of journals to list
        #[arg(long, conflicts_with = "pr6")]
        top: Option<usize>,
        /// List the journals in the top PR6 class
        #[arg(long)]
        pr6: bool,
    },
    /// Spearman/Pearson correlation matrix.
    Correlate {
        /// Indicator TSVs
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Between-field variance components, permutation tests and reductions.
    Varcomp {
        /// Indicator TSVs
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Permutations per test, at least 999 [default: 9999]
        #[arg(long)]
        n_perm: Option<usize>,
        /// Indicator the reductions are measured against [default: IF2-IC].
        #[arg(long)]
        reference: Option<String>,
        /// Permutation statistic: eta2 or sigma2_between [default: eta2].
        #[arg(long)]
        statistic: Option<String>,
    },
    /// Generate a synthetic corpus from a config file.
    Synth {
        /// Generator config (`key = value` lines)
        config_file: PathBuf,
        /// Corpus output format: jsonl or tsv [default: jsonl].
        #[arg(long)]
        format: Option<String>,
    },
}

/// Flags merged over config-file values.
struct Settings {
    config: BTreeMap<String, String>,
    cli: Cli,
}

impl Settings {
    fn new(cli: Cli) -> Result<Settings> {
        let config = match &cli.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        Ok(Settings { config, cli })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.get::<bool>(key, None)?.unwrap_or(false))
    }

    fn census_year(&self) -> Result<i32> {
        self.get("census_year", self.cli.census_year)?
            .ok_or_else(|| Error::Config("--census-year is required".into()))
    }

    fn out(&self) -> Result<PathBuf> {
        Ok(self.get("out", self.cli.out.clone())?.unwrap_or_else(|| PathBuf::from("fieldnorm_out")))
    }

    fn journals_path(&self) -> Result<Option<PathBuf>> {
        self.get("journals", self.cli.journals.clone())
    }

    fn citable_types(&self) -> Result<std::collections::BTreeSet<DocType>> {
        match self.get::<String>("citable_types", self.cli.citable_types.clone())? {
            Some(s) => DocType::parse_set(&s),
            None => Ok(DocType::default_citable()),
        }
    }

    fn min_group_size(&self) -> Result<usize> {
        Ok(self.get("min_group_size", self.cli.min_group_size)?.unwrap_or(stats::DEFAULT_MIN_GROUP_SIZE))
    }

    fn seed(&self) -> Result<Option<u64>> {
        self.get("seed", self.cli.seed)
    }

    fn threads(&self) -> Result<Option<usize>> {
        self.get("threads", self.cli.threads)
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_owned());
    }
    Ok(out)
}

/// Output directory, manifest rows and accumulated warnings for one run.
struct Run {
    command: &'static str,
    out: PathBuf,
    manifest: Vec<(String, String, String)>,
    warnings: Vec<String>,
}

impl Run {
    fn new(command: &'static str, out: PathBuf) -> Run {
        let mut run = Run {
            command,
            out,
            manifest: Vec::new(),
            warnings: Vec::new(),
        };
        run.note("run", "command", command);
        run.note("run", "tool_version", env!("CARGO_PKG_VERSION"));
        run
    }

    fn note(&mut self, kind: &str, key: &str, value: impl ToString) {
        self.manifest.push((kind.to_owned(), key.to_owned(), value.to_string()));
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.note("input", role, format!("{} sha256:{digest}", path.display()));
        Ok(())
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write<F>(&self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
    {
        let path = self.path(rel);
        let mut w = tsv::create(&path)?;
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))
    }

    fn record_errors(&mut self, rel: &str, errors: &[RecordError]) -> Result<()> {
        if errors.is_empty() {
            return Ok(());
        }
        self.warn(format!("{} malformed record(s) skipped; see {rel}", errors.len()));
        self.write(rel, |w| {
            let io = |e| Error::io(rel, e);
            tsv::write_row(w, &["line", "message"]).map_err(io)?;
            for e in errors {
                tsv::write_row(w, &[e.line.to_string(), e.message.clone()]).map_err(io)?;
            }
            Ok(())
        })
    }

    fn finish(self) -> Result<i32> {
        let rel = format!("manifest_{}.tsv", self.command);
        self.write(&rel, |w| {
            let io = |e| Error::io("<manifest>", e);
            tsv::write_row(w, &["kind", "key", "value"]).map_err(io)?;
            for (k, key, v) in &self.manifest {
                tsv::write_row(w, &[k, key, v]).map_err(io)?;
            }
            for msg in &self.warnings {
                tsv::write_row(w, &["warning", "", msg]).map_err(io)?;
            }
            Ok(())
        })?;
        for msg in &self.warnings {
            eprintln!("warning: {msg}");
        }
        Ok(if self.warnings.is_empty() { EXIT_OK } else { EXIT_WARNINGS })
    }
}

fn start(settings: &Settings, command: &'static str) -> Result<Run> {
    let mut run = Run::new(command, settings.out()?);
    if let Some(p) = &settings.cli.config {
        run.input("config", p)?;
    }
    Ok(run)
}

/// File-name-safe form of an indicator id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-+_().".contains(c) { c } else { '_' })
        .collect()
}

/// Journal table with merge groups collapsed.
fn load_merged_journals(run: &mut Run, path: &Path) -> Result<JournalTable> {
    run.input("journals", path)?;
    let table = load_journals(path)?;
    let empty = Corpus {
        census_year: 0,
        documents: Vec::new(),
        source_format: SourceFormat::Jsonl,
    };
    Ok(merge_journal_parts(empty, table)?.1)
}

/// Load, merge and match the corpus named by the flags.
fn prepare_corpus(settings: &Settings, run: &mut Run, args: &CorpusArgs) -> Result<(Corpus, JournalTable)> {
    let census = settings.census_year()?;
    run.note("param", "census_year", census);
    let corpus_path: PathBuf = settings
        .get("corpus", args.corpus.clone())?
        .ok_or_else(|| Error::Config("--corpus is required".into()))?;
    let journals_path = settings
        .journals_path()?
        .ok_or_else(|| Error::Config("--journals is required".into()))?;
    let format = match settings.get::<String>("format", args.format.clone())? {
        Some(f) => f.parse()?,
        None => SourceFormat::from_path(&corpus_path),
    };
    let truncated = settings.flag("truncated_refs", args.truncated_refs)?;
    run.note("param", "format", format.as_str());
    run.note("param", "truncated_refs", truncated);
    run.input("corpus", &corpus_path)?;
    run.input("journals", &journals_path)?;

    let journals = load_journals(&journals_path)?;
    let outcome = load_corpus_with(&corpus_path, format, census, LoadOptions { allow_truncated: truncated })?;
    for w in &outcome.warnings {
        run.warn(w.clone());
    }
    run.record_errors("load_errors.tsv", &outcome.errors)?;
    let (mut corpus, journals) = merge_journal_parts(outcome.corpus, journals)?;
    match_corpus(&mut corpus, &journals);
    Ok((corpus, journals))
}

fn write_validation(run: &mut Run, corpus: &Corpus, journals: &JournalTable) -> Result<()> {
    let report = validate_corpus(corpus, journals);
    if report.unknown_journal_docs > 0 {
        run.warn(format!(
            "{} document(s) published in journals missing from the journal table",
            report.unknown_journal_docs
        ));
    }
    run.write("validation.tsv", |w| report.write_tsv(w))
}

fn cmd_validate(settings: &Settings, args: &CorpusArgs) -> Result<i32> {
    let mut run = start(settings, "validate")?;
    let (corpus, journals) = prepare_corpus(settings, &mut run, args)?;
    write_validation(&mut run, &corpus, &journals)?;
    run.finish()
}

fn cmd_indicators(settings: &Settings, args: &CorpusArgs, items_from_corpus: bool, imports: &[String]) -> Result<i32> {
    let mut run = start(settings, "indicators")?;
    let (corpus, journals) = prepare_corpus(settings, &mut run, args)?;
    write_validation(&mut run, &corpus, &journals)?;
    let opts = RegistryOptions {
        citable_types: settings.citable_types()?,
        items_from_corpus: settings.flag("items_from_corpus", items_from_corpus)?,
    };
    run.note(
        "param",
        "citable_types",
        opts.citable_types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","),
    );
    run.note("param", "items_from_corpus", opts.items_from_corpus);
    let registry = compute_registry(&corpus, &journals, &opts)?;

    for (id, table) in &registry.counts {
        run.write(&format!("counts/{}.tsv", file_stem(id)), |w| table.write_tsv(w))?;
    }
    let mut all: Vec<IndicatorTable> = registry.indicators.clone();
    for spec in imports {
        let (id, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--import expects ID=PATH, got {spec:?}")))?;
        let path = Path::new(path);
        run.input(&format!("import:{id}"), path)?;
        let (table, warnings, errors) = crate::indicators::import_external_indicator(path, id, Some(&journals))?;
        for w in warnings {
            run.warn(w);
        }
        run.record_errors(&format!("import_errors_{}.tsv", file_stem(id)), &errors)?;
        all.push(table);
    }
    let n_registry = registry.indicators.len();
    let mut percentile_sources: Vec<&IndicatorTable> = registry.percentile_variables().collect();
    percentile_sources.extend(all[n_registry..].iter());

    let mut ranked = Vec::new();
    for t in percentile_sources {
        if t.values.is_empty() {
            run.warn(format!("{}: no defined values; no percentiles", t.indicator_id));
            continue;
        }
        let pt = PercentileTable::from_indicator(t)?;
        run.write(&format!("percentiles/{}.tsv", file_stem(&t.indicator_id)), |w| pt.write_tsv(w))?;
        let mut pr100 = IndicatorTable::new(format!("PR100({})", t.indicator_id));
        pr100.values = pt.pr100.clone();
        let mut pr6 = IndicatorTable::new(format!("PR6({})", t.indicator_id));
        pr6.values = pt.pr6.iter().map(|(j, &c)| (j.clone(), f64::from(c))).collect();
        ranked.push(pr100);
        ranked.push(pr6);
    }
    for t in &all {
        let stem = file_stem(&t.indicator_id);
        run.write(&format!("indicators/{stem}.tsv"), |w| t.write_tsv(w))?;
        if !t.undefined_journals.is_empty() {
            run.write(&format!("indicators/{stem}.undefined.tsv"), |w| t.write_undefined(w))?;
        }
    }
    all.extend(ranked);
    run.write("indicators_wide.tsv", |w| write_wide_tsv(&all, &journals, w))?;
    run.finish()
}

/// Read every indicator in the given files; ids must be unique across files.
fn read_indicators(run: &mut Run, files: &[PathBuf], journals: Option<&JournalTable>) -> Result<Vec<IndicatorTable>> {
    let mut tables: Vec<IndicatorTable> = Vec::new();
    for (i, path) in files.iter().enumerate() {
        run.input(&format!("indicator{}", i + 1), path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("indicator");
        let outcome = read_indicator_file(path, Some(stem), journals)?;
        for w in outcome.warnings {
            run.warn(format!("{}: {w}", path.display()));
        }
        if !outcome.errors.is_empty() {
            let first = &outcome.errors[0];
            return Err(Error::InvalidInput(format!("{}: {} bad row(s), first: {first}", path.display(), outcome.errors.len())));
        }
        for t in outcome.tables {
            if tables.iter().any(|o| o.indicator_id == t.indicator_id) {
                return Err(Error::InvalidInput(format!("indicator {} supplied twice", t.indicator_id)));
            }
            tables.push(t);
        }
    }
    Ok(tables)
}

fn optional_journals(settings: &Settings, run: &mut Run) -> Result<Option<JournalTable>> {
    match settings.journals_path()? {
        Some(p) => Ok(Some(load_merged_journals(run, &p)?)),
        None => Ok(None),
    }
}

fn cmd_rank(settings: &Settings, file: &Path, indicator: Option<&str>, top: Option<usize>, pr6: bool) -> Result<i32> {
    let mut run = start(settings, "rank")?;
    let journals = optional_journals(settings, &mut run)?;
    let mut tables = read_indicators(&mut run, &[file.to_path_buf()], journals.as_ref())?;
    let table = match indicator {
        Some(id) => tables
            .into_iter()
            .find(|t| t.indicator_id == id)
            .ok_or_else(|| Error::InvalidInput(format!("indicator {id} not found in {}", file.display())))?,
        None if tables.len() == 1 => tables.remove(0),
        None => {
            return Err(Error::InvalidInput(format!(
                "{} holds {} indicators; choose one with --indicator",
                file.display(),
                tables.len()
            )))
        }
    };
    if table.values.is_empty() {
        return Err(Error::InvalidInput(format!("indicator {} has no values", table.indicator_id)));
    }
    let id = table.indicator_id.clone();
    run.note("param", "indicator", &id);
    let name = |j: &str| journals.as_ref().and_then(|t| t.get(j)).map(|j| j.full_name.clone()).unwrap_or_default();

    if pr6 {
        run.note("param", "mode", "pr6");
        let pt = PercentileTable::from_indicator(&table)?;
        let mut members: Vec<(String, String)> = pt
            .pr6
            .iter()
            .filter(|(_, &c)| c == 6)
            .map(|(j, _)| (name(j), j.clone()))
            .collect();
        // Alphabetical by full name, journal id when names are unavailable.
        members.sort();
        run.note("result", "population", pt.n);
        run.note("result", "top_class_size", members.len());
        run.write(&format!("rank_pr6_{}.tsv", file_stem(&id)), |w| {
            let io = |e| Error::io("<rank output>", e);
            tsv::write_row(w, &["journal_id", "full_name", "value", "pr100", "pr6"]).map_err(io)?;
            for (full, j) in &members {
                let row = [j.clone(), full.clone(), format!("{:.6}", table.values[j]), format!("{:.4}", pt.pr100[j]), "6".into()];
                tsv::write_row(w, &row).map_err(io)?;
            }
            Ok(())
        })?;
    } else {
        let k = top.ok_or_else(|| Error::Config("rank needs --top <k> or --pr6".into()))?;
        if k == 0 {
            return Err(Error::Config("--top must be positive".into()));
        }
        run.note("param", "top", k);
        if k > table.values.len() {
            run.warn(format!("--top {k} exceeds the {} ranked journals; listing all", table.values.len()));
        }
        let rows = top_k(&table.values, k);
        run.write(&format!("rank_top{k}_{}.tsv", file_stem(&id)), |w| {
            let io = |e| Error::io("<rank output>", e);
            tsv::write_row(w, &["rank", "journal_id", "full_name", "value"]).map_err(io)?;
            for (i, (j, v)) in rows.iter().enumerate() {
                tsv::write_row(w, &[(i + 1).to_string(), j.clone(), name(j), format!("{v:.6}")]).map_err(io)?;
            }
            Ok(())
        })?;
    }
    run.finish()
}

fn cmd_correlate(settings: &Settings, files: &[PathBuf]) -> Result<i32> {
    let mut run = start(settings, "correlate")?;
    let journals = optional_journals(settings, &mut run)?;
    let tables = read_indicators(&mut run, files, journals.as_ref())?;
    if tables.len() < 2 {
        return Err(Error::InvalidInput("correlate needs at least two indicators".into()));
    }
    let m = correlation_matrix(&tables)?;
    run.note("result", "common_journals", m.n);
    let mut seen = std::collections::BTreeSet::new();
    for (a, b) in m.undefined_pairs() {
        let key = if a < b { (a, b) } else { (b, a) };
        if seen.insert(key.clone()) {
            run.warn(format!("correlation of {} and {} is undefined (constant indicator)", key.0, key.1));
        }
    }
    run.write("correlations.tsv", |w| m.write_tsv(w))?;
    run.finish()
}

fn cmd_varcomp(
    settings: &Settings,
    files: &[PathBuf],
    n_perm: Option<usize>,
    reference: Option<String>,
    statistic: Option<String>,
) -> Result<i32> {
    let mut run = start(settings, "varcomp")?;
    let journals = optional_journals(settings, &mut run)?;
    let scheme = match (settings.get::<PathBuf>("fields", settings.cli.fields.clone())?, &journals) {
        (Some(p), _) => {
            run.input("fields", &p)?;
            FieldScheme::load(&p)?
        }
        (None, Some(t)) => FieldScheme::from_journals(t),
        (None, None) => return Err(Error::Config("varcomp needs --fields or --journals".into())),
    }
    .with_min_group_size(settings.min_group_size()?);
    let n_perm = settings.get("n_perm", n_perm)?.unwrap_or(9999);
    let seed = settings.seed()?.unwrap_or(0);
    let statistic: Statistic = settings.get::<String>("statistic", statistic)?.unwrap_or_else(|| "eta2".into()).parse()?;
    let reference = settings.get("reference", reference)?.unwrap_or_else(|| "IF2-IC".to_owned());
    run.note("param", "field_scheme", &scheme.name);
    run.note("param", "min_group_size", scheme.min_group_size);
    run.note("param", "n_perm", n_perm);
    run.note("param", "seed", seed);
    run.note("param", "statistic", statistic.as_str());
    run.note("param", "reference", &reference);
    run.note(
        "note",
        "scale",
        "variance components are moment estimates on the raw indicator scale; compare reductions and significance, not magnitudes",
    );

    let tables = read_indicators(&mut run, files, journals.as_ref())?;
    let mut results = Vec::new();
    for t in &tables {
        let r = stats::analyze(t, &scheme, statistic, n_perm, seed)?;
        for (field, n) in &r.excluded_fields {
            run.note("excluded_field", &format!("{}:{field}", t.indicator_id), n);
        }
        if r.journals_used < t.values.len() {
            run.note("result", &format!("{}:journals_used", t.indicator_id), r.journals_used);
        }
        results.push(r);
    }
    run.write("varcomp.tsv", |w| stats::write_varcomp_tsv(&results, w))?;
    run.write("dispersion.tsv", |w| stats::write_dispersion_tsv(&results, w))?;

    match results.iter().find(|r| r.indicator_id == reference) {
        None => run.warn(format!("reference indicator {reference} not supplied; no reductions written")),
        Some(base) => {
            let base_s2 = base.sigma2_between;
            let mut rows = Vec::new();
            for r in results.iter().filter(|r| r.indicator_id != reference) {
                let red = match stats::variance_reduction(base_s2, r.sigma2_between) {
                    Ok(v) => format!("{v:.6}"),
                    Err(_) => {
                        run.warn(format!("reduction against {reference} undefined: zero reference component"));
                        "NA".into()
                    }
                };
                rows.push([
                    reference.clone(),
                    r.indicator_id.clone(),
                    format!("{base_s2:.9}"),
                    format!("{:.9}", r.sigma2_between),
                    red,
                ]);
            }
            run.write("reduction.tsv", |w| {
                let io = |e| Error::io("<reduction output>", e);
                tsv::write_row(w, &["reference_id", "indicator_id", "sigma2_reference", "sigma2_indicator", "reduction"]).map_err(io)?;
                for row in &rows {
                    tsv::write_row(w, row).map_err(io)?;
                }
                Ok(())
            })?;
        }
    }
    run.finish()
}

fn cmd_synth(settings: &Settings, config_file: &Path, format: Option<String>) -> Result<i32> {
    let mut run = start(settings, "synth")?;
    run.input("synth_config", config_file)?;
    let text = std::fs::read_to_string(config_file).map_err(|e| Error::io(config_file, e))?;
    let mut cfg = SynthConfig::parse(&text)?;
    if let Some(seed) = settings.seed()? {
        cfg.seed = seed;
    }
    if let Some(y) = settings.get("census_year", settings.cli.census_year)? {
        cfg.census_year = y;
    }
    cfg.validate()?;
    let format: SourceFormat = settings.get::<String>("format", format)?.unwrap_or_else(|| "jsonl".into()).parse()?;
    run.note("param", "seed", cfg.seed);
    run.note("param", "census_year", cfg.census_year);
    let out = generate_corpus(&cfg)?;
    let corpus_name = format!("corpus.{}", format.as_str());
    run.write(&corpus_name, |w| corpus::write_corpus(&out.corpus, format, w))?;
    run.write("journals.tsv", |w| corpus::write_journals(&out.journals, w))?;
    run.write("fields.tsv", |w| out.scheme.write_tsv(w))?;
    run.write("truth.tsv", |w| out.truth.write_tsv(w))?;
    run.write("synth_config.txt", |w| {
        w.write_all(cfg.to_text().as_bytes()).map_err(|e| Error::io("synth_config.txt", e))
    })?;
    run.note("result", "documents", out.corpus.documents.len());
    run.note("result", "references", out.corpus.total_refs());
    run.finish()
}

fn dispatch(settings: &Settings) -> Result<i32> {
    match &settings.cli.command {
        Command::Validate(args) => cmd_validate(settings, args),
        Command::Indicators {
            corpus,
            items_from_corpus,
            imports,
        } => cmd_indicators(settings, corpus, *items_from_corpus, imports),
        Command::Rank { file, indicator, top, pr6 } => cmd_rank(settings, file, indicator.as_deref(), *top, *pr6),
        Command::Correlate { files } => cmd_correlate(settings, files),
        Command::Varcomp {
            files,
            n_perm,
            reference,
            statistic,
        } => cmd_varcomp(settings, files, *n_perm, reference.clone(), statistic.clone()),
        Command::Synth { config_file, format } => cmd_synth(settings, config_file, format.clone()),
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let settings = Settings::new(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = settings.threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&settings))
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FATAL
        }
    }
}

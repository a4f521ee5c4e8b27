//! Synthetic corpora with field-specific reference-list length and citation
//! age, used as ground truth for the normalization experiments.
//!
//! Each journal publishes `papers_per_journal_per_year` articles in the
//! census year. A document carries `max(1, Poisson(mean_ref_len))`
//! references; a reference's age in years is drawn from `1..=years_back`
//! with `P(a) ∝ 2^(-(a-1)/half_life)`, and its target journal is drawn from
//! the citing field with probability `1 - cross_field_mix` (weighted by
//! latent quality) and uniformly from the other fields otherwise.
//!
//! Config files are flat `key = value` lines:
//!
//! ```text
//! census_year = 2010
//! years_back = 10
//! quality_spread = 0.5
//! seed = 42
//! field.MATH.n_journals = 20
//! field.MATH.papers_per_journal_per_year = 100
//! field.MATH.mean_ref_len = 12
//! field.MATH.ref_age_half_life = 8
//! field.MATH.cross_field_mix = 0.05
//! ```

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, DocType, Document, Journal, JournalTable, RawReference, SourceFormat, MIN_VALID_YEAR};
use crate::counts::{FractionBase, WindowKind};
use crate::error::{Error, Result};
use crate::refmatch::{resolve_reference, CitedRef};
use crate::stats::FieldScheme;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub field_code: String,
    pub n_journals: usize,
    pub papers_per_journal_per_year: u64,
    pub mean_ref_len: f64,
    pub ref_age_half_life: f64,
    pub cross_field_mix: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub census_year: i32,
    pub fields: Vec<FieldSpec>,
    pub quality_spread: f64,
    pub years_back: u32,
    pub seed: u64,
    /// Probability that a reference carries an unparseable year.
    pub noise_invalid_year: f64,
    /// Probability that a reference names a venue outside the journal table.
    pub noise_unknown_venue: f64,
}

const FIELD_KEYS: [&str; 5] = [
    "n_journals",
    "papers_per_journal_per_year",
    "mean_ref_len",
    "ref_age_half_life",
    "cross_field_mix",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.years_back < 5 {
            return bad(format!("years_back must be at least 5, got {}", self.years_back));
        }
        if self.census_year - (self.years_back as i32) < MIN_VALID_YEAR {
            return bad(format!("census_year - years_back must not precede {MIN_VALID_YEAR}"));
        }
        if !(self.quality_spread >= 0.0 && self.quality_spread.is_finite()) {
            return bad("quality_spread must be a finite value >= 0".into());
        }
        for (name, p) in [("noise_invalid_year", self.noise_invalid_year), ("noise_unknown_venue", self.noise_unknown_venue)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.noise_invalid_year + self.noise_unknown_venue > 1.0 {
            return bad("noise probabilities sum above 1".into());
        }
        if self.fields.is_empty() {
            return bad("no fields configured".into());
        }
        for f in &self.fields {
            let c = &f.field_code;
            if c.is_empty() || c.contains(|ch: char| ch.is_whitespace() || ch == '|' || ch == '.') {
                return bad(format!("invalid field code {c:?}"));
            }
            if f.n_journals == 0 {
                return bad(format!("field {c}: n_journals must be positive"));
            }
            if f.papers_per_journal_per_year == 0 {
                return bad(format!("field {c}: papers_per_journal_per_year must be positive"));
            }
            if !(f.mean_ref_len >= 1.0 && f.mean_ref_len.is_finite()) {
                return bad(format!("field {c}: mean_ref_len must be >= 1"));
            }
            if !(f.ref_age_half_life > 0.0 && f.ref_age_half_life.is_finite()) {
                return bad(format!("field {c}: ref_age_half_life must be > 0"));
            }
            if !(0.0..=1.0).contains(&f.cross_field_mix) {
                return bad(format!("field {c}: cross_field_mix must lie in [0, 1]"));
            }
        }
        if self.fields.iter().map(|f| f.n_journals).sum::<usize>() < 2 {
            return bad("at least 2 journals required".into());
        }
        Ok(())
    }

    /// Parse the flat `key = value` format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<SynthConfig> {
        let mut top: BTreeMap<&str, &str> = BTreeMap::new();
        let mut fields: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let dup = if let Some(rest) = k.strip_prefix("field.") {
                let (code, key) = rest
                    .rsplit_once('.')
                    .ok_or_else(|| Error::Config(format!("line {}: expected field.<CODE>.<key>", i + 1)))?;
                if !FIELD_KEYS.contains(&key) {
                    return Err(Error::Config(format!("line {}: unknown field key {key:?}", i + 1)));
                }
                fields.entry(code).or_default().insert(key, v).is_some()
            } else {
                top.insert(k, v).is_some()
            };
            if dup {
                return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
            }
        }
        let mut take = |key: &str| top.remove(key);
        let census_year = parse_num("census_year", take("census_year").ok_or_else(|| Error::Config("census_year is required".into()))?)?;
        let years_back = take("years_back").map(|v| parse_num("years_back", v)).transpose()?.unwrap_or(10);
        let quality_spread = take("quality_spread").map(|v| parse_num("quality_spread", v)).transpose()?.unwrap_or(0.5);
        let seed = take("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0);
        let noise_invalid_year = take("noise_invalid_year").map(|v| parse_num("noise_invalid_year", v)).transpose()?.unwrap_or(0.0);
        let noise_unknown_venue = take("noise_unknown_venue").map(|v| parse_num("noise_unknown_venue", v)).transpose()?.unwrap_or(0.0);
        if let Some(k) = top.keys().next() {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let mut specs = Vec::new();
        for (code, kv) in fields {
            let get = |key: &str| kv.get(key).copied().ok_or_else(|| Error::Config(format!("field {code}: {key} is required")));
            let name = |key: &str| format!("field.{code}.{key}");
            specs.push(FieldSpec {
                field_code: code.to_owned(),
                n_journals: parse_num(&name("n_journals"), get("n_journals")?)?,
                papers_per_journal_per_year: parse_num(&name("papers_per_journal_per_year"), get("papers_per_journal_per_year")?)?,
                mean_ref_len: parse_num(&name("mean_ref_len"), get("mean_ref_len")?)?,
                ref_age_half_life: parse_num(&name("ref_age_half_life"), get("ref_age_half_life")?)?,
                cross_field_mix: kv
                    .get("cross_field_mix")
                    .map(|v| parse_num(&name("cross_field_mix"), v))
                    .transpose()?
                    .unwrap_or(0.0),
            });
        }
        let cfg = SynthConfig {
            census_year,
            fields: specs,
            quality_spread,
            years_back,
            seed,
            noise_invalid_year,
            noise_unknown_venue,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "census_year = {}\nyears_back = {}\nquality_spread = {}\nseed = {}\nnoise_invalid_year = {}\nnoise_unknown_venue = {}\n",
            self.census_year, self.years_back, self.quality_spread, self.seed, self.noise_invalid_year, self.noise_unknown_venue
        );
        for f in &self.fields {
            let c = &f.field_code;
            s += &format!("field.{c}.n_journals = {}\n", f.n_journals);
            s += &format!("field.{c}.papers_per_journal_per_year = {}\n", f.papers_per_journal_per_year);
            s += &format!("field.{c}.mean_ref_len = {}\n", f.mean_ref_len);
            s += &format!("field.{c}.ref_age_half_life = {}\n", f.ref_age_half_life);
            s += &format!("field.{c}.cross_field_mix = {}\n", f.cross_field_mix);
        }
        s
    }

    pub fn total_journals(&self) -> usize {
        self.fields.iter().map(|f| f.n_journals).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub quality: BTreeMap<String, f64>,
    /// Field mean of the in-window fractional five-year quasi impact factor;
    /// only available without cross-field mixing or noise.
    pub expected_if5_fc: Option<BTreeMap<String, f64>>,
}

pub struct SynthOutput {
    pub corpus: Corpus,
    pub journals: JournalTable,
    pub scheme: FieldScheme,
    pub truth: GroundTruth,
}

pub fn journal_id(field: &str, j: usize) -> String {
    format!("{field}-{j:03}")
}

fn abbrev(field: &str, j: usize) -> String {
    format!("SYN {field} J{j:03}")
}

/// Probability that a reference's age falls inside a `window_years` window.
pub fn in_window_mass(half_life: f64, years_back: u32, window_years: u32) -> f64 {
    let r = 2f64.powf(-1.0 / half_life);
    let w = window_years.min(years_back) as i32;
    (1.0 - r.powi(w)) / (1.0 - r.powi(years_back as i32))
}

fn window_years(kind: WindowKind, years_back: u32) -> u32 {
    match kind {
        WindowKind::TwoYear => 2,
        WindowKind::FiveYear => 5,
        WindowKind::AllYears => years_back,
    }
}

/// Closed-form field mean of the fractional quasi impact factor over `window`
/// (two- or five-year). Requires no cross-field mixing and no noise.
///
/// With `p` the in-window mass and `N = max(1, Poisson(mu))` references, a
/// citing document distributes `1[k > 0]` (in-window base) or `k / N`
/// (all-refs base) of weight to its own field, where `k ~ Binomial(N, p)`.
/// Their expectations are `1 - exp(-mu p) + p exp(-mu)` and `p`. Citing
/// documents per journal equal items per year, so the field mean rate is that
/// expectation divided by the window length.
pub fn expected_fractional_rate(cfg: &SynthConfig, window: WindowKind, base: FractionBase) -> Result<BTreeMap<String, f64>> {
    if cfg.fields.iter().any(|f| f.cross_field_mix > 0.0) {
        return Err(Error::Config("closed form requires cross_field_mix = 0 in every field".into()));
    }
    if cfg.noise_invalid_year > 0.0 || cfg.noise_unknown_venue > 0.0 {
        return Err(Error::Config("closed form requires noise-free generation".into()));
    }
    if window == WindowKind::AllYears {
        return Err(Error::Config("closed form defined for two- and five-year windows".into()));
    }
    let w = window_years(window, cfg.years_back);
    Ok(cfg
        .fields
        .iter()
        .map(|f| {
            let p = in_window_mass(f.ref_age_half_life, cfg.years_back, w);
            let mu = f.mean_ref_len;
            let m = match base {
                FractionBase::InWindow => 1.0 - (-mu * p).exp() + p * (-mu).exp(),
                FractionBase::AllRefs => p,
            };
            (f.field_code.clone(), m / w as f64)
        })
        .collect())
}

fn stream(seed: u64, tag: &str, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update([0u8]);
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

struct JournalSlot {
    id: String,
    abbrev: String,
    field: usize,
}

/// Pre-resolved reference strings; every generated reference shares one of
/// these, so the corpus costs one pointer pair per reference.
struct RefPool {
    /// `[journal][age - 1]`
    valid: Vec<Vec<RawReference>>,
    /// `[journal]`
    invalid_year: Vec<RawReference>,
    /// `[field][age - 1]`
    unknown_venue: Vec<Vec<RawReference>>,
}

fn pooled(raw: String, census_year: i32, journals: &JournalTable) -> RawReference {
    let parsed: Arc<CitedRef> = Arc::new(resolve_reference(&raw, census_year, journals));
    RawReference {
        raw: Arc::from(raw),
        parsed: Some(parsed),
    }
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let y = cfg.census_year;
    let back = cfg.years_back;

    let mut slots = Vec::new();
    let mut journals = Vec::new();
    let mut assignment = BTreeMap::new();
    for (fi, f) in cfg.fields.iter().enumerate() {
        for j in 0..f.n_journals {
            let id = journal_id(&f.field_code, j);
            journals.push(Journal {
                journal_id: id.clone(),
                full_name: format!("Synthetic {} Journal {j:03}", f.field_code),
                abbreviations: vec![abbrev(&f.field_code, j)],
                field_code: f.field_code.clone(),
                items_by_year: (y - back as i32..=y).map(|yr| (yr, f.papers_per_journal_per_year)).collect(),
                merge_group: None,
            });
            assignment.insert(id.clone(), f.field_code.clone());
            slots.push(JournalSlot { id, abbrev: abbrev(&f.field_code, j), field: fi });
        }
    }
    let table = JournalTable::new(journals)?;

    let quality: Vec<f64> = {
        let normal = Normal::new(0.0, cfg.quality_spread).map_err(|e| Error::Config(e.to_string()))?;
        slots
            .iter()
            .map(|s| normal.sample(&mut stream(cfg.seed, "quality", &s.id)).exp())
            .collect()
    };

    let mut field_members: Vec<Vec<usize>> = vec![Vec::new(); cfg.fields.len()];
    for (i, s) in slots.iter().enumerate() {
        field_members[s.field].push(i);
    }
    let within: Vec<WeightedIndex<f64>> = field_members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| quality[i])).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let outside: Vec<Vec<usize>> = (0..cfg.fields.len())
        .map(|fi| {
            let other: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].field != fi).collect();
            if other.is_empty() {
                (0..slots.len()).collect()
            } else {
                other
            }
        })
        .collect();
    let ages: Vec<WeightedIndex<f64>> = cfg
        .fields
        .iter()
        .map(|f| {
            let r = 2f64.powf(-1.0 / f.ref_age_half_life);
            WeightedIndex::new((0..back as i32).map(|a| r.powi(a))).map_err(|e| Error::Config(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let ref_len: Vec<Poisson<f64>> = cfg
        .fields
        .iter()
        .map(|f| Poisson::new(f.mean_ref_len).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;

    let pool = {
        let mut cache: HashMap<String, RawReference> = HashMap::new();
        let mut get = |raw: String| cache.entry(raw.clone()).or_insert_with(|| pooled(raw, y, &table)).clone();
        RefPool {
            valid: slots
                .iter()
                .map(|s| (1..=back as i32).map(|a| get(format!("{}|{}", s.abbrev, y - a))).collect())
                .collect(),
            invalid_year: slots
                .iter()
                .map(|s| get(format!("{}|{:02}", s.abbrev, (y - 1).rem_euclid(100))))
                .collect(),
            unknown_venue: cfg
                .fields
                .iter()
                .map(|f| (1..=back as i32).map(|a| get(format!("UNLISTED {} SERIES|{}", f.field_code, y - a))).collect())
                .collect(),
        }
    };

    let per_journal: Vec<Vec<Document>> = slots
        .par_iter()
        .map(|slot| {
            let fi = slot.field;
            let spec = &cfg.fields[fi];
            let mut rng = stream(cfg.seed, "refs", &slot.id);
            (0..spec.papers_per_journal_per_year)
                .map(|d| {
                    let n = (ref_len[fi].sample(&mut rng) as u32).max(1);
                    let refs: Vec<RawReference> = (0..n)
                        .map(|_| {
                            let age = ages[fi].sample(&mut rng);
                            let target = if rng.random::<f64>() < spec.cross_field_mix {
                                let o = &outside[fi];
                                o[rng.random_range(0..o.len())]
                            } else {
                                field_members[fi][within[fi].sample(&mut rng)]
                            };
                            let u: f64 = if cfg.noise_invalid_year > 0.0 || cfg.noise_unknown_venue > 0.0 {
                                rng.random()
                            } else {
                                1.0
                            };
                            if u < cfg.noise_invalid_year {
                                pool.invalid_year[target].clone()
                            } else if u < cfg.noise_invalid_year + cfg.noise_unknown_venue {
                                pool.unknown_venue[slots[target].field][age].clone()
                            } else {
                                pool.valid[target][age].clone()
                            }
                        })
                        .collect();
                    Document {
                        doc_id: format!("{}-{d:06}", slot.id),
                        journal_id: slot.id.clone(),
                        pub_year: y,
                        doc_type: DocType::Article,
                        ref_count: n,
                        refs,
                    }
                })
                .collect()
        })
        .collect();

    let mut documents: Vec<Document> = per_journal.into_iter().flatten().collect();
    documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let expected_if5_fc = expected_fractional_rate(cfg, WindowKind::FiveYear, FractionBase::InWindow).ok();
    Ok(SynthOutput {
        corpus: Corpus {
            census_year: y,
            documents,
            source_format: SourceFormat::Jsonl,
        },
        journals: table,
        scheme: FieldScheme::new("synthetic", assignment),
        truth: GroundTruth {
            quality: slots.iter().map(|s| s.id.clone()).zip(quality).collect(),
            expected_if5_fc,
        },
    })
}

impl GroundTruth {
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<truth output>", e);
        writeln!(w, "kind\tkey\tvalue").map_err(io)?;
        for (j, q) in &self.quality {
            writeln!(w, "quality\t{j}\t{q:.9}").map_err(io)?;
        }
        if let Some(rates) = &self.expected_if5_fc {
            for (f, r) in rates {
                writeln!(w, "expected_if5_fc\t{f}\t{r:.9}").map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

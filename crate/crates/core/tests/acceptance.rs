//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs under `cargo test` (harness = false).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use fieldnorm::corpus::{merge_journal_parts, read_corpus, read_journals, validate_corpus, LoadOptions, SourceFormat};
use fieldnorm::counts::CountMode;
use fieldnorm::indicators::{compute_registry, quasi_if, Registry, RegistryOptions};
use fieldnorm::percentile::{percentile_rank, pr6_class, top_share, PercentileTable};
use fieldnorm::refmatch::match_corpus;
use fieldnorm::stats::{self, FieldScheme, Statistic};
use fieldnorm::synthgen::{generate_corpus, FieldSpec, SynthConfig, SynthOutput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// Criterion 1: hand-built fixture against a brute-force oracle

const CENSUS: i32 = 2010;

struct FixtureJournal {
    id: &'static str,
    name: &'static str,
    abbrevs: &'static [&'static str],
    field: &'static str,
    group: &'static str,
    items: &'static [(i32, u64)],
}

const FIXTURE_JOURNALS: &[FixtureJournal] = &[
    FixtureJournal { id: "ALP", name: "Alpha Letters", abbrevs: &["ALPHA LETT"], field: "PHYS", group: "", items: &[(2005, 12), (2006, 15), (2007, 20), (2008, 25), (2009, 30), (2010, 40)] },
    FixtureJournal { id: "BET", name: "Beta Reviews", abbrevs: &["BETA REV", "BETA REVIEWS"], field: "PHYS", group: "", items: &[(2005, 4), (2006, 4), (2007, 5), (2008, 6), (2009, 6), (2010, 7)] },
    FixtureJournal { id: "GAM", name: "Gamma Journal", abbrevs: &["GAMMA J"], field: "CHEM", group: "", items: &[(2006, 50), (2007, 55), (2008, 60), (2009, 65), (2010, 70)] },
    FixtureJournal { id: "DEL", name: "Delta Annals", abbrevs: &["DELTA ANN"], field: "CHEM", group: "", items: &[(2005, 9), (2006, 9), (2007, 9)] },
    FixtureJournal { id: "EPS", name: "Epsilon Proceedings", abbrevs: &["EPSILON PROC"], field: "MATH", group: "", items: &[(2008, 10), (2009, 10), (2010, 10)] },
    FixtureJournal { id: "ZET", name: "Zeta Quarterly", abbrevs: &["ZETA Q"], field: "MATH", group: "", items: &[(2008, 10), (2009, 10), (2010, 10)] },
    FixtureJournal { id: "ETA", name: "Eta Bulletin", abbrevs: &["ETA BULL"], field: "MATH", group: "", items: &[] },
    FixtureJournal { id: "THE", name: "Theta Notes", abbrevs: &["THETA NOTES"], field: "BIO", group: "", items: &[(2008, 3), (2009, 3), (2010, 3)] },
    FixtureJournal { id: "PIA", name: "Pi Chronicle A", abbrevs: &["PI CHRON A"], field: "BIO", group: "PIC", items: &[(2006, 8), (2007, 8), (2008, 8), (2009, 9), (2010, 9)] },
    FixtureJournal { id: "PIB", name: "Pi Chronicle B", abbrevs: &["PI CHRON B"], field: "BIO", group: "PIC", items: &[(2007, 2), (2008, 3), (2009, 4), (2010, 5)] },
];

/// Venue strings as they appear in references; includes spelling variants
/// and an unlisted venue. EPS and ZET are cited only by the tie documents.
const FIXTURE_VENUES: &[&str] = &[
    "ALPHA LETT", "alpha  lett.", "BETA REV", "BETA REVIEWS", "GAMMA J", "DELTA ANN", "ETA BULL", "PI CHRON A", "PI CHRON B",
    "UNLISTED J",
];

const FIXTURE_YEARS: &[&str] = &[
    "2010", "2009", "2009", "2008", "2008", "2007", "2006", "2005", "2004", "1995", "1899", "2011", "18", "19xx",
];

struct FixtureDoc {
    doc_id: String,
    journal: &'static str,
    year: i32,
    doc_type: &'static str,
    nref: u32,
    refs: Vec<String>,
}

fn fixture_docs() -> Vec<FixtureDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut docs = Vec::new();
    for i in 0..60 {
        let journal = FIXTURE_JOURNALS[i % FIXTURE_JOURNALS.len()].id;
        let year = if i % 7 == 3 { 2009 } else { CENSUS };
        let n = rng.random_range(0..9usize);
        let mut refs: Vec<String> = (0..n)
            .map(|r| {
                let venue = FIXTURE_VENUES[rng.random_range(0..FIXTURE_VENUES.len())];
                let y = FIXTURE_YEARS[rng.random_range(0..FIXTURE_YEARS.len())];
                format!("AUTHOR{i}X{r}, {y}, {venue}, V{}, P{}", rng.random_range(1..90), rng.random_range(1..900))
            })
            .collect();
        if i % 11 == 5 && !refs.is_empty() {
            refs.push(refs[0].clone());
        }
        let extra = if i % 5 == 0 { rng.random_range(0..4) } else { 0 };
        docs.push(FixtureDoc {
            doc_id: format!("D{i:03}"),
            journal,
            year,
            doc_type: ["article", "review", "letter", "article"][i % 4],
            nref: refs.len() as u32 + extra,
            refs,
        });
    }
    // Two documents whose references credit EPS and ZET identically.
    for (id, j) in [("T1", "EPSILON PROC"), ("T2", "ZETA Q")] {
        docs.push(FixtureDoc {
            doc_id: id.into(),
            journal: "THE",
            year: CENSUS,
            doc_type: "article",
            nref: 3,
            refs: vec![format!("TIE, 2009, {j}, V1, P1"), format!("TIE, 2006, {j}, V1, P2"), "TIE, 1998, UNLISTED J, V1, P3".into()],
        });
    }
    // Rejected records: duplicate id, declared count below listed refs.
    docs.push(FixtureDoc {
        doc_id: "D001".into(),
        journal: "ALP",
        year: CENSUS,
        doc_type: "article",
        nref: 1,
        refs: vec!["DUP, 2009, GAMMA J, V1, P1".into()],
    });
    docs.push(FixtureDoc {
        doc_id: "BAD".into(),
        journal: "ALP",
        year: CENSUS,
        doc_type: "article",
        nref: 0,
        refs: vec!["BAD, 2009, GAMMA J, V1, P1".into()],
    });
    docs
}

fn fixture_journals_tsv() -> String {
    let mut s = String::from("journal_id\tfull_name\tabbrevs\tfield\tmerge_group\n");
    for j in FIXTURE_JOURNALS {
        s += &format!("{}\t{}\t{}\t{}\t{}", j.id, j.name, j.abbrevs.join("|"), j.field, j.group);
        for (y, n) in j.items {
            s += &format!("\t{y}={n}");
        }
        s.push('\n');
    }
    s
}

fn fixture_corpus_jsonl(docs: &[FixtureDoc]) -> String {
    docs.iter()
        .map(|d| {
            serde_json::json!({"doc_id": d.doc_id, "journal": d.journal, "year": d.year, "type": d.doc_type, "nref": d.nref, "refs": d.refs})
                .to_string()
                + "\n"
        })
        .collect()
}

/// Straight-line recomputation of every registry variable.
struct Oracle {
    values: BTreeMap<String, BTreeMap<String, f64>>,
    undefined: BTreeMap<String, BTreeSet<String>>,
}

fn oracle_norm(v: &str) -> String {
    v.to_uppercase().split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches('.').to_string()
}

fn oracle(docs: &[FixtureDoc]) -> Oracle {
    // merged journal universe
    let canonical = |j: &FixtureJournal| if j.group.is_empty() { j.id.to_string() } else { j.group.to_string() };
    let mut ids = BTreeSet::new();
    let mut venue = BTreeMap::new();
    let mut items: BTreeMap<String, BTreeMap<i32, u64>> = BTreeMap::new();
    for j in FIXTURE_JOURNALS {
        let c = canonical(j);
        ids.insert(c.clone());
        for a in j.abbrevs {
            venue.insert(oracle_norm(a), c.clone());
        }
        let e = items.entry(c).or_default();
        for &(y, n) in j.items {
            *e.entry(y).or_insert(0) += n;
        }
    }

    // accepted citing documents
    let mut seen = BTreeSet::new();
    let accepted: Vec<&FixtureDoc> = docs
        .iter()
        .filter(|d| seen.insert(d.doc_id.clone()) && d.nref as usize >= d.refs.len())
        .filter(|d| d.year == CENSUS)
        .collect();

    let windows: [(&str, i32, i32); 3] = [("", 1900, CENSUS), ("2", CENSUS - 2, CENSUS - 1), ("5", CENSUS - 5, CENSUS - 1)];
    let mut values: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (suffix, lo, hi) in windows {
        let mut ic: BTreeMap<String, f64> = ids.iter().map(|j| (j.clone(), 0.0)).collect();
        let mut fc = ic.clone();
        let mut fcp = ic.clone();
        for d in &accepted {
            let parsed: Vec<(i32, Option<String>)> = d
                .refs
                .iter()
                .filter_map(|r| {
                    let f: Vec<&str> = r.split(", ").collect();
                    let y: i32 = f[1].parse().ok().filter(|_| f[1].len() == 4)?;
                    (1900..=CENSUS).contains(&y).then(|| (y, venue.get(&oracle_norm(f[2])).cloned()))
                })
                .filter(|(y, _)| (lo..=hi).contains(y))
                .collect();
            let k = parsed.len() as f64;
            for (_, target) in &parsed {
                if let Some(t) = target {
                    *ic.get_mut(t).unwrap() += 1.0;
                    *fc.get_mut(t).unwrap() += 1.0 / k;
                    *fcp.get_mut(t).unwrap() += 1.0 / d.nref as f64;
                }
            }
        }
        values.insert(format!("TC-IC{suffix}"), ic);
        values.insert(format!("TC-FC{suffix}"), fc);
        if !suffix.is_empty() {
            values.insert(format!("TC-FC{suffix}+"), fcp);
        }
    }
    let den = |lo: i32, hi: i32| -> BTreeMap<String, f64> {
        items
            .iter()
            .map(|(j, by)| (j.clone(), by.iter().filter(|(y, _)| (lo..=hi).contains(*y)).map(|(_, n)| *n as f64).sum()))
            .collect()
    };
    let den2 = den(CENSUS - 2, CENSUS - 1);
    let den5 = den(CENSUS - 5, CENSUS - 1);
    let den1 = den(CENSUS, CENSUS);
    let mut undefined = BTreeMap::new();
    let mut ratio = |id: &str, num: &BTreeMap<String, f64>, d: &BTreeMap<String, f64>, values: &mut BTreeMap<String, BTreeMap<String, f64>>| {
        let mut out = BTreeMap::new();
        let mut undef = BTreeSet::new();
        for (j, n) in num {
            if d[j] == 0.0 {
                undef.insert(j.clone());
            } else {
                out.insert(j.clone(), n / d[j]);
            }
        }
        values.insert(id.to_string(), out);
        undefined.insert(id.to_string(), undef);
    };
    for (id, num, d) in [
        ("IF2-IC", "TC-IC2", &den2),
        ("IF5-IC", "TC-IC5", &den5),
        ("IF2-FC", "TC-FC2", &den2),
        ("IF5-FC", "TC-FC5", &den5),
        ("IF2-FC+", "TC-FC2+", &den2),
        ("IF5-FC+", "TC-FC5+", &den5),
        ("FC/P", "TC-FC", &den1),
    ] {
        let n = values[num].clone();
        ratio(id, &n, d, &mut values);
    }
    values.insert("IF2-Num".into(), values["TC-IC2"].clone());
    values.insert("IF5-Num".into(), values["TC-IC5"].clone());
    values.insert("IF2-Denom".into(), den2);
    values.insert("IF5-Denom".into(), den5);
    values.insert(format!("Items{CENSUS}"), den1);
    Oracle { values, undefined }
}

fn oracle_pr100(values: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let n = values.len() as f64;
    values
        .iter()
        .map(|(j, &x)| {
            let below = values.values().filter(|&&v| x - v > 1e-9 * x.abs()).count();
            (j.clone(), 100.0 * below as f64 / n)
        })
        .collect()
}

fn oracle_pr6(p: f64) -> u8 {
    if p >= 99.0 {
        6
    } else if p >= 95.0 {
        5
    } else if p >= 90.0 {
        4
    } else if p >= 75.0 {
        3
    } else if p >= 50.0 {
        2
    } else {
        1
    }
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let docs = fixture_docs();
    let journals = read_journals(fixture_journals_tsv().as_bytes()).expect("fixture journals");
    let loaded = read_corpus(
        fixture_corpus_jsonl(&docs).as_bytes(),
        SourceFormat::Jsonl,
        CENSUS,
        LoadOptions { allow_truncated: true },
    )
    .expect("fixture corpus");
    let (mut corpus, journals) = merge_journal_parts(loaded.corpus, journals).expect("merge");
    match_corpus(&mut corpus, &journals);
    let registry = compute_registry(&corpus, &journals, &RegistryOptions::default()).expect("registry");
    let oracle = oracle(&docs);

    let mut problems = Vec::new();
    let mut compared = 0usize;
    if loaded.errors.len() != 2 {
        problems.push(format!("expected 2 rejected records, got {}", loaded.errors.len()));
    }
    for t in &registry.indicators {
        let Some(expected) = oracle.values.get(&t.indicator_id) else {
            problems.push(format!("{}: no oracle", t.indicator_id));
            continue;
        };
        if t.values.keys().ne(expected.keys()) {
            problems.push(format!("{}: journal sets differ", t.indicator_id));
            continue;
        }
        let exact = t.indicator_id.contains("IC") || t.indicator_id.contains("Denom") || t.indicator_id.contains("Num") || t.indicator_id.starts_with("Items");
        for (j, &v) in &t.values {
            compared += 1;
            let e = expected[j];
            let ok = if exact { v == e } else { rel_close(v, e, 1e-9) };
            if !ok {
                problems.push(format!("{}[{j}]: {v} vs oracle {e}", t.indicator_id));
            }
        }
        if let Some(u) = oracle.undefined.get(&t.indicator_id) {
            if &t.undefined_journals != u {
                problems.push(format!("{}: undefined sets differ", t.indicator_id));
            }
        }
    }
    for t in registry.percentile_variables() {
        let pt = PercentileTable::from_indicator(t).expect("percentiles");
        let pr = oracle_pr100(&oracle.values[&t.indicator_id]);
        for (j, &p) in &pt.pr100 {
            compared += 2;
            if p != pr[j] || pt.pr6[j] != oracle_pr6(pr[j]) {
                problems.push(format!("PR({})[{j}]: {p}/{} vs oracle {}/{}", t.indicator_id, pt.pr6[j], pr[j], oracle_pr6(pr[j])));
            }
        }
    }
    // The fixture must exercise ties, undefined ratios and the merge group.
    let tie = registry.get("TC-IC5").map(|t| t.values["EPS"] == t.values["ZET"] && t.values["EPS"] > 0.0);
    if tie != Some(true) {
        problems.push("fixture lacks the EPS/ZET tie".into());
    }
    if !registry.get("IF2-IC").is_some_and(|t| t.undefined_journals.contains("DEL") && t.values.contains_key("PIC")) {
        problems.push("fixture lacks undefined or merged journals".into());
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 1.0 {
        problems.push(format!("runtime {secs:.3} s"));
    }
    let detail = if problems.is_empty() {
        format!("{compared} values match the brute-force oracle in {secs:.3} s")
    } else {
        format!("{} mismatch(es), first: {}", problems.len(), problems[0])
    };
    outcome(problems.is_empty(), detail)
}

// ---------------------------------------------------------------------------
// Criterion 2: percentile band

fn criterion2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3705);
    let mut values = BTreeMap::new();
    while values.len() < 3705 {
        let v: f64 = rng.random::<f64>() * 1000.0;
        if !values.values().any(|&x: &f64| x == v) {
            values.insert(format!("J{:05}", values.len()), v);
        }
    }
    let pr = percentile_rank(&values).expect("pr100");
    let mean = pr.values().sum::<f64>() / 3705.0;
    let expected = 50.0 * 3704.0 / 3705.0;
    let top = top_share(&pr, 99.0).len();
    let mean_pr6 = pr.values().map(|&p| f64::from(pr6_class(p))).sum::<f64>() / 3705.0;
    let pass = (mean - expected).abs() <= 1e-9 && top == 37 && (1.89..=1.93).contains(&mean_pr6);
    outcome(
        pass,
        format!("mean PR100 {mean:.9} (target {expected:.9}), top-1% {top} journals, mean PR6 {mean_pr6:.4}"),
    )
}

// ---------------------------------------------------------------------------
// Criteria 3 to 5: synthetic replication

struct Synthetic {
    output: SynthOutput,
    registry: Registry,
    build_secs: f64,
}

fn synthetic_config() -> SynthConfig {
    SynthConfig {
        census_year: 2010,
        fields: (0..11)
            .map(|i| FieldSpec {
                field_code: format!("F{i:02}"),
                n_journals: 27,
                papers_per_journal_per_year: 1684,
                mean_ref_len: 12.0 + 33.0 * i as f64 / 10.0,
                ref_age_half_life: 2.0 + 6.0 * ((i * 7) % 11) as f64 / 10.0,
                cross_field_mix: 0.05,
            })
            .collect(),
        quality_spread: 0.5,
        years_back: 10,
        seed: 20_100_101,
        noise_invalid_year: 0.0,
        noise_unknown_venue: 0.0,
    }
}

fn synthetic() -> &'static Synthetic {
    static CELL: OnceLock<Synthetic> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let output = generate_corpus(&synthetic_config()).expect("synthetic corpus");
        let registry = compute_registry(&output.corpus, &output.journals, &RegistryOptions::default()).expect("registry");
        Synthetic {
            output,
            registry,
            build_secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn criterion3() -> Outcome {
    let start = Instant::now();
    let s = synthetic();
    let scheme = &s.output.scheme;
    let int = stats::analyze(s.registry.get("IF5-IC").unwrap(), scheme, Statistic::Eta2, 9999, 7).expect("integer varcomp");
    let frac = stats::analyze(s.registry.get("IF5-FC").unwrap(), scheme, Statistic::Eta2, 9999, 7).expect("fractional varcomp");
    let reduction = stats::variance_reduction(int.sigma2_between, frac.sigma2_between).unwrap_or(f64::NAN);
    let secs = s.build_secs + start.elapsed().as_secs_f64();
    let (p_int, p_frac) = (int.perm_p.unwrap(), frac.perm_p.unwrap());
    let pass = p_int < 0.001 && reduction >= 0.8 && p_frac > 0.001 && secs < 60.0;
    outcome(
        pass,
        format!(
            "{} docs, {} journals: integer IF5 p = {p_int:.4}, fractional IF5 p = {p_frac:.4}, sigma2_between {:.4e} -> {:.4e} (reduction {:.1}%), {secs:.1} s",
            s.output.corpus.documents.len(),
            s.output.journals.len(),
            int.sigma2_between,
            frac.sigma2_between,
            100.0 * reduction
        ),
    )
}

fn criterion4() -> Outcome {
    let s = synthetic();
    let mut checked = 0;
    let mut bad = Vec::new();
    for (plus, base) in [("IF5-FC+", "IF5-FC"), ("IF2-FC+", "IF2-FC")] {
        let (p, b) = (s.registry.get(plus).unwrap(), s.registry.get(base).unwrap());
        for (j, &v) in &b.values {
            checked += 1;
            if p.values[j] > v {
                bad.push(format!("{plus}[{j}] = {} > {v}", p.values[j]));
            }
        }
    }
    let detail = match bad.first() {
        None => format!("{checked} journal comparisons, all FC+ <= FC"),
        Some(b) => format!("{} violation(s), first: {b}", bad.len()),
    };
    outcome(bad.is_empty(), detail)
}

fn criterion5() -> Outcome {
    let s = synthetic();
    let report = validate_corpus(&s.output.corpus, &s.output.journals);
    let ic = s.registry.count("TC-IC").unwrap();
    let fc = s.registry.count("TC-FC").unwrap();
    let ratio = ic.total() / fc.total();
    let (refs, docs) = s
        .output
        .corpus
        .citing_documents()
        .filter(|d| !d.refs.is_empty())
        .fold((0usize, 0usize), |(r, n), d| (r + d.refs.len(), n + 1));
    let mean = refs as f64 / docs as f64;
    let fully_matched = report.matched_refs == report.total_refs;
    let pass = fully_matched && docs == fc.contributing_docs && (ratio - mean).abs() < 1e-9;
    outcome(
        pass,
        format!(
            "TC-IC/TC-FC = {:.0}/{:.6} = {ratio:.12}; mean refs per contributing doc {mean:.12}; |diff| {:.2e}; matched {}/{}",
            ic.total(),
            fc.total(),
            (ratio - mean).abs(),
            report.matched_refs,
            report.total_refs
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 6: statistics against direct formulas

fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn direct_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// (eta2, sigma2_between, sigma2_within) from textbook one-way ANOVA sums.
fn direct_anova(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let k = groups.len() as f64;
    let grand = all.iter().sum::<f64>() / n;
    let sst: f64 = all.iter().map(|v| (v - grand) * (v - grand)).sum();
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let ssb = sst - ssw;
    let msb = ssb / (k - 1.0);
    let msw = ssw / (n - k);
    let sum_sq: f64 = groups.iter().map(|g| (g.len() * g.len()) as f64).sum();
    let n0 = (n - sum_sq / n) / (k - 1.0);
    (1.0 - ssw / sst, ((msb - msw) / n0).max(0.0), msw)
}

fn grouped(groups: &[Vec<f64>]) -> (BTreeMap<String, f64>, FieldScheme) {
    let mut values = BTreeMap::new();
    let mut assignment = BTreeMap::new();
    for (g, vals) in groups.iter().enumerate() {
        for (i, &v) in vals.iter().enumerate() {
            let id = format!("G{g:02}-{i:04}");
            values.insert(id.clone(), v);
            assignment.insert(id, format!("G{g:02}"));
        }
    }
    (values, FieldScheme::new("test", assignment).with_min_group_size(2))
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for inst in 0..200 {
        let n = rng.random_range(5..60usize);
        // alternate continuous and heavily tied integer data
        let draw = |rng: &mut ChaCha8Rng| if inst % 2 == 0 { rng.random::<f64>() * 100.0 } else { f64::from(rng.random_range(0..6u8)) };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + draw(&mut rng)).collect();
        if let Ok(r) = stats::pearson(&x, &y) {
            worst = worst.max((r - direct_pearson(&x, &y)).abs());
        }
        if let Ok(r) = stats::spearman(&x, &y) {
            worst = worst.max((r - direct_pearson(&direct_ranks(&x), &direct_ranks(&y))).abs());
        }
        let k = rng.random_range(2..8usize);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| {
                let size = rng.random_range(2..25usize);
                (0..size).map(|_| g as f64 * 3.0 + draw(&mut rng)).collect()
            })
            .collect();
        let (values, scheme) = grouped(&groups);
        let (eta2, s2b, s2w) = direct_anova(&groups);
        if let Ok(e) = stats::eta_squared(&values, &scheme) {
            worst = worst.max((e - eta2).abs());
        }
        let r = stats::varcomp_moments("x", &values, &scheme).expect("varcomp");
        worst = worst.max((r.sigma2_between - s2b).abs()).max((r.sigma2_within - s2w).abs());
        instances += 1;
    }

    // Planted between-field variance: effects standardized to sample
    // variance exactly 1, unit within-field noise.
    let mut recoveries = Vec::new();
    for rep in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let std = Normal::new(0.0, 1.0).unwrap();
        let raw: Vec<f64> = (0..11).map(|_| std.sample(&mut rng)).collect();
        let m = raw.iter().sum::<f64>() / 11.0;
        let sd = (raw.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 10.0).sqrt();
        let effects: Vec<f64> = raw.iter().map(|a| (a - m) / sd).collect();
        let groups: Vec<Vec<f64>> = effects.iter().map(|a| (0..300).map(|_| 5.0 + a + std.sample(&mut rng)).collect()).collect();
        let (values, scheme) = grouped(&groups);
        recoveries.push(stats::varcomp_moments("planted", &values, &scheme).unwrap().sigma2_between);
    }
    let worst_rec = recoveries.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let pass = worst < 1e-10 && worst_rec <= 0.15;
    outcome(
        pass,
        format!(
            "{instances} random instances, max |diff| {worst:.2e}; planted sigma2_between = 1 recovered within {:.1}% over 20 seeds",
            100.0 * worst_rec
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7: CLI determinism across thread counts

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["fieldnorm"];
    full.extend_from_slice(args);
    fieldnorm::cli::run(full)
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion7() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = tmp.path();
    let cfg = "census_year = 2010\nyears_back = 8\nquality_spread = 0.6\nseed = 77\n\
               field.A.n_journals = 12\nfield.A.papers_per_journal_per_year = 40\nfield.A.mean_ref_len = 10\nfield.A.ref_age_half_life = 3\nfield.A.cross_field_mix = 0.1\n\
               field.B.n_journals = 12\nfield.B.papers_per_journal_per_year = 30\nfield.B.mean_ref_len = 30\nfield.B.ref_age_half_life = 6\nfield.B.cross_field_mix = 0.1\n\
               field.C.n_journals = 3\nfield.C.papers_per_journal_per_year = 20\nfield.C.mean_ref_len = 5\nfield.C.ref_age_half_life = 2\n";
    let cfg_path = root.join("synth.cfg");
    std::fs::write(&cfg_path, cfg).unwrap();
    let cfg_s = cfg_path.to_str().unwrap();
    let input = root.join("input");
    let input_s = input.to_str().unwrap();
    if run_cli(&["--out", input_s, "synth", cfg_s]) != 0 {
        return outcome(false, "synth failed");
    }
    let corpus = input.join("corpus.jsonl");
    let journals = input.join("journals.tsv");
    let fields = input.join("fields.tsv");
    let (corpus, journals, fields) = (corpus.to_str().unwrap(), journals.to_str().unwrap(), fields.to_str().unwrap());

    // Downstream commands read the indicator files of the first run so
    // that every run sees byte-identical inputs under identical paths.
    let shared = root.join("t1").join("indicators").join("indicators");
    let file = |name: &str| shared.join(name).to_str().unwrap().to_owned();
    let (if2, if5, if5fc, tc) = (file("IF2-IC.tsv"), file("IF5-IC.tsv"), file("IF5-FC.tsv"), file("TC-IC.tsv"));
    let mut trees = Vec::new();
    let mut codes = Vec::new();
    for threads in ["1", "4", "8"] {
        let out = root.join(format!("t{threads}"));
        let o = |sub: &str| out.join(sub).to_str().unwrap().to_owned();
        let common = ["--threads", threads, "--census-year", "2010", "--journals", journals];
        let c = vec![
            run_cli(&["--threads", threads, "--out", &o("synth"), "synth", cfg_s]),
            run_cli(&[&common[..], &["--out", &o("validate"), "validate", "--corpus", corpus]].concat()),
            run_cli(&[&common[..], &["--out", &o("indicators"), "indicators", "--corpus", corpus]].concat()),
            run_cli(&[&common[..], &["--out", &o("rank"), "rank", &if5, "--top", "5"]].concat()),
            run_cli(&[&common[..], &["--out", &o("rank"), "rank", &if5, "--pr6"]].concat()),
            run_cli(&[&common[..], &["--out", &o("correlate"), "correlate", &if5, &if5fc, &tc]].concat()),
            run_cli(
                &[&common[..], &["--fields", fields, "--seed", "5", "--out", &o("varcomp"), "varcomp", &if2, &if5, &if5fc, "--n-perm", "999"]].concat(),
            ),
        ];
        codes.push(c);
        trees.push(tree(&out));
    }
    let base = &trees[0];
    let same = trees[1] == *base && trees[2] == *base;
    let codes_ok = codes.iter().all(|c| c == &codes[0]) && codes[0].iter().all(|&c| c <= 1);
    let files = base.len();
    outcome(
        same && codes_ok && files > 40,
        format!("{files} output files from 7 command runs identical at 1, 4 and 8 threads (exit codes {:?})", codes[0]),
    )
}

// ---------------------------------------------------------------------------
// Criterion 8: invariances

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut problems = Vec::new();
    // integer-valued data keeps x^3 + 7x exact, so the transform is strictly
    // monotone in floating point as well
    let monotone = |x: f64| x * x * x + 7.0 * x;
    for _ in 0..50 {
        let n = rng.random_range(5..200usize);
        let vals: BTreeMap<String, f64> = (0..n).map(|i| (format!("J{i:03}"), f64::from(rng.random_range(-5000..5000i32)))).collect();
        let t: BTreeMap<String, f64> = vals.iter().map(|(j, &v)| (j.clone(), monotone(v))).collect();
        if percentile_rank(&vals).unwrap() != percentile_rank(&t).unwrap() {
            problems.push("PR100 changed under a monotone transform".to_string());
        }
        let x: Vec<f64> = vals.values().copied().collect();
        let y: Vec<f64> = x.iter().map(|v| v + f64::from(rng.random_range(-3000..3000i32))).collect();
        let tx: Vec<f64> = x.iter().map(|&v| monotone(v)).collect();
        if stats::spearman(&x, &y).ok() != stats::spearman(&tx, &y).ok() {
            problems.push("Spearman changed under a monotone transform".to_string());
        }
    }

    for rep in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(80 + rep);
        let mut values = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for g in 0..4 {
            for i in 0..rng.random_range(10..30) {
                let id = format!("G{g}-{i:02}");
                values.insert(id.clone(), f64::from(g) * 0.4 + rng.random::<f64>() * 3.0);
                assignment.insert(id, format!("G{g}"));
            }
        }
        let scheme = FieldScheme::new("inv", assignment);
        let base = stats::varcomp_moments("v", &values, &scheme).unwrap();
        let p = stats::permutation_test(&values, &scheme, Statistic::Eta2, 999, rep).unwrap();
        let p_s2 = stats::permutation_test(&values, &scheme, Statistic::Sigma2Between, 999, rep).unwrap();
        for (a, b) in [(2.5, 10.0), (1e-3, -7.0), (40.0, 0.0)] {
            let t: BTreeMap<String, f64> = values.iter().map(|(j, &v)| (j.clone(), a * v + b)).collect();
            let r = stats::varcomp_moments("v", &t, &scheme).unwrap();
            if !rel_close(r.eta2.unwrap(), base.eta2.unwrap(), 1e-9) {
                problems.push(format!("eta2 changed under {a}x+{b}"));
            }
            if !rel_close(r.sigma2_between / (a * a), base.sigma2_between, 1e-9) {
                problems.push(format!("sigma2_between / a^2 changed under {a}x+{b}"));
            }
            if stats::permutation_test(&t, &scheme, Statistic::Eta2, 999, rep).unwrap() != p
                || stats::permutation_test(&t, &scheme, Statistic::Sigma2Between, 999, rep).unwrap() != p_s2
            {
                problems.push(format!("perm_p changed under {a}x+{b}"));
            }
        }
    }

    let s = synthetic();
    let num = s.registry.count("TC-IC5").unwrap();
    let den = fieldnorm::indicators::compute_denominator(
        &s.output.journals,
        None,
        fieldnorm::indicators::DenominatorWindow::FiveYear,
        2010,
        &fieldnorm::corpus::DocType::default_citable(),
    );
    let order = |t: &fieldnorm::indicators::IndicatorTable| fieldnorm::percentile::top_k(&t.values, usize::MAX).into_iter().map(|(j, _)| j).collect::<Vec<_>>();
    let base = quasi_if("IF5-IC", num, &den).unwrap();
    for c in [0.5, 3.0, 1234.5] {
        let mut scaled = num.clone();
        scaled.values.values_mut().for_each(|v| *v *= c);
        if scaled.mode != CountMode::INTEGER || order(&quasi_if("IF5-IC", &scaled, &den).unwrap()) != order(&base) {
            problems.push(format!("quasi-IF order changed under numerator scaling by {c}"));
        }
    }
    let detail = match problems.first() {
        None => "PR100, Spearman, eta2, sigma2_between/a^2, perm_p and quasi-IF order all invariant".to_string(),
        Some(p) => format!("{} violation(s), first: {p}", problems.len()),
    };
    outcome(problems.is_empty(), detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("fixture exactness", criterion1),
        ("percentile band", criterion2),
        ("variance reduction on synthetic fields", criterion3),
        ("window-base ordering", criterion4),
        ("bookkeeping identity", criterion5),
        ("statistics oracles", criterion6),
        ("determinism across thread counts", criterion7),
        ("invariance suite", criterion8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {tag}: {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

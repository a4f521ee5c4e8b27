//! Correlations, between-field effect sizes, one-way random-effects variance
//! components, label-permutation significance, and distribution screens.
//!
//! Variance components use the method-of-moments (ANOVA) estimator:
//! `sigma2_within = MS_within` and
//! `sigma2_between = max(0, (MS_between - MS_within) / n0)` with
//! `n0 = (N - sum(n_i^2) / N) / (k - 1)`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::JournalTable;
use crate::error::{Error, Result};
use crate::indicators::IndicatorTable;
use crate::tsv;

pub const DEFAULT_MIN_GROUP_SIZE: usize = 10;
pub const MIN_PERMUTATIONS: usize = 999;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "correlation of samples with different lengths ({} and {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!("correlation needs at least 3 pairs, got {}", x.len())));
    }
    Ok(())
}

/// Product-moment correlation. Zero variance in either sample is reported
/// as [`Error::Undefined`].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant sample".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties receiving the average of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub ids: Vec<String>,
    /// Size of the common journal population.
    pub n: usize,
    /// `cells[i][j]`: Spearman above the diagonal, Pearson below, `None` on
    /// the diagonal and for undefined pairs.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn undefined_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for i in 0..self.ids.len() {
            for j in 0..self.ids.len() {
                if i != j && self.cells[i][j].is_none() {
                    out.push((self.ids[i].clone(), self.ids[j].clone()));
                }
            }
        }
        out
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<matrix output>", e);
        let mut header = vec!["indicator".to_owned()];
        header.extend(self.ids.iter().cloned());
        tsv::write_row(&mut w, &header).map_err(io)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            for j in 0..self.ids.len() {
                row.push(match (i == j, self.cells[i][j]) {
                    (true, _) => String::new(),
                    (false, Some(v)) => format!("{v:.6}"),
                    (false, None) => "NA".to_owned(),
                });
            }
            tsv::write_row(&mut w, &row).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Spearman (upper triangle) and Pearson (lower triangle) correlations over
/// the journals defined in every table.
pub fn correlation_matrix(tables: &[IndicatorTable]) -> Result<CorrelationMatrix> {
    let Some(first) = tables.first() else {
        return Err(Error::InvalidInput("correlation matrix of no indicators".into()));
    };
    let common: Vec<&String> = first
        .values
        .keys()
        .filter(|j| tables[1..].iter().all(|t| t.values.contains_key(*j)))
        .collect();
    if common.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} journals are common to all indicators; at least 3 needed",
            common.len()
        )));
    }
    let columns: Vec<Vec<f64>> = tables
        .iter()
        .map(|t| common.iter().map(|j| t.values[*j]).collect())
        .collect();
    let k = tables.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i < j {
                cells[i][j] = spearman(&columns[i], &columns[j]).ok();
            } else if i > j {
                cells[i][j] = pearson(&columns[i], &columns[j]).ok();
            }
        }
    }
    Ok(CorrelationMatrix {
        ids: tables.iter().map(|t| t.indicator_id.clone()).collect(),
        n: common.len(),
        cells,
    })
}

// ---------------------------------------------------------------------------
// Field schemes and grouped samples

#[derive(Debug, Clone, PartialEq)]
pub struct FieldScheme {
    pub name: String,
    pub assignment: BTreeMap<String, String>,
    pub min_group_size: usize,
}

impl FieldScheme {
    pub fn new(name: impl Into<String>, assignment: BTreeMap<String, String>) -> Self {
        FieldScheme {
            name: name.into(),
            assignment,
            min_group_size: DEFAULT_MIN_GROUP_SIZE,
        }
    }

    pub fn with_min_group_size(mut self, n: usize) -> Self {
        self.min_group_size = n;
        self
    }

    /// Field codes from the journal master.
    pub fn from_journals(journals: &JournalTable) -> Self {
        FieldScheme::new(
            "journal-master",
            journals
                .journals()
                .iter()
                .map(|j| (j.journal_id.clone(), j.field_code.clone()))
                .collect(),
        )
    }

    /// TSV with header `journal_id, field`. A journal listed twice with
    /// different fields is rejected.
    pub fn read_tsv<R: BufRead>(name: &str, reader: R) -> Result<Self> {
        let mut lines = tsv::data_lines(reader);
        match lines.next() {
            Some(Ok((_, h))) => tsv::expect_header(&h, &["journal_id", "field"], true)?,
            Some(Err(e)) => return Err(Error::io("<fields>", e)),
            None => return Err(Error::Header("empty field file".into())),
        }
        let mut assignment = BTreeMap::new();
        for item in lines {
            let (line, text) = item.map_err(|e| Error::io("<fields>", e))?;
            let cols: Vec<&str> = text.split('\t').map(str::trim).collect();
            if cols.len() != 2 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(Error::InvalidInput(format!("fields line {line}: expected journal_id and field")));
            }
            if let Some(prev) = assignment.insert(cols[0].to_owned(), cols[1].to_owned()) {
                if prev != cols[1] {
                    return Err(Error::InvalidInput(format!(
                        "fields line {line}: journal {} assigned to both {prev} and {}",
                        cols[0], cols[1]
                    )));
                }
            }
        }
        Ok(FieldScheme::new(name, assignment))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fields").to_owned();
        FieldScheme::read_tsv(&name, tsv::open(path)?)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<fields output>", e);
        tsv::write_row(&mut w, &["journal_id", "field"]).map_err(io)?;
        for (j, f) in &self.assignment {
            tsv::write_row(&mut w, &[j, f]).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Values of the journals that belong to a retained field, with field labels.
#[derive(Debug, Clone)]
pub struct GroupedSample {
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
    /// Retained field codes, indexed by label.
    pub groups: Vec<String>,
    pub sizes: Vec<usize>,
    /// Fields below the minimum group size, with their sizes.
    pub excluded: Vec<(String, usize)>,
    /// Journals with a value but no field assignment.
    pub unassigned: usize,
}

impl GroupedSample {
    /// Fails unless at least two fields survive the size filter.
    pub fn new(values: &BTreeMap<String, f64>, scheme: &FieldScheme) -> Result<GroupedSample> {
        let mut by_field: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut unassigned = 0;
        for (j, &v) in values {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value for journal {j}")));
            }
            match scheme.assignment.get(j) {
                Some(f) => by_field.entry(f.as_str()).or_default().push(v),
                None => unassigned += 1,
            }
        }
        let mut sample = GroupedSample {
            values: Vec::new(),
            labels: Vec::new(),
            groups: Vec::new(),
            sizes: Vec::new(),
            excluded: Vec::new(),
            unassigned,
        };
        for (field, vals) in by_field {
            if vals.len() < scheme.min_group_size.max(1) {
                sample.excluded.push((field.to_owned(), vals.len()));
                continue;
            }
            let label = sample.groups.len();
            sample.groups.push(field.to_owned());
            sample.sizes.push(vals.len());
            sample.labels.extend(std::iter::repeat_n(label, vals.len()));
            sample.values.extend(vals);
        }
        if sample.groups.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{} field(s) retained after excluding groups smaller than {}; at least 2 needed",
                sample.groups.len(),
                scheme.min_group_size
            )));
        }
        Ok(sample)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    fn grand_mean(&self) -> f64 {
        mean(&self.values)
    }

    fn group_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k()];
        for (&v, &l) in self.values.iter().zip(&self.labels) {
            sums[l] += v;
        }
        sums.iter().zip(&self.sizes).map(|(s, &n)| s / n as f64).collect()
    }

    /// (SS_between, SS_within, SS_total) by direct two-pass sums.
    pub fn sums_of_squares(&self) -> (f64, f64, f64) {
        let m = self.grand_mean();
        let means = self.group_means();
        let ss_total: f64 = self.values.iter().map(|v| (v - m).powi(2)).sum();
        let ss_within: f64 = self
            .values
            .iter()
            .zip(&self.labels)
            .map(|(v, &l)| (v - means[l]).powi(2))
            .sum();
        let ss_between: f64 = means
            .iter()
            .zip(&self.sizes)
            .map(|(gm, &n)| n as f64 * (gm - m).powi(2))
            .sum();
        (ss_between, ss_within, ss_total)
    }

    /// Average group size adjusted for imbalance.
    pub fn n0(&self) -> f64 {
        let n = self.n() as f64;
        let sum_sq: f64 = self.sizes.iter().map(|&s| (s as f64).powi(2)).sum();
        (n - sum_sq / n) / (self.k() as f64 - 1.0)
    }
}

pub fn eta_squared(values: &BTreeMap<String, f64>, scheme: &FieldScheme) -> Result<f64> {
    let sample = GroupedSample::new(values, scheme)?;
    let (ssb, _, sst) = sample.sums_of_squares();
    if sst == 0.0 {
        return Err(Error::Undefined("eta squared of a constant sample".into()));
    }
    Ok(ssb / sst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Eta2,
    Sigma2Between,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Eta2 => "eta2",
            Statistic::Sigma2Between => "sigma2_between",
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta2" => Ok(Statistic::Eta2),
            "sigma2_between" => Ok(Statistic::Sigma2Between),
            _ => Err(Error::InvalidInput(format!("unknown statistic {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarCompResult {
    pub indicator_id: String,
    pub sigma2_between: f64,
    pub sigma2_within: f64,
    /// `None` when the total sum of squares is zero.
    pub eta2: Option<f64>,
    pub perm_p: Option<f64>,
    pub groups_used: usize,
    pub journals_used: usize,
    /// Variance-to-mean ratio per retained field; `None` for a zero mean or a
    /// single-journal field.
    pub dispersion_by_field: BTreeMap<String, Option<f64>>,
    pub excluded_fields: Vec<(String, usize)>,
}

fn moments(sample: &GroupedSample) -> (f64, f64, Option<f64>) {
    let (ssb, ssw, sst) = sample.sums_of_squares();
    let n = sample.n() as f64;
    let k = sample.k() as f64;
    let ms_between = ssb / (k - 1.0);
    let ms_within = if n > k { ssw / (n - k) } else { 0.0 };
    let sigma2_between = ((ms_between - ms_within) / sample.n0()).max(0.0);
    let eta2 = (sst > 0.0).then(|| ssb / sst);
    (sigma2_between, ms_within, eta2)
}

fn dispersion(sample: &GroupedSample) -> BTreeMap<String, Option<f64>> {
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); sample.k()];
    for (&v, &l) in sample.values.iter().zip(&sample.labels) {
        per[l].push(v);
    }
    sample
        .groups
        .iter()
        .zip(per)
        .map(|(g, vals)| {
            let m = mean(&vals);
            let d = if vals.len() < 2 || m == 0.0 {
                None
            } else {
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
                Some(var / m)
            };
            (g.clone(), d)
        })
        .collect()
}

/// Moment estimates of the between- and within-field variance components.
/// `perm_p` is left empty; see [`analyze`].
pub fn varcomp_moments(indicator_id: &str, values: &BTreeMap<String, f64>, scheme: &FieldScheme) -> Result<VarCompResult> {
    let sample = GroupedSample::new(values, scheme)?;
    let (sigma2_between, sigma2_within, eta2) = moments(&sample);
    Ok(VarCompResult {
        indicator_id: indicator_id.to_owned(),
        sigma2_between,
        sigma2_within,
        eta2,
        perm_p: None,
        groups_used: sample.k(),
        journals_used: sample.n(),
        dispersion_by_field: dispersion(&sample),
        excluded_fields: sample.excluded.clone(),
    })
}

/// Evaluates a statistic for arbitrary label vectors over one sample.
/// SS_total is invariant under relabelling, so only SS_between is recomputed.
struct PermutationKernel<'a> {
    centered: Vec<f64>,
    sizes: &'a [usize],
    sst: f64,
    n: f64,
    k: f64,
    n0: f64,
}

impl<'a> PermutationKernel<'a> {
    fn new(sample: &'a GroupedSample) -> Self {
        let m = sample.grand_mean();
        let centered: Vec<f64> = sample.values.iter().map(|v| v - m).collect();
        let sst = centered.iter().map(|c| c * c).sum();
        PermutationKernel {
            centered,
            sizes: &sample.sizes,
            sst,
            n: sample.n() as f64,
            k: sample.k() as f64,
            n0: sample.n0(),
        }
    }

    fn ss_between(&self, labels: &[usize], sums: &mut [f64]) -> f64 {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (&c, &l) in self.centered.iter().zip(labels) {
            sums[l] += c;
        }
        sums.iter().zip(self.sizes).map(|(s, &n)| s * s / n as f64).sum()
    }

    fn statistic(&self, stat: Statistic, labels: &[usize], sums: &mut [f64]) -> f64 {
        let ssb = self.ss_between(labels, sums);
        match stat {
            Statistic::Eta2 => ssb,
            Statistic::Sigma2Between => {
                let msb = ssb / (self.k - 1.0);
                let msw = if self.n > self.k { (self.sst - ssb) / (self.n - self.k) } else { 0.0 };
                ((msb - msw) / self.n0).max(0.0)
            }
        }
    }

    /// Slack for treating a permuted statistic as equal to the observed one.
    fn tolerance(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Eta2 => 1e-12 * self.sst,
            Statistic::Sigma2Between => 1e-12 * self.sst / self.n,
        }
    }
}

/// Add-one permutation p-value for the field effect: field labels are
/// shuffled uniformly, each permutation drawing from its own ChaCha stream
/// (`seed`, permutation index), so the result is independent of threading.
pub fn permutation_test(
    values: &BTreeMap<String, f64>,
    scheme: &FieldScheme,
    statistic: Statistic,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let sample = GroupedSample::new(values, scheme)?;
    permutation_p(&sample, statistic, n_perm, seed)
}

fn permutation_p(sample: &GroupedSample, statistic: Statistic, n_perm: usize, seed: u64) -> Result<f64> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_PERMUTATIONS} permutations required, got {n_perm}"
        )));
    }
    let kernel = PermutationKernel::new(sample);
    let mut sums = vec![0.0; sample.k()];
    let observed = kernel.statistic(statistic, &sample.labels, &mut sums);
    let threshold = observed - kernel.tolerance(statistic);
    let exceed = (0..n_perm as u64)
        .into_par_iter()
        .map_init(
            || (sample.labels.clone(), vec![0.0; sample.k()]),
            |(labels, sums), i| {
                labels.copy_from_slice(&sample.labels);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                labels.shuffle(&mut rng);
                kernel.statistic(statistic, labels, sums) >= threshold
            },
        )
        .filter(|&hit| hit)
        .count();
    Ok((1 + exceed) as f64 / (n_perm + 1) as f64)
}

/// Variance components plus the permutation p-value for one indicator.
pub fn analyze(
    table: &IndicatorTable,
    scheme: &FieldScheme,
    statistic: Statistic,
    n_perm: usize,
    seed: u64,
) -> Result<VarCompResult> {
    let sample = GroupedSample::new(&table.values, scheme)?;
    let (sigma2_between, sigma2_within, eta2) = moments(&sample);
    let perm_p = permutation_p(&sample, statistic, n_perm, seed)?;
    Ok(VarCompResult {
        indicator_id: table.indicator_id.clone(),
        sigma2_between,
        sigma2_within,
        eta2,
        perm_p: Some(perm_p),
        groups_used: sample.k(),
        journals_used: sample.n(),
        dispersion_by_field: dispersion(&sample),
        excluded_fields: sample.excluded,
    })
}

/// Relative reduction of the between-field component; negative when the
/// alternative is worse.
pub fn variance_reduction(reference: f64, alternative: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::Undefined("variance reduction against a zero reference component".into()));
    }
    Ok((reference - alternative) / reference)
}

pub fn write_varcomp_tsv<W: Write>(results: &[VarCompResult], mut w: W) -> Result<()> {
    let io = |e| Error::io("<varcomp output>", e);
    tsv::write_row(
        &mut w,
        &["indicator_id", "sigma2_between", "sigma2_within", "eta2", "perm_p", "groups_used"],
    )
    .map_err(io)?;
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "NA".into());
    for r in results {
        tsv::write_row(
            &mut w,
            &[
                r.indicator_id.clone(),
                format!("{:.9}", r.sigma2_between),
                format!("{:.9}", r.sigma2_within),
                opt(r.eta2, 9),
                opt(r.perm_p, 6),
                r.groups_used.to_string(),
            ],
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_dispersion_tsv<W: Write>(results: &[VarCompResult], mut w: W) -> Result<()> {
    let io = |e| Error::io("<dispersion output>", e);
    tsv::write_row(&mut w, &["indicator_id", "field", "var_over_mean"]).map_err(io)?;
    for r in results {
        for (field, d) in &r.dispersion_by_field {
            let d = d.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into());
            tsv::write_row(&mut w, &[r.indicator_id.as_str(), field, &d]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// One-sample KS distance between the empirical CDF of `values` and `cdf`.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS distance to a normal with the sample mean and standard deviation
/// (n - 1 denominator). A screen only: no p-value.
pub fn ks_normality(values: &[f64]) -> Result<f64> {
    if values.len() < 5 {
        return Err(Error::InvalidInput(format!("normality screen needs at least 5 values, got {}", values.len())));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0);
    if var <= 0.0 {
        return Err(Error::InvalidInput("normality screen of a constant sample".into()));
    }
    let normal = Normal::new(m, var.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(ks_statistic(values, |x| normal.cdf(x)))
}

/// Journals whose field is excluded or unknown under `scheme`.
pub fn excluded_journals(values: &BTreeMap<String, f64>, scheme: &FieldScheme) -> BTreeSet<String> {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for j in values.keys() {
        if let Some(f) = scheme.assignment.get(j) {
            *sizes.entry(f).or_insert(0) += 1;
        }
    }
    values
        .keys()
        .filter(|j| match scheme.assignment.get(*j) {
            Some(f) => sizes[f.as_str()] < scheme.min_group_size,
            None => true,
        })
        .cloned()
        .collect()
}

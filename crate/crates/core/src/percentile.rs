//! Percentile ranks (PR100) under the strict-below counting rule, the six
//! percentile-rank classes (PR6), and ranking helpers.
//!
//! A journal's percentile is `100 * |{values strictly below it}| / n`, so tied
//! values share a percentile and the top value never reaches 100.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::indicators::IndicatorTable;
use crate::tsv;

/// Lower bounds of classes 6 down to 2; anything below 50 is class 1.
pub const PR6_THRESHOLDS: [(f64, u8); 5] = [(99.0, 6), (95.0, 5), (90.0, 4), (75.0, 3), (50.0, 2)];

pub fn percentile_rank(values: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("percentile rank of an empty population".into()));
    }
    if let Some((j, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {v} for journal {j}")));
    }
    let mut sorted: Vec<f64> = values.values().copied().collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(values
        .iter()
        .map(|(j, &v)| {
            let below = sorted.partition_point(|&x| x < v);
            (j.clone(), 100.0 * below as f64 / n)
        })
        .collect())
}

pub fn pr6_class(percentile: f64) -> u8 {
    PR6_THRESHOLDS
        .iter()
        .find(|(lo, _)| percentile >= *lo)
        .map(|&(_, c)| c)
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileTable {
    pub source_indicator: String,
    pub pr100: BTreeMap<String, f64>,
    pub pr6: BTreeMap<String, u8>,
    pub n: usize,
}

impl PercentileTable {
    /// Rank the defined values of an indicator; undefined journals are not
    /// part of the population.
    pub fn from_indicator(table: &IndicatorTable) -> Result<PercentileTable> {
        let pr100 = percentile_rank(&table.values)?;
        let pr6 = pr100.iter().map(|(j, &p)| (j.clone(), pr6_class(p))).collect();
        Ok(PercentileTable {
            source_indicator: table.indicator_id.clone(),
            n: pr100.len(),
            pr100,
            pr6,
        })
    }

    pub fn mean_pr100(&self) -> f64 {
        self.pr100.values().sum::<f64>() / self.n as f64
    }

    pub fn mean_pr6(&self) -> f64 {
        self.pr6.values().map(|&c| f64::from(c)).sum::<f64>() / self.n as f64
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<percentile output>", e);
        tsv::write_row(&mut w, &["journal_id", "indicator_id", "pr100", "pr6"]).map_err(io)?;
        for (j, p) in &self.pr100 {
            tsv::write_row(
                &mut w,
                &[j.as_str(), &self.source_indicator, &format!("{p:.4}"), &self.pr6[j].to_string()],
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Journals at or above the percentile threshold.
pub fn top_share(pr100: &BTreeMap<String, f64>, threshold: f64) -> Vec<String> {
    pr100
        .iter()
        .filter(|(_, &p)| p >= threshold)
        .map(|(j, _)| j.clone())
        .collect()
}

/// The `k` highest values, descending, ties broken by journal id ascending.
/// Returns everything when `k` exceeds the population.
pub fn top_k(values: &BTreeMap<String, f64>, k: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = values.iter().map(|(j, &x)| (j.clone(), x)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

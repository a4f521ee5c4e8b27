//! Small helpers shared by every TSV reader and writer in the crate.
//!
//! All files are UTF-8 with LF line endings; lines starting with `#` and
//! blank lines are ignored on input.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Iterate over the meaningful lines of a reader as `(line_no, line)`.
pub(crate) fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) => {
                let l = l.strip_suffix('\r').map(str::to_owned).unwrap_or(l);
                if l.trim().is_empty() || l.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, l)))
                }
            }
            Err(e) => Some(Err(e)),
        })
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_row<W: Write, S: AsRef<str>>(w: &mut W, fields: &[S]) -> io::Result<()> {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            w.write_all(b"\t")?;
        }
        w.write_all(f.as_ref().as_bytes())?;
    }
    w.write_all(b"\n")
}

/// Check that `line` starts with the expected tab-separated column names.
pub(crate) fn expect_header(line: &str, expected: &[&str], exact: bool) -> Result<()> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    let ok = if exact {
        cols == expected
    } else {
        cols.len() >= expected.len() && cols[..expected.len()] == *expected
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Header(format!(
            "expected columns {:?}, found {:?}",
            expected.join("\t"),
            line
        )))
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

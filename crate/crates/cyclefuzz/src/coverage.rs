//! Coverage vectors and campaign-wide coverage bookkeeping.
//!
//! A run's feedback is a flat vector of per-coverpoint hit counts read
//! straight out of the DUT. The campaign accumulates those vectors into
//! [`CumulativeCoverage`], which knows which points have ever been hit and
//! how many retained corpus seeds cover each point.

use std::io::{self, Write};

use crate::{Error, Result};

/// Per-coverpoint hit counts from a single stimulus run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageVector {
    hits: Vec<u32>,
}

impl CoverageVector {
    pub fn new(hits: Vec<u32>) -> Self {
        CoverageVector { hits }
    }

    pub fn zeroed(len: usize) -> Self {
        CoverageVector { hits: vec![0; len] }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    pub fn covers(&self, point: usize) -> bool {
        self.hits[point] > 0
    }

    /// Indices of the points this run hit at least once.
    pub fn covered_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.hits
            .iter()
            .enumerate()
            .filter(|(_, &h)| h > 0)
            .map(|(i, _)| i)
    }

    /// Fraction of points hit by this run alone. Zero-length vectors rate 0.
    pub fn covered_fraction(&self) -> f64 {
        if self.hits.is_empty() {
            return 0.0;
        }
        let covered = self.hits.iter().filter(|&&h| h > 0).count();
        covered as f64 / self.hits.len() as f64
    }
}

/// Points a run hit that the campaign had never hit before, in index order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NewCoverageReport {
    new_points: Vec<usize>,
}

impl NewCoverageReport {
    pub fn is_empty(&self) -> bool {
        self.new_points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.new_points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.new_points
    }
}

/// Accumulated coverage across every run of a campaign.
#[derive(Clone, Debug)]
pub struct CumulativeCoverage {
    hit_totals: Vec<u64>,
    covering_seed_counts: Vec<u32>,
    covered_count: usize,
}

impl CumulativeCoverage {
    pub fn new(coverpoints: usize) -> Result<Self> {
        if coverpoints == 0 {
            return Err(Error::ZeroCoverpoints);
        }
        Ok(CumulativeCoverage {
            hit_totals: vec![0; coverpoints],
            covering_seed_counts: vec![0; coverpoints],
            covered_count: 0,
        })
    }

    pub fn coverpoints(&self) -> usize {
        self.hit_totals.len()
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    pub fn hit_totals(&self) -> &[u64] {
        &self.hit_totals
    }

    pub fn covering_seed_counts(&self) -> &[u32] {
        &self.covering_seed_counts
    }

    /// Folds one run into the totals and reports the points it hit first.
    ///
    /// Totals saturate instead of wrapping; the covering-seed counts are not
    /// touched here because they track retained seeds, not runs.
    pub fn observe(&mut self, run: &CoverageVector) -> Result<NewCoverageReport> {
        if run.len() != self.hit_totals.len() {
            return Err(Error::CoverageLength {
                expected: self.hit_totals.len(),
                actual: run.len(),
            });
        }
        let mut new_points = Vec::new();
        for (i, &h) in run.hits().iter().enumerate() {
            if h == 0 {
                continue;
            }
            if self.hit_totals[i] == 0 {
                new_points.push(i);
            }
            self.hit_totals[i] = self.hit_totals[i].saturating_add(u64::from(h));
        }
        self.covered_count += new_points.len();
        Ok(NewCoverageReport { new_points })
    }

    /// Observes a batch of runs in order, as if each were observed alone.
    pub fn merge_batch(&mut self, runs: &[CoverageVector]) -> Result<Vec<NewCoverageReport>> {
        runs.iter().map(|r| self.observe(r)).collect()
    }

    /// Fraction of coverpoints hit at least once so far.
    pub fn coverage_rate(&self) -> f64 {
        self.covered_count as f64 / self.hit_totals.len() as f64
    }

    /// Records that one more retained seed covers `point`; returns the new
    /// count. Called by the corpus when it retains a seed.
    pub(crate) fn note_covering_seed(&mut self, point: usize) -> u32 {
        self.covering_seed_counts[point] += 1;
        self.covering_seed_counts[point]
    }

    /// Writes the snapshot table: a summary line, then one row per point.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "coverpoints={} covered={}",
            self.hit_totals.len(),
            self.covered_count
        )?;
        for (i, (&total, &seeds)) in self
            .hit_totals
            .iter()
            .zip(&self.covering_seed_counts)
            .enumerate()
        {
            writeln!(w, "{i}\t{total}\t{seeds}")?;
        }
        Ok(())
    }
}

/// A parsed coverage snapshot file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageSnapshot {
    pub hit_totals: Vec<u64>,
    pub covering_seed_counts: Vec<u32>,
    pub covered: usize,
}

/// Reads back a [`CumulativeCoverage::write_snapshot`] table. Strict: the
/// summary line must agree with the rows and every point must be present
/// in order.
pub fn parse_snapshot(text: &str, file: &std::path::Path) -> Result<CoverageSnapshot> {
    let fail = |reason: String| Error::Report {
        file: file.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fail("empty file".into()))?;
    let (points_part, covered_part) = header
        .split_once(' ')
        .ok_or_else(|| fail(format!("bad summary line '{header}'")))?;
    let coverpoints: usize = points_part
        .strip_prefix("coverpoints=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fail(format!("bad summary line '{header}'")))?;
    let covered: usize = covered_part
        .strip_prefix("covered=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fail(format!("bad summary line '{header}'")))?;
    let mut hit_totals = Vec::with_capacity(coverpoints);
    let mut covering_seed_counts = Vec::with_capacity(coverpoints);
    for (row, line) in lines.enumerate() {
        let mut cols = line.split('\t');
        let parsed = (|| {
            let index: usize = cols.next()?.parse().ok()?;
            let total: u64 = cols.next()?.parse().ok()?;
            let seeds: u32 = cols.next()?.parse().ok()?;
            if cols.next().is_some() || index != row {
                return None;
            }
            Some((total, seeds))
        })();
        let (total, seeds) = parsed.ok_or_else(|| fail(format!("bad row {row}: '{line}'")))?;
        hit_totals.push(total);
        covering_seed_counts.push(seeds);
    }
    if hit_totals.len() != coverpoints {
        return Err(fail(format!(
            "summary says {coverpoints} points, found {}",
            hit_totals.len()
        )));
    }
    let recount = hit_totals.iter().filter(|&&t| t > 0).count();
    if recount != covered {
        return Err(fail(format!(
            "summary says {covered} covered, rows say {recount}"
        )));
    }
    Ok(CoverageSnapshot {
        hit_totals,
        covering_seed_counts,
        covered,
    })
}

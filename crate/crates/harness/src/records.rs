//! Trial records, their aggregates and histograms, and CSV input/output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// One `(agent, instance, trial, budget)` episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub agent: String,
    pub instance: u32,
    pub trial: u32,
    pub budget: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub steps: usize,
    /// Mean tree size per search; 0 for baselines.
    pub tree_nodes: f64,
    pub wall_ms: f64,
}

/// A cell that failed; it has no [`TrialRecord`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub agent: String,
    pub instance: u32,
    pub trial: u32,
    pub budget: usize,
    pub error: String,
}

/// Statistics of one `(agent, budget)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub agent: String,
    pub budget: usize,
    pub mean_return: f64,
    /// Standard error of the mean; absent with fewer than two records.
    pub sem: Option<f64>,
    pub mean_nodes: f64,
    pub n: usize,
}

impl Aggregate {
    /// `mean ± sem` as an interval; a missing SEM counts as zero width.
    pub fn interval(&self) -> (f64, f64) {
        let e = self.sem.unwrap_or(0.0);
        (self.mean_return - e, self.mean_return + e)
    }

    /// Whether this cell's ±1 SEM interval lies entirely above `other`'s.
    pub fn beats(&self, other: &Aggregate) -> bool {
        self.interval().0 > other.interval().1
    }
}

/// Sorts records into the canonical `(agent, instance, trial, budget)` order.
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| (&a.agent, a.instance, a.trial, a.budget).cmp(&(&b.agent, b.instance, b.trial, b.budget)));
}

/// Mean, SEM (`s / √n` with the sample standard deviation) and node mean per
/// `(agent, budget)`, ordered by agent then budget.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(&str, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((&r.agent, r.budget)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((agent, budget), rs)| {
            let n = rs.len();
            let (mean, sem) = mean_sem(rs.iter().map(|r| r.ret));
            Aggregate {
                agent: agent.to_string(),
                budget,
                mean_return: mean,
                sem,
                mean_nodes: rs.iter().map(|r| r.tree_nodes).sum::<f64>() / n as f64,
                n,
            }
        })
        .collect()
}

/// Sample mean and standard error; the latter needs two values.
pub fn mean_sem(values: impl IntoIterator<Item = f64>) -> (f64, Option<f64>) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Looks up the aggregate of `agent` at `budget`.
pub fn find<'a>(aggregates: &'a [Aggregate], agent: &str, budget: usize) -> Option<&'a Aggregate> {
    aggregates.iter().find(|a| a.agent == agent && a.budget == budget)
}

/// Normalized-score histogram of one agent between Random and Optimal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
    /// Cells where Optimal did not beat Random.
    pub skipped: usize,
    /// Cells whose score fell outside `[0, 1]` and went to an end bin.
    pub clipped: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Index of the fullest bin, lowest on ties.
    pub fn mode(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        (max > 0).then(|| self.counts.iter().position(|&c| c == max).unwrap())
    }

    pub fn rows(&self) -> Vec<HistogramRow> {
        let bins = self.counts.len();
        let total = self.total().max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramRow {
                bin: i,
                lower: i as f64 / bins as f64,
                upper: (i + 1) as f64 / bins as f64,
                count,
                frequency: count as f64 / total,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub frequency: f64,
}

/// Bins `(agent − Random) / (Optimal − Random)` over the cells all three
/// agents share. Scores outside `[0, 1]` land in the end bins.
pub fn histogram(records: &[TrialRecord], agent: &str, random: &str, optimal: &str, bins: usize) -> Histogram {
    assert!(bins > 0, "histogram needs at least one bin");
    type Key = (u32, u32, usize);
    let by = |name: &str| -> BTreeMap<Key, f64> {
        records
            .iter()
            .filter(|r| r.agent == name)
            .map(|r| ((r.instance, r.trial, r.budget), r.ret))
            .collect()
    };
    let (h, rnd, opt) = (by(agent), by(random), by(optimal));
    let mut out = Histogram {
        counts: vec![0; bins],
        skipped: 0,
        clipped: 0,
    };
    for (key, &x) in &h {
        let (Some(&r), Some(&o)) = (rnd.get(key), opt.get(key)) else {
            continue;
        };
        if o <= r {
            out.skipped += 1;
            continue;
        }
        let score = (x - r) / (o - r);
        if !(0.0..=1.0).contains(&score) {
            out.clipped += 1;
        }
        let bin = ((score.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        out.counts[bin] += 1;
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    // Written by hand so an empty file still carries the header.
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::io(path, source))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err)
}

pub const RECORD_HEADER: [&str; 8] = ["agent", "instance", "trial", "budget", "return", "steps", "tree_nodes", "wall_ms"];
pub const ERROR_HEADER: [&str; 5] = ["agent", "instance", "trial", "budget", "error"];
pub const AGGREGATE_HEADER: [&str; 6] = ["agent", "budget", "mean_return", "sem", "mean_nodes", "n"];
pub const HISTOGRAM_HEADER: [&str; 5] = ["bin", "lower", "upper", "count", "frequency"];

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<(), HarnessError> {
    write_csv(path, records, &RECORD_HEADER)
}

pub fn write_errors(path: &Path, errors: &[ErrorRecord]) -> Result<(), HarnessError> {
    write_csv(path, errors, &ERROR_HEADER)
}

pub fn write_aggregates(path: &Path, aggregates: &[Aggregate]) -> Result<(), HarnessError> {
    write_csv(path, aggregates, &AGGREGATE_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(agent: &str, instance: u32, budget: usize, ret: f64, nodes: f64) -> TrialRecord {
        TrialRecord {
            agent: agent.into(),
            instance,
            trial: 0,
            budget,
            ret,
            steps: 1,
            tree_nodes: nodes,
            wall_ms: 0.5,
        }
    }

    #[test]
    fn mean_and_standard_error() {
        let a = aggregate(&[rec("A", 0, 10, 4.0, 2.0), rec("A", 1, 10, 6.0, 4.0)]);
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].mean_return, a[0].sem, a[0].mean_nodes, a[0].n), (5.0, Some(1.0), 3.0, 2));
        let same = aggregate(&[rec("A", 0, 10, 3.0, 0.0), rec("A", 1, 10, 3.0, 0.0), rec("A", 2, 10, 3.0, 0.0)]);
        assert_eq!(same[0].sem, Some(0.0));
        let single = aggregate(&[rec("A", 0, 10, 3.0, 0.0)]);
        assert_eq!(single[0].sem, None);
    }

    #[test]
    fn histogram_extremes() {
        let mut rs = Vec::new();
        for i in 0..20 {
            rs.push(rec("Random", i, 1, -100.0 - i as f64, 0.0));
            rs.push(rec("Optimal", i, 1, -10.0, 0.0));
            rs.push(rec("Opt", i, 1, -10.0, 0.0));
            rs.push(rec("Rnd", i, 1, -100.0 - i as f64, 0.0));
        }
        let top = histogram(&rs, "Opt", "Random", "Optimal", 10);
        assert_eq!(top.counts[9], 20);
        assert_eq!(top.total(), 20);
        let bottom = histogram(&rs, "Rnd", "Random", "Optimal", 10);
        assert_eq!(bottom.counts[0], 20);
        assert_eq!(bottom.mode(), Some(0));
        // Worse than Random goes to the bottom bin; degenerate cells are skipped.
        rs.push(rec("Random", 99, 1, -5.0, 0.0));
        rs.push(rec("Optimal", 99, 1, -5.0, 0.0));
        rs.push(rec("Opt", 99, 1, -1.0, 0.0));
        rs.push(rec("Worse", 0, 1, -500.0, 0.0));
        assert_eq!(histogram(&rs, "Opt", "Random", "Optimal", 10).skipped, 1);
        let worse = histogram(&rs, "Worse", "Random", "Optimal", 10);
        assert_eq!((worse.counts[0], worse.clipped), (1, 1));
    }
}

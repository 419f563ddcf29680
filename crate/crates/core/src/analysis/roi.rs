use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fmt, Provenance, StudyReport};
use crate::error::{Error, Result};
use crate::matcher::ParameterMaps;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiStat {
    pub label: i64,
    /// Finite values contributing to the median.
    pub count: usize,
    /// NaN when the region has no finite values.
    pub median: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of `values` within each label, ignoring NaN. Sorted by label.
pub fn roi_stats(values: &[f64], labels: &[i64]) -> Result<Vec<RoiStat>> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), actual: values.len() });
    }
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (&v, &l) in values.iter().zip(labels) {
        let g = groups.entry(l).or_default();
        if !v.is_nan() {
            g.push(v);
        }
    }
    Ok(groups.into_iter().map(|(label, g)| RoiStat { label, count: g.len(), median: median(g) }).collect())
}

/// Per-label medians of the chosen map channels.
pub fn roi_table(maps: &ParameterMaps, labels: &[i64], channels: &[&str], provenance: Provenance) -> Result<StudyReport> {
    let mut per_channel = Vec::with_capacity(channels.len());
    for &c in channels {
        let values = maps.channel(c).ok_or_else(|| Error::Config(format!("unknown map channel '{c}'")))?;
        per_channel.push(roi_stats(&values, labels)?);
    }
    let mut columns = vec!["label".to_string(), "voxels".to_string()];
    columns.extend(channels.iter().map(|c| format!("median_{c}")));
    let n_labels = per_channel.first().map_or(0, Vec::len);
    let rows = (0..n_labels)
        .map(|i| {
            let first = &per_channel[0][i];
            let voxels = labels.iter().filter(|&&l| l == first.label).count();
            let mut r = vec![first.label.to_string(), voxels.to_string()];
            r.extend(per_channel.iter().map(|s| fmt(s[i].median)));
            r
        })
        .collect();
    Ok(StudyReport { study: "roi".into(), columns, rows, summary: BTreeMap::new(), provenance })
}

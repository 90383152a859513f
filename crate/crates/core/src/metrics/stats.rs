use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::ShapeRecord;

pub const IOU_THRESHOLD: f64 = 0.10;
pub const RATIO_THRESHOLD: f64 = 3.0;
/// Upper edge of the ratio histogram; larger ratios land in the last bin.
pub const RATIO_HISTOGRAM_MAX: f64 = 10.0;

/// Equal-width bins over `[edges[0], edges[last]]`. Bin `i` is
/// `[edges[i], edges[i+1])`; the last bin also takes its upper edge and
/// everything clamped into it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Histogram {
            edges,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        let i = ((v - lo) / (hi - lo) * bins as f64).floor();
        let i = if i.is_nan() {
            0
        } else {
            i.clamp(0.0, (bins - 1) as f64) as usize
        };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sample_count: usize,
    /// Mean part-IoU over `[0, 1]`.
    pub mean_part_iou: Histogram,
    /// Largest-to-rest volume ratio over `[0, 10]`.
    pub largest_rest_ratio: Histogram,
    /// Records whose ratio is undefined (fewer than two parts).
    pub ratio_undefined: usize,
    /// Part count to number of records.
    pub part_count: BTreeMap<usize, usize>,
    pub iou_threshold: f64,
    pub ratio_threshold: f64,
    /// Fraction of records with mean part-IoU strictly above the threshold.
    pub iou_above_threshold: f64,
    /// Fraction of records with a defined ratio strictly above the threshold.
    pub ratio_above_threshold: f64,
}

pub fn dataset_stats(records: &[ShapeRecord], bins: usize) -> Result<StatsReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("records"));
    }
    if bins == 0 {
        return Err(Error::Invalid("histograms need at least one bin".into()));
    }
    let mut iou = Histogram::uniform(0.0, 1.0, bins);
    let mut ratio = Histogram::uniform(0.0, RATIO_HISTOGRAM_MAX, bins);
    let mut part_count = BTreeMap::new();
    let (mut undefined, mut iou_above, mut ratio_above) = (0, 0, 0);
    for r in records {
        let s = &r.stats;
        iou.add(s.mean_part_iou);
        if s.mean_part_iou > IOU_THRESHOLD {
            iou_above += 1;
        }
        match s.largest_rest_ratio {
            Some(v) => {
                ratio.add(v);
                if v > RATIO_THRESHOLD {
                    ratio_above += 1;
                }
            }
            None => undefined += 1,
        }
        *part_count.entry(s.part_count).or_insert(0) += 1;
    }
    let n = records.len();
    Ok(StatsReport {
        sample_count: n,
        mean_part_iou: iou,
        largest_rest_ratio: ratio,
        ratio_undefined: undefined,
        part_count,
        iou_threshold: IOU_THRESHOLD,
        ratio_threshold: RATIO_THRESHOLD,
        iou_above_threshold: iou_above as f64 / n as f64,
        ratio_above_threshold: ratio_above as f64 / n as f64,
    })
}

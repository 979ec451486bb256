//! Dataset statistics per grid size, with CSV and SVG heatmap export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cogmap::CotVariant;
use crate::dataset::DatasetRecord;
use crate::generate::Split;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("records mix schemas: {expected} vs {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Complexity,
    InstructionChars,
    ThoughtChars,
    PlanChars,
    InstructionWords,
    ThoughtWords,
    PlanWords,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Complexity,
        Metric::InstructionChars,
        Metric::ThoughtChars,
        Metric::PlanChars,
        Metric::InstructionWords,
        Metric::ThoughtWords,
        Metric::PlanWords,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Complexity => "complexity",
            Metric::InstructionChars => "instruction_chars",
            Metric::ThoughtChars => "thought_chars",
            Metric::PlanChars => "plan_chars",
            Metric::InstructionWords => "instruction_words",
            Metric::ThoughtWords => "thought_words",
            Metric::PlanWords => "plan_words",
        }
    }

    fn index(self) -> usize {
        Metric::ALL.iter().position(|m| *m == self).expect("listed")
    }
}

impl FromStr for Metric {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StatsError::UnknownMetric(s.to_string()))
    }
}

/// Count, compensated sum, min and max of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    count: u64,
    sum: f64,
    compensation: f64,
    min: f64,
    max: f64,
}

impl Default for Aggregate {
    fn default() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            compensation: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Aggregate {
    fn add_term(&mut self, v: f64) {
        // Neumaier summation.
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.add_term(v);
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn merge(&mut self, other: &Aggregate) {
        self.count += other.count;
        self.add_term(other.sum);
        self.add_term(other.compensation);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total() / self.count as f64)
    }

    pub fn min(&self) -> Option<f64> {
        (self.count > 0).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }
}

impl Serialize for Aggregate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Aggregate", 4)?;
        s.serialize_field("count", &self.count)?;
        s.serialize_field("mean", &self.mean())?;
        s.serialize_field("min", &self.min())?;
        s.serialize_field("max", &self.max())?;
        s.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellStats {
    metrics: [Aggregate; 7],
}

impl CellStats {
    pub fn count(&self) -> u64 {
        self.metrics[0].count
    }

    pub fn metric(&self, m: Metric) -> &Aggregate {
        &self.metrics[m.index()]
    }

    fn push(&mut self, values: [f64; 7]) {
        for (agg, v) in self.metrics.iter_mut().zip(values) {
            agg.push(v);
        }
    }

    fn merge(&mut self, other: &CellStats) {
        for (agg, o) in self.metrics.iter_mut().zip(&other.metrics) {
            agg.merge(o);
        }
    }
}

impl Serialize for CellStats {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CellStats", 8)?;
        s.serialize_field("count", &self.count())?;
        for m in Metric::ALL {
            s.serialize_field(m.name(), self.metric(m))?;
        }
        s.end()
    }
}

/// Split and variant shared by every record of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub split: Split,
    pub variant: CotVariant,
}

impl std::fmt::Display for Schema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.split, self.variant)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsReport {
    pub schema: Option<Schema>,
    pub cells: BTreeMap<(i32, i32), CellStats>,
    pub global: CellStats,
}

fn words(text: &str) -> f64 {
    text.split_whitespace().count() as f64
}

impl StatsReport {
    pub fn count(&self) -> u64 {
        self.global.count()
    }

    pub fn push(&mut self, record: &DatasetRecord) -> Result<(), StatsError> {
        self.check_schema(Schema {
            split: record.split,
            variant: record.variant,
        })?;
        let l = &record.lengths;
        let values = [
            record.complexity.value(),
            l.instruction_chars as f64,
            l.thought_chars as f64,
            l.plan_chars as f64,
            words(&record.instruction_text()),
            words(record.thought_text()),
            words(record.plan_text()),
        ];
        self.cells
            .entry((record.spec.size_x, record.spec.size_y))
            .or_default()
            .push(values);
        self.global.push(values);
        Ok(())
    }

    fn check_schema(&mut self, found: Schema) -> Result<(), StatsError> {
        match self.schema {
            None => {
                self.schema = Some(found);
                Ok(())
            }
            Some(expected) if expected == found => Ok(()),
            Some(expected) => Err(StatsError::SchemaMismatch {
                expected: expected.to_string(),
                found: found.to_string(),
            }),
        }
    }

    /// Associative merge of two shard reports.
    pub fn merge(&mut self, other: &StatsReport) -> Result<(), StatsError> {
        if let Some(s) = other.schema {
            self.check_schema(s)?;
        }
        for (k, cell) in &other.cells {
            self.cells.entry(*k).or_default().merge(cell);
        }
        self.global.merge(&other.global);
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        #[derive(Serialize)]
        struct Cell<'a> {
            size_x: i32,
            size_y: i32,
            #[serde(flatten)]
            stats: &'a CellStats,
        }
        #[derive(Serialize)]
        struct View<'a> {
            schema: Option<Schema>,
            global: &'a CellStats,
            cells: Vec<Cell<'a>>,
        }
        let view = View {
            schema: self.schema,
            global: &self.global,
            cells: self
                .cells
                .iter()
                .map(|(&(size_x, size_y), stats)| Cell {
                    size_x,
                    size_y,
                    stats,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&view).expect("stats serialization is infallible")
    }
}

/// Streaming aggregation over records.
pub fn dataset_stats<'a>(
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> Result<StatsReport, StatsError> {
    let mut report = StatsReport::default();
    for r in records {
        report.push(r)?;
    }
    Ok(report)
}

const SIZE_LO: i32 = 2;
const SIZE_HI: i32 = 20;
const TRAIN_BOX: (i32, i32) = (2, 10);

fn size_range(report: &StatsReport) -> (i32, i32) {
    let hi = report
        .cells
        .keys()
        .map(|&(x, y)| x.max(y))
        .max()
        .unwrap_or(SIZE_HI)
        .max(SIZE_HI);
    let lo = report
        .cells
        .keys()
        .map(|&(x, y)| x.min(y))
        .min()
        .unwrap_or(SIZE_LO)
        .min(SIZE_LO);
    (lo, hi)
}

fn mean_at(report: &StatsReport, metric: Metric, x: i32, y: i32) -> Option<f64> {
    report
        .cells
        .get(&(x, y))
        .and_then(|c| c.metric(metric).mean())
}

/// CSV matrix of per-size means: rows are `size_y`, columns `size_x`, blank when unpopulated.
pub fn heatmap_csv(report: &StatsReport, metric: Metric) -> String {
    let (lo, hi) = size_range(report);
    let mut out = String::from("size_y\\size_x");
    for x in lo..=hi {
        write!(out, ",{x}").unwrap();
    }
    out.push('\n');
    for y in lo..=hi {
        write!(out, "{y}").unwrap();
        for x in lo..=hi {
            out.push(',');
            if let Some(v) = mean_at(report, metric, x, y) {
                write!(out, "{v:.4}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Standalone SVG heatmap; darker cells have larger means. The red rectangle
/// marks the training-size region.
pub fn heatmap_svg(report: &StatsReport, metric: Metric) -> String {
    const CELL: i32 = 24;
    const MARGIN: i32 = 48;
    let (lo, hi) = size_range(report);
    let n = hi - lo + 1;
    let side = n * CELL;
    let values: Vec<f64> = report
        .cells
        .values()
        .filter_map(|c| c.metric(metric).mean())
        .collect();
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let col = |x: i32| MARGIN + (x - lo) * CELL;
    // size_y grows upwards.
    let row = |y: i32| MARGIN + (hi - y) * CELL;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#,
        w = side + 2 * MARGIN,
        h = side + 2 * MARGIN
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="14">{}</text>"#,
        MARGIN,
        metric.name()
    )
    .unwrap();
    for y in lo..=hi {
        for x in lo..=hi {
            let Some(v) = mean_at(report, metric, x, y) else {
                continue;
            };
            let t = if vmax > vmin {
                (v - vmin) / (vmax - vmin)
            } else {
                1.0
            };
            let shade = (235.0 - 215.0 * t).round() as u8;
            writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{shade:02x}{shade:02x}{shade:02x}"><title>{x}x{y}: {v:.4}</title></rect>"##,
                col(x),
                row(y)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{y}</text>"#,
            MARGIN - 4,
            row(y) + CELL / 2 + 4
        )
        .unwrap();
    }
    for x in lo..=hi {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#,
            col(x) + CELL / 2,
            MARGIN + side + 14
        )
        .unwrap();
    }
    let (b0, b1) = TRAIN_BOX;
    writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="red" stroke-width="2"/>"#,
        col(b0),
        row(b1),
        (b1 - b0 + 1) * CELL,
        (b1 - b0 + 1) * CELL
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<metric>.csv` and `<metric>.svg` into `dir`.
pub fn export_heatmap(
    report: &StatsReport,
    metric: Metric,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), StatsError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StatsError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join(format!("{}.csv", metric.name()));
    let svg = dir.join(format!("{}.svg", metric.name()));
    fs::write(&csv, heatmap_csv(report, metric)).map_err(io(&csv))?;
    fs::write(&svg, heatmap_svg(report, metric)).map_err(io(&svg))?;
    Ok((csv, svg))
}

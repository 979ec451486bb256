//! JSONL dataset generation and verification.
//!
//! Record `i` of a split is a pure function of `(seed, split, i)`; every
//! variant of the same index shares one environment.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cogmap::{serialize_plan, serialize_target, CotVariant, Fidelity, Verbosity};
use crate::complexity::{complexity, ComplexityValue};
use crate::exec::Exec;
use crate::generate::{generate_indexed, GenError, GenParams, Split};
use crate::grid::GridSpec;
use crate::stats::{dataset_stats, StatsError, StatsReport};
use crate::text::{render_instruction, PromptText};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lengths {
    pub instruction_chars: usize,
    pub thought_chars: usize,
    pub plan_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub index: u64,
    pub split: Split,
    pub variant: CotVariant,
    pub spec: GridSpec,
    /// Instruction turns followed by the target output turn.
    pub conversation: Vec<PromptText>,
    pub complexity: ComplexityValue,
    pub lengths: Lengths,
}

fn lengths_of(instruction: &[PromptText], thought: &str, plan: &str) -> Lengths {
    Lengths {
        instruction_chars: instruction.iter().map(|t| t.text.chars().count()).sum(),
        thought_chars: thought.chars().count(),
        plan_chars: plan.chars().count(),
    }
}

impl DatasetRecord {
    pub fn instruction(&self) -> &[PromptText] {
        &self.conversation[..self.conversation.len().saturating_sub(1)]
    }

    pub fn instruction_text(&self) -> String {
        self.instruction()
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn target(&self) -> &str {
        self.conversation.last().map_or("", |t| t.text.as_str())
    }

    /// The plan is the last `plan_chars` characters of the target.
    pub fn plan_text(&self) -> &str {
        let t = self.target();
        t.len()
            .checked_sub(self.lengths.plan_chars)
            .and_then(|i| t.get(i..))
            .unwrap_or("")
    }

    pub fn thought_text(&self) -> &str {
        let t = self.target();
        t.get(..self.lengths.thought_chars).unwrap_or("")
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

/// Record for an already-built environment.
pub fn record_for_spec(
    spec: GridSpec,
    split: Split,
    variant: CotVariant,
    index: u64,
) -> DatasetRecord {
    record_with_fidelity(spec, split, variant, index, Fidelity::Uniform)
}

fn record_with_fidelity(
    spec: GridSpec,
    split: Split,
    variant: CotVariant,
    index: u64,
    fidelity: Fidelity,
) -> DatasetRecord {
    let instruction = render_instruction(&spec);
    let target = serialize_target(&spec, variant, fidelity);
    let plan = serialize_plan(&spec);
    let thought = if variant.verbosity == Verbosity::None {
        ""
    } else {
        &target[..target.len() - plan.len() - 1]
    };
    let lengths = lengths_of(&instruction, thought, &plan);
    let mut conversation = instruction;
    conversation.push(PromptText::gpt(target.clone()));
    DatasetRecord {
        index,
        split,
        variant,
        complexity: complexity(&spec),
        spec,
        conversation,
        lengths,
    }
}

pub fn build_record(
    params: &GenParams,
    split: Split,
    variant: CotVariant,
    index: u64,
) -> Result<DatasetRecord, GenError> {
    let spec = generate_indexed(params, split, index)?;
    Ok(record_for_spec(spec, split, variant, index))
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub split: Split,
    pub variant: CotVariant,
    pub count: u64,
    pub params: GenParams,
    pub shards: usize,
    pub fidelity: Fidelity,
}

impl DatasetConfig {
    pub fn new(split: Split, variant: CotVariant, count: u64, seed: u64) -> Self {
        Self {
            split,
            variant,
            count,
            params: GenParams::for_split(split, seed),
            shards: 1,
            fidelity: Fidelity::Uniform,
        }
    }

    pub fn stem(&self) -> String {
        format!("{}-{}", self.split, self.variant)
    }

    pub fn shard_path(&self, dir: &Path, shard: usize) -> PathBuf {
        dir.join(format!("{}-{shard:05}.jsonl", self.stem()))
    }

    pub fn stats_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.stats.json", self.stem()))
    }

    /// Index range of `shard`: contiguous, sizes differ by at most one.
    pub fn shard_range(&self, shard: usize) -> std::ops::Range<u64> {
        let n = self.shards as u64;
        let s = shard as u64;
        (self.count * s / n)..(self.count * (s + 1) / n)
    }
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub stats_file: PathBuf,
    pub report: StatsReport,
}

pub fn generate_dataset(
    config: &DatasetConfig,
    out: &Path,
    exec: Exec,
) -> Result<GenerateSummary, DatasetError> {
    if config.shards == 0 {
        return Err(DatasetError::InvalidConfig(
            "shards must be at least 1".into(),
        ));
    }
    config.params.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut report = StatsReport::default();
    let mut files = Vec::with_capacity(config.shards);
    for shard in 0..config.shards {
        let range = config.shard_range(shard);
        let start = range.start;
        let records: Vec<Result<DatasetRecord, GenError>> =
            exec.map_range((range.end - start) as usize, |k| {
                let index = start + k as u64;
                let spec = generate_indexed(&config.params, config.split, index)?;
                Ok(record_with_fidelity(
                    spec,
                    config.split,
                    config.variant,
                    index,
                    config.fidelity,
                ))
            });
        let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
        report.merge(&dataset_stats(&records)?)?;

        let path = config.shard_path(out, shard);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for r in &records {
            writeln!(w, "{}", r.to_json_line()).map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        files.push(path);
    }
    let stats_file = config.stats_path(out);
    fs::write(&stats_file, report.to_json_pretty()).map_err(io_err(&stats_file))?;
    Ok(GenerateSummary {
        files,
        stats_file,
        report,
    })
}

/// All `.jsonl` files directly inside `dir`, sorted by name; a file path is returned as is.
pub fn dataset_files(path: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// One raw line of a dataset file.
#[derive(Debug, Clone)]
pub struct RawLine {
    pub file: PathBuf,
    pub line: usize,
    pub text: String,
}

pub fn read_lines(files: &[PathBuf]) -> Result<Vec<RawLine>, DatasetError> {
    let mut out = Vec::new();
    for file in files {
        let content = fs::read_to_string(file).map_err(io_err(file))?;
        out.extend(
            content
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| RawLine {
                    file: file.clone(),
                    line: i + 1,
                    text: l.to_string(),
                }),
        );
    }
    Ok(out)
}

pub fn read_records(files: &[PathBuf]) -> Result<Vec<DatasetRecord>, DatasetError> {
    read_lines(files)?
        .into_iter()
        .map(|l| {
            serde_json::from_str(&l.text).map_err(|e| {
                DatasetError::InvalidConfig(format!("{}:{}: {e}", l.file.display(), l.line))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub file: PathBuf,
    pub line: usize,
    pub index: Option<u64>,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub files: usize,
    pub records: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every invariant violated by one record; empty when the record is sound.
pub fn check_record(record: &DatasetRecord) -> Vec<String> {
    let spec = &record.spec;
    if let Err(e) = spec.validate() {
        return vec![format!("unique-path: {e}")];
    }
    let mut problems = Vec::new();
    if record.instruction() != render_instruction(spec).as_slice() {
        problems.push("instruction: prompt turns differ from the rendered instruction".to_string());
    }
    let fidelity = [Fidelity::Uniform, Fidelity::Strict]
        .into_iter()
        .find(|&f| serialize_target(spec, record.variant, f) == record.target());
    if fidelity.is_none() {
        problems.push(format!(
            "target: output differs from the {} serialization",
            record.variant
        ));
    }
    let expected = complexity(spec).value();
    if (record.complexity.value() - expected).abs() > 1e-9 {
        problems.push(format!(
            "complexity: stored {} != recomputed {expected}",
            record.complexity.value()
        ));
    }
    let reference = record_with_fidelity(
        spec.clone(),
        record.split,
        record.variant,
        record.index,
        fidelity.unwrap_or_default(),
    );
    if record.lengths != reference.lengths {
        problems.push(format!(
            "lengths: stored {:?} != recomputed {:?}",
            record.lengths, reference.lengths
        ));
    }
    problems
}

pub fn verify_dataset(files: &[PathBuf], exec: Exec) -> Result<VerifyReport, DatasetError> {
    let lines = read_lines(files)?;
    let results = exec.map_slice(&lines, |raw| {
        let (index, problems) = match serde_json::from_str::<DatasetRecord>(&raw.text) {
            Ok(r) => (Some(r.index), check_record(&r)),
            Err(e) => (None, vec![format!("parse: {e}")]),
        };
        (!problems.is_empty()).then(|| Violation {
            file: raw.file.clone(),
            line: raw.line,
            index,
            problems,
        })
    });
    Ok(VerifyReport {
        files: files.len(),
        records: lines.len(),
        violations: results.into_iter().flatten().collect(),
    })
}

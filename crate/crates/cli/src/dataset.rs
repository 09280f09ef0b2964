//! On-disk datasets.
//!
//! ```text
//! DIR/manifest.json
//! DIR/{train,test}/streams/sample_00000.jsonl
//! DIR/{train,test}/partitions/sample_00000.json
//! DIR/{train,test}/targets.jsonl
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use streamsig::datagen::{self, Regime, SinusoidParams};
use streamsig::format::{read_partition, read_stream, write_partition, write_stream};
use streamsig::train::Sample;
use streamsig::{ComposeMode, ContinuousChannels, Embedder, EmbeddingConfig, ObservationStream, QueryPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sinusoid,
    Brownian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub n_samples: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub subgrid: Option<usize>,
    pub d_out: usize,
    /// Length of the first-values vector fed to the initial state, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_inputs: Option<usize>,
}

/// One line of `targets.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub index: usize,
    pub targets: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SinusoidParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    pub stream: ObservationStream,
    pub cont: ContinuousChannels,
    pub partition: QueryPartition,
    pub record: TargetRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

pub fn sinusoid_split(regime: Regime, range: std::ops::Range<usize>, seed: u64) -> Result<Vec<RawSample>> {
    Ok(datagen::gen_sinusoid_range(regime, range, seed)?
        .into_iter()
        .map(|s| RawSample {
            cont: ContinuousChannels::time_only(s.stream.horizon()),
            stream: s.stream,
            partition: s.partition,
            record: TargetRecord {
                index: s.index,
                targets: s.targets,
                first_values: Some(s.first_values),
                params: Some(s.params),
            },
        })
        .collect())
}

pub fn brownian_splits(n: usize, n_test: usize, m: usize, seed: u64, subgrid: usize) -> Result<(Vec<RawSample>, Vec<RawSample>)> {
    let data = datagen::gen_brownian(n + n_test, m, seed, subgrid)?;
    let raw: Vec<RawSample> = data
        .iter()
        .enumerate()
        .map(|(index, s)| {
            Ok(RawSample {
                stream: s.stream()?,
                cont: ContinuousChannels::time_only(s.horizon()),
                partition: s.partition()?,
                record: TargetRecord {
                    index,
                    targets: s.targets.clone(),
                    first_values: None,
                    params: None,
                },
            })
        })
        .collect::<Result<_>>()?;
    let mut train = raw;
    let test = train.split_off(n);
    Ok((train, test))
}

fn sample_name(index: usize) -> String {
    format!("sample_{index:05}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_split(dir: &Path, split: Split, samples: &[RawSample]) -> Result<()> {
    let root = dir.join(split.dir());
    let streams = root.join("streams");
    let partitions = root.join("partitions");
    fs::create_dir_all(&streams).with_context(|| format!("creating {}", streams.display()))?;
    fs::create_dir_all(&partitions)?;
    let mut targets = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        let name = sample_name(k);
        fs::write(streams.join(format!("{name}.jsonl")), write_stream(&s.stream, &s.cont)?)?;
        let mut p = write_partition(&s.partition)?;
        p.push('\n');
        fs::write(partitions.join(format!("{name}.json")), p)?;
        writeln!(targets, "{}", serde_json::to_string(&s.record)?)?;
    }
    fs::write(root.join("targets.jsonl"), targets)?;
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    write_json(&dir.join("manifest.json"), manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_split(dir: &Path, split: Split) -> Result<Vec<RawSample>> {
    let root = dir.join(split.dir());
    let tpath = root.join("targets.jsonl");
    let file = fs::File::open(&tpath).with_context(|| format!("reading {}", tpath.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TargetRecord = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", tpath.display(), i + 1))?;
        records.push(r);
    }
    records
        .into_par_iter()
        .enumerate()
        .map(|(k, record)| {
            let name = sample_name(k);
            let spath = root.join("streams").join(format!("{name}.jsonl"));
            let ppath = root.join("partitions").join(format!("{name}.json"));
            let text = fs::read_to_string(&spath).with_context(|| format!("reading {}", spath.display()))?;
            let (stream, cont) = read_stream(&text).with_context(|| spath.display().to_string())?;
            let ptext = fs::read_to_string(&ppath).with_context(|| format!("reading {}", ppath.display()))?;
            let partition = read_partition(&ptext).with_context(|| ppath.display().to_string())?;
            if record.targets.len() != partition.len() {
                bail!("{name}: {} targets for {} intervals", record.targets.len(), partition.len());
            }
            Ok(RawSample {
                stream,
                cont,
                partition,
                record,
            })
        })
        .collect()
}

/// Input features a model was trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Features {
    pub depth: usize,
    pub include_counts: bool,
    pub include_time: bool,
}

impl Features {
    pub fn config(&self) -> EmbeddingConfig {
        EmbeddingConfig::new(self.depth, self.include_counts)
    }

    pub fn continuous(&self, cont: &ContinuousChannels) -> Result<ContinuousChannels> {
        if self.include_time {
            Ok(cont.clone())
        } else {
            Ok(cont.without_time_channel()?)
        }
    }
}

pub fn embed(samples: &[RawSample], features: Features, mode: ComposeMode) -> Result<Vec<Sample>> {
    let config = features.config();
    samples
        .par_iter()
        .map(|s| {
            let cont = features.continuous(&s.cont)?;
            let emb = Embedder::new(&s.stream, &cont, &config)?;
            let logsigs = emb.partition_log_signatures(&s.partition, mode)?;
            let mut out = Sample::new(logsigs, s.record.targets.clone());
            out.init_input = s.record.first_values.clone();
            Ok(out)
        })
        .collect()
}

pub fn split_dir(dir: &Path, split: Split) -> PathBuf {
    dir.join(split.dir())
}

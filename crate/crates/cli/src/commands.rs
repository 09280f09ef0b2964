use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use streamsig::datagen::BROWNIAN_INTERVALS;
use streamsig::format::{read_partition, read_stream, write_stream};
use streamsig::oracle::{decode, realize, RealizedPath};
use streamsig::slice::{ForwardMode, LogSliceModel, ModelSpec, Structure};
use streamsig::train::{evaluate, train, TrainConfig};
use streamsig::{EmbeddingConfig, LieElement, QueryPartition};

use crate::dataset::{
    brownian_splits, embed, read_manifest, read_split, sinusoid_split, write_manifest, write_split,
    DatasetManifest, Features, Split, Task,
};
use crate::manifest::{manifest_path, RunRecorder};
use crate::{usage, EvalArgs, GenArgs, InspectArgs, LogsigArgs, ModeArg, TrainArgs};

/// A trained model together with the features it consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub features: Features,
    pub mode: ForwardMode,
    pub model: LogSliceModel,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let manifest = match args.task {
        Task::Sinusoid => {
            let regime = args.regime.ok_or_else(|| usage("--regime is required for the sinusoid task"))?;
            if args.m.is_some() {
                return Err(usage("--m applies to the brownian task only"));
            }
            DatasetManifest {
                task: Task::Sinusoid,
                regime: Some(regime),
                m: None,
                n_samples: args.n,
                n_test: args.n_test,
                seed: args.seed,
                subgrid: None,
                d_out: streamsig::datagen::SINUSOID_CHANNELS,
                init_inputs: Some(streamsig::datagen::SINUSOID_CHANNELS),
            }
        }
        Task::Brownian => {
            let m = args.m.ok_or_else(|| usage("--m is required for the brownian task"))?;
            if !BROWNIAN_INTERVALS.contains(&m) {
                return Err(usage(format!("--m must be one of {BROWNIAN_INTERVALS:?}")));
            }
            if args.regime.is_some() {
                return Err(usage("--regime applies to the sinusoid task only"));
            }
            if args.subgrid < 4 {
                return Err(usage("--subgrid must be at least 4"));
            }
            DatasetManifest {
                task: Task::Brownian,
                regime: None,
                m: Some(m),
                n_samples: args.n,
                n_test: args.n_test,
                seed: args.seed,
                subgrid: Some(args.subgrid),
                d_out: 2,
                init_inputs: None,
            }
        }
    };
    let mut run = RunRecorder::new("gen", &manifest, Some(args.seed))?;
    let (train_set, test_set) = match manifest.task {
        Task::Sinusoid => {
            let regime = manifest.regime.expect("checked above");
            (
                sinusoid_split(regime, 0..args.n, args.seed)?,
                sinusoid_split(regime, args.n..args.n + args.n_test, args.seed)?,
            )
        }
        Task::Brownian => brownian_splits(args.n, args.n_test, manifest.m.expect("checked"), args.seed, args.subgrid)?,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_split(&args.out, Split::Train, &train_set)?;
    write_split(&args.out, Split::Test, &test_set)?;
    write_manifest(&args.out, &manifest)?;
    info!("wrote {} + {} samples to {}", train_set.len(), test_set.len(), args.out.display());
    run.output(&args.out);
    run.write(Some(&manifest_path(&args.out, true)))
}

#[derive(Debug, Serialize)]
struct LogsigConfig {
    depth: usize,
    include_counts: bool,
    include_time: bool,
    mode: ForwardMode,
}

/// Output of `logsig`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LogsigOutput {
    pub features: Features,
    pub d_x: usize,
    pub partition: QueryPartition,
    pub logsigs: Vec<LieElement>,
}

pub fn logsig(args: &LogsigArgs) -> Result<()> {
    let features = Features {
        depth: args.features.depth.unwrap_or(2),
        include_counts: !args.features.no_counts,
        include_time: !args.features.no_time,
    };
    let mode = args.features.mode.unwrap_or(ModeArg::Sequential);
    let mut run = RunRecorder::new(
        "logsig",
        &LogsigConfig {
            depth: features.depth,
            include_counts: features.include_counts,
            include_time: features.include_time,
            mode: mode.forward(),
        },
        None,
    )?;
    run.input(&args.stream);
    let (stream, cont) = read_stream(&read_text(&args.stream)?).with_context(|| args.stream.display().to_string())?;
    let partition = match &args.partition {
        Some(p) => {
            run.input(p);
            read_partition(&read_text(p)?).with_context(|| p.display().to_string())?
        }
        None => QueryPartition::whole(stream.horizon())?,
    };
    let cont = features.continuous(&cont)?;
    let config = features.config();
    let emb = streamsig::Embedder::new(&stream, &cont, &config)?;
    let logsigs = emb.partition_log_signatures(&partition, mode.compose())?;
    let out = LogsigOutput {
        features,
        d_x: emb.layout().d_x(),
        partition,
        logsigs,
    };
    let mut text = serde_json::to_string(&out)?;
    text.push('\n');
    write_text(args.out.as_deref(), &text)?;
    if let Some(p) = &args.out {
        run.output(p);
    }
    run.write(args.out.as_deref().map(|p| manifest_path(p, false)).as_deref())
}

fn load_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(d) = args.features.depth {
        config.depth = d;
    }
    if args.features.no_counts {
        config.include_counts = false;
    }
    if args.features.no_time {
        config.include_time = false;
    }
    if let Some(m) = args.features.mode {
        config.mode = m.forward();
    }
    Ok(config)
}

fn compose_for(mode: ForwardMode) -> streamsig::ComposeMode {
    match mode {
        ForwardMode::Sequential => streamsig::ComposeMode::Sequential,
        ForwardMode::Scan => streamsig::ComposeMode::Parallel,
    }
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let config = load_config(args)?;
    let mut run = RunRecorder::new("train", &config, Some(config.seed))?;
    run.input(&args.data);
    let manifest = read_manifest(&args.data)?;
    let train_raw = read_split(&args.data, Split::Train)?;
    let test_raw = read_split(&args.data, Split::Test)?;
    let Some(first) = train_raw.first() else {
        bail!("{} has no training samples", args.data.display());
    };
    let features = Features {
        depth: config.depth,
        include_counts: config.include_counts,
        include_time: config.include_time,
    };
    let cont = features.continuous(&first.cont)?;
    let d_x = EmbeddingConfig::new(config.depth, config.include_counts)
        .layout(first.stream.d_disc(), cont.d_cont())
        .d_x();
    let compose = compose_for(config.mode);
    let train_set = embed(&train_raw, features, compose)?;
    let test_set = embed(&test_raw, features, compose)?;
    let spec = ModelSpec {
        d_x,
        d_h: config.hidden_dim,
        d_out: manifest.d_out,
        structure: match config.block_size {
            Some(block) => Structure::BlockDiagonal { block },
            None => Structure::Dense,
        },
        init_inputs: manifest.init_inputs,
    };
    let model = LogSliceModel::init(&spec, config.seed)?;
    info!("training {} parameters on {} samples", model.n_params(), train_set.len());
    let outcome = train(model, &train_set, &test_set, &config)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let ckpt = Checkpoint {
        features,
        mode: config.mode,
        model: outcome.model,
    };
    let cpath = args.out.join("checkpoint.json");
    fs::write(&cpath, serde_json::to_string(&ckpt)? + "\n")?;
    let mpath = args.out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&mpath).with_context(|| format!("writing {}", mpath.display()))?;
    for m in &outcome.metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    if let Some(last) = outcome.metrics.last() {
        info!("final train {} test {:?}", last.train_loss, last.test_loss);
    }
    run.output(&cpath);
    run.output(&mpath);
    run.write(Some(&manifest_path(&args.out, true)))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = read_text(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing checkpoint {}", path.display()))
}

/// Output of `eval`: `mse[i][j]` is checkpoint `i` on dataset `j`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub split: String,
    pub checkpoints: Vec<String>,
    pub datasets: Vec<String>,
    pub labels: Vec<String>,
    pub mse: Vec<Vec<f64>>,
}

fn dataset_label(m: &DatasetManifest) -> String {
    match (m.regime, m.m) {
        (Some(r), _) => r.name().to_string(),
        (None, Some(m)) => format!("m={m}"),
        _ => "dataset".into(),
    }
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let split = if args.train_split { Split::Train } else { Split::Test };
    #[derive(Serialize)]
    struct EvalConfig<'a> {
        split: &'a str,
        mode: Option<ForwardMode>,
    }
    let mut run = RunRecorder::new(
        "eval",
        &EvalConfig {
            split: split.dir(),
            mode: args.mode.map(ModeArg::forward),
        },
        None,
    )?;
    let ckpts: Vec<Checkpoint> = args.checkpoint.iter().map(|p| load_checkpoint(p)).collect::<Result<_>>()?;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for d in &args.data {
        labels.push(dataset_label(&read_manifest(d)?));
        data.push(read_split(d, split)?);
        run.input(d);
    }
    let mut mse = Vec::new();
    for (ck, path) in ckpts.iter().zip(&args.checkpoint) {
        run.input(path);
        let mode = args.mode.map_or(ck.mode, ModeArg::forward);
        let mut row = Vec::new();
        for (raw, dir) in data.iter().zip(&args.data) {
            let samples = embed(raw, ck.features, compose_for(ck.mode))?;
            let loss = evaluate(&ck.model, &samples, mode)
                .with_context(|| format!("evaluating {} on {}", path.display(), dir.display()))?;
            row.push(loss);
        }
        mse.push(row);
    }
    let out = EvalOutput {
        split: split.dir().into(),
        checkpoints: args.checkpoint.iter().map(|p| p.display().to_string()).collect(),
        datasets: args.data.iter().map(|p| p.display().to_string()).collect(),
        labels,
        mse,
    };
    if let Some(p) = &args.csv {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("writing {}", p.display()))?;
        let mut header = vec!["checkpoint".to_string()];
        header.extend(out.labels.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in out.checkpoints.iter().zip(&out.mse) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        run.output(p);
    }
    write_text(args.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    if let Some(p) = &args.out {
        run.output(p);
    }
    run.write(args.out.as_deref().map(|p| manifest_path(p, false)).as_deref())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    #[derive(Serialize)]
    struct InspectConfig {
        decode: bool,
        depth: usize,
        include_counts: bool,
    }
    let mut run = RunRecorder::new(
        "inspect",
        &InspectConfig {
            decode: args.decode.is_some(),
            depth: args.depth,
            include_counts: !args.no_counts,
        },
        None,
    )?;
    let text = if let Some(p) = &args.decode {
        run.input(p);
        let path: RealizedPath =
            serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
        let (stream, cont) = decode(&path)?;
        write_stream(&stream, &cont)?
    } else {
        let p: &PathBuf = args.stream.as_ref().expect("parser requires one input");
        run.input(p);
        let (stream, cont) = read_stream(&read_text(p)?).with_context(|| p.display().to_string())?;
        let config = EmbeddingConfig::new(args.depth, !args.no_counts);
        serde_json::to_string(&realize(&stream, &cont, &config)?)? + "\n"
    };
    write_text(args.out.as_deref(), &text)?;
    if let Some(p) = &args.out {
        run.output(p);
    }
    run.write(args.out.as_deref().map(|p| manifest_path(p, false)).as_deref())
}

//! Command-line front end for the contract analysis pipeline: disassembly,
//! CFG recovery, graph encoding, training, evaluation, and a depth sweep.
//!
//! Every command reads hex bytecode or a JSONL corpus, never mutates its
//! inputs, and funnels all randomness through one `--seed` flag so a rerun
//! with the same flags reproduces its output byte for byte.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use evmcfg_core::{
    build_cfg, confusion, encode, generate_corpus, load_corpus, metrics, parse_hex, predict,
    preprocess, split, split_sections, to_dot, train, ContractSections, DatasetRecord,
    EncodedGraph, EvalReport, GcnModel, ModelConfig, Origin, SkipEntry, TrainConfig,
};
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "evmcfg", version, about = "Recover contract control flow and classify it")]
struct Cli {
    /// Seed for every random choice: weight init, shuffling, the split.
    #[arg(long, global = true, env = "EVMCFG_SEED", default_value_t = 42)]
    seed: u64,

    /// Largest graph the encoder accepts; features are padded to this width.
    #[arg(long, global = true, default_value_t = 256)]
    max_nodes: usize,

    /// Write the primary output here instead of stdout (train: model.json).
    #[arg(long, short = 'o', global = true)]
    out: Option<PathBuf>,

    /// Worker threads for corpus preprocessing (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Increase log detail (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disassemble a hex bytecode file, one instruction per line.
    Disasm {
        /// Hex bytecode file; 0x prefix and whitespace are tolerated.
        input: PathBuf,
        /// Treat the input as deployment bytecode and analyze what it deploys.
        #[arg(long)]
        creation: bool,
        /// Emit the instruction list as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Recover the control flow graph of a hex bytecode file.
    Cfg {
        input: PathBuf,
        #[arg(long)]
        creation: bool,
        /// Emit GraphViz DOT (the default).
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        /// Emit the JSON interchange schema instead of DOT.
        #[arg(long)]
        json: bool,
    },
    /// Encode a contract as a normalized graph ready for the network.
    Encode {
        input: PathBuf,
        #[arg(long)]
        creation: bool,
    },
    /// Train a detector on a JSONL corpus and report held-out metrics.
    Train(TrainArgs),
    /// Score a trained model against a labeled corpus.
    Eval {
        /// Checkpoint produced by train.
        model: PathBuf,
        /// JSONL corpus, one record per line.
        corpus: PathBuf,
    },
    /// Retrain at each depth in a range and tabulate the metrics.
    SweepLayers {
        corpus: PathBuf,
        /// Depths to sweep: one value (3) or an inclusive range (1..6).
        #[arg(long, default_value = "1..6")]
        layers: String,
        /// Emit CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
    },
    /// Generate a labeled synthetic corpus as JSONL.
    GenCorpus {
        /// Number of records.
        #[arg(long, default_value_t = 400)]
        count: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    corpus: PathBuf,
    /// Graph-convolution depth.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=6))]
    layers: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let io = err.chain().any(|cause| cause.is::<std::io::Error>());
            ExitCode::from(if io { 2 } else { 1 })
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Disasm {
            input,
            creation,
            json,
        } => {
            let sections = read_sections(input, *creation)?;
            let instrs = evmcfg_core::disassemble(&sections.runtime);
            let body = if *json {
                pretty_json(&instrs)?
            } else {
                let mut text = String::new();
                for instr in &instrs {
                    text.push_str(&evmcfg_core::format_instruction(instr));
                    text.push('\n');
                }
                text
            };
            emit(&cli.out, &body)
        }
        Command::Cfg {
            input,
            creation,
            dot: _,
            json,
        } => {
            let sections = read_sections(input, *creation)?;
            let cfg = build_cfg(&sections.runtime);
            let body = if *json { pretty_json(&cfg)? } else { to_dot(&cfg) };
            emit(&cli.out, &body)
        }
        Command::Encode { input, creation } => {
            let sections = read_sections(input, *creation)?;
            let cfg = build_cfg(&sections.runtime);
            let graph = encode(&cfg, cli.max_nodes, None, false)?;
            emit(&cli.out, &pretty_json(&graph)?)
        }
        Command::Train(args) => {
            let corpus = prepare_corpus(&args.corpus, cli.seed, cli.max_nodes)?;
            let (model, report) = fit(
                &corpus,
                args.layers as usize,
                args.epochs,
                args.lr,
                cli.seed,
                cli.max_nodes,
            )?;
            let checkpoint = cli.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
            fs::write(&checkpoint, model.to_json())
                .with_context(|| format!("writing {}", checkpoint.display()))?;
            log::info!("checkpoint written to {}", checkpoint.display());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Eval { model, corpus } => {
            let text = fs::read_to_string(model)
                .with_context(|| format!("reading {}", model.display()))?;
            let model = GcnModel::from_json(&text)?;
            let records = load_corpus(corpus)?;
            let (graphs, skips) = preprocess(&records, cli.max_nodes);
            report_skips(&skips);
            let report = score(&model, graphs.iter().map(|g| &g.graph))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::SweepLayers {
            corpus,
            layers,
            csv,
            epochs,
            lr,
        } => {
            let (lo, hi) = parse_layer_range(layers)?;
            let corpus = prepare_corpus(corpus, cli.seed, cli.max_nodes)?;
            let mut rows = Vec::new();
            for depth in lo..=hi {
                let (_, report) = fit(&corpus, depth, *epochs, *lr, cli.seed, cli.max_nodes)?;
                rows.push((depth, report));
            }
            emit(&cli.out, &sweep_table(&rows, *csv))
        }
        Command::GenCorpus { count } => {
            let records = generate_corpus(*count, cli.seed);
            let mut body = String::new();
            for record in &records {
                body.push_str(&serde_json::to_string(record)?);
                body.push('\n');
            }
            emit(&cli.out, &body)
        }
    }
}

/// Read a hex file and split it into deployment, runtime, and auxdata.
fn read_sections(path: &Path, creation: bool) -> anyhow::Result<ContractSections> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let origin = if creation {
        Origin::CreationWithDeploy
    } else {
        Origin::RuntimeOnly
    };
    let code = parse_hex(&text, origin)?;
    Ok(split_sections(&code)?)
}

fn pretty_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Write to `--out` when given, stdout otherwise.
fn emit(out: &Option<PathBuf>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn report_skips(skips: &[SkipEntry]) {
    for skip in skips {
        eprintln!("skipped {}: {}", skip.id, skip.reason);
    }
}

struct PreparedCorpus {
    train: Vec<EncodedGraph>,
    test: Vec<EncodedGraph>,
}

/// Load, split 8:2 by label, and preprocess both halves into graphs.
fn prepare_corpus(path: &Path, seed: u64, max_nodes: usize) -> anyhow::Result<PreparedCorpus> {
    let records = load_corpus(path)?;
    let membership = split(&records, seed)?;
    let test_ids: HashSet<&String> = membership.test.iter().collect();
    let (train_records, test_records): (Vec<DatasetRecord>, Vec<DatasetRecord>) = records
        .into_iter()
        .partition(|r| !test_ids.contains(&r.id));

    let (train_graphs, skips) = preprocess(&train_records, max_nodes);
    report_skips(&skips);
    let (test_graphs, skips) = preprocess(&test_records, max_nodes);
    report_skips(&skips);
    log::info!(
        "corpus ready: {} train graphs, {} test graphs",
        train_graphs.len(),
        test_graphs.len()
    );
    Ok(PreparedCorpus {
        train: train_graphs.into_iter().map(|g| g.graph).collect(),
        test: test_graphs.into_iter().map(|g| g.graph).collect(),
    })
}

/// Train a fresh model on the train half and score it on the test half.
fn fit(
    corpus: &PreparedCorpus,
    layers: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
    max_nodes: usize,
) -> anyhow::Result<(GcnModel, EvalReport)> {
    let model = GcnModel::new(ModelConfig {
        num_hidden_layers: layers,
        input_width: max_nodes,
        seed,
        ..ModelConfig::default()
    })?;
    let train_cfg = TrainConfig {
        learning_rate: lr,
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let (model, history) = train(model, &corpus.train, &train_cfg)?;
    if let Some(loss) = history.last() {
        log::info!("final epoch mean loss {loss:.6}");
    }
    let report = score(&model, corpus.test.iter())?;
    Ok((model, report))
}

/// Confusion counts and derived metrics for a model over labeled graphs.
fn score<'a>(
    model: &GcnModel,
    graphs: impl Iterator<Item = &'a EncodedGraph>,
) -> anyhow::Result<EvalReport> {
    let mut predictions = Vec::new();
    let mut labels = Vec::new();
    for graph in graphs {
        let (prediction, _) = predict(model, graph)?;
        predictions.push(prediction);
        labels.push(graph.label.context("graph in the scoring set has no label")?);
    }
    let counts = confusion(&predictions, &labels)?;
    let report = metrics(&counts)?;
    Ok(EvalReport::new(counts, report))
}

/// Accept "3" or an inclusive "1..6", both bounded to the supported depths.
fn parse_layer_range(text: &str) -> anyhow::Result<(usize, usize)> {
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().context("bad lower bound in --layers")?,
            b.trim().parse().context("bad upper bound in --layers")?,
        ),
        None => {
            let single: usize = text.trim().parse().context("bad --layers value")?;
            (single, single)
        }
    };
    anyhow::ensure!(
        (1..=6).contains(&lo) && (1..=6).contains(&hi) && lo <= hi,
        "--layers must fall within 1..6, got {text}"
    );
    Ok((lo, hi))
}

/// Tabulate sweep rows, metrics scaled to percentages.
fn sweep_table(rows: &[(usize, EvalReport)], csv: bool) -> String {
    let mut out = String::new();
    if csv {
        out.push_str("layers,accuracy,recall,precision,f1\n");
        for (depth, r) in rows {
            out.push_str(&format!(
                "{depth},{:.4},{:.4},{:.4},{:.4}\n",
                100.0 * r.accuracy,
                100.0 * r.recall,
                100.0 * r.precision,
                100.0 * r.f1,
            ));
        }
    } else {
        out.push_str(&format!(
            "{:>6}  {:>8}  {:>6}  {:>9}  {:>6}\n",
            "layers", "accuracy", "recall", "precision", "f1"
        ));
        for (depth, r) in rows {
            out.push_str(&format!(
                "{depth:>6}  {:>8.2}  {:>6.2}  {:>9.2}  {:>6.2}\n",
                100.0 * r.accuracy,
                100.0 * r.recall,
                100.0 * r.precision,
                100.0 * r.f1,
            ));
        }
    }
    out
}

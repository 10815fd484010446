//! `mada`: file-to-file pipeline for multi-action dialog data augmentation.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 for I/O
//! failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mada_core::Error;

#[derive(Debug, Parser)]
#[command(name = "mada", version, about = "Multi-action data augmentation for task-oriented dialog")]
struct Cli {
    /// Worker threads for per-dialog work (outputs do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// TOML file with default values for flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Ontology and venue database shared by most subcommands.
#[derive(Debug, Args)]
pub struct Resources {
    #[arg(long, value_name = "FILE")]
    pub ontology: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub db: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize a corpus, and split it into train/dev/test.
    Ingest {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Directory receiving corpus.json, train.json, dev.json and test.json.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Train/dev/test ratios [default: 0.8,0.1,0.1].
        #[arg(long, value_delimiter = ',', num_args = 3, value_name = "R")]
        split: Option<Vec<f64>>,
        /// Shuffle seed for the split [default: 0].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replace slot values in system responses by placeholders.
    Delex {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the span token vocabulary here.
        #[arg(long, value_name = "FILE")]
        vocab: Option<PathBuf>,
    },
    /// Collect the valid actions of every dialog state.
    BuildMap {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Write the augmented training pairs as JSONL.
    Augment {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Actions sampled per act-type group [default: 3].
        #[arg(long)]
        k_aug: Option<usize>,
        /// Sampling seed [default: 0].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the action policy on raw or augmented pairs.
    Train {
        #[command(flatten)]
        res: Resources,
        /// Training corpus; also the source of response templates.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Train on this augmented pairs file.
        #[arg(long, value_name = "FILE", conflicts_with = "raw", required_unless_present = "raw")]
        augmented: Option<PathBuf>,
        /// Train on the corpus's ground-truth actions only.
        #[arg(long)]
        raw: bool,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write a response template bank (needs a delexicalized corpus).
        #[arg(long, value_name = "FILE")]
        bank: Option<PathBuf>,
        /// Smoothing constant [default: 0.01].
        #[arg(long)]
        alpha: Option<f64>,
        /// Backoff weights, most specific first [default: 0.7,0.15,0.1,0.05].
        #[arg(long, value_delimiter = ',', num_args = 4, value_name = "W")]
        lambdas: Option<Vec<f64>>,
    },
    /// Decode N candidate actions for every turn.
    Decode {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// greedy | beam | diverse-beam | top-k | top-p [default: beam].
        #[arg(long)]
        method: Option<String>,
        /// Number of actions per turn [default: 5].
        #[arg(long)]
        actions: Option<usize>,
        /// Diverse-beam sibling penalty [default: 0.2].
        #[arg(long)]
        gamma: Option<f64>,
        /// Top-k cutoff [default: 5].
        #[arg(long)]
        top_k: Option<usize>,
        /// Nucleus mass [default: 0.9].
        #[arg(long)]
        top_p: Option<f64>,
        /// Maximum span length in tokens [default: 20].
        #[arg(long)]
        max_len: Option<usize>,
        /// Sampling seed [default: 0].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn decoded actions into responses (predictions JSONL).
    Realize {
        #[command(flatten)]
        res: Resources,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        decoded: PathBuf,
        #[arg(long, value_name = "FILE")]
        bank: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score predictions: inform, success, BLEU, combined, act and slot numbers.
    Evaluate {
        #[command(flatten)]
        res: Resources,
        /// Delexicalized reference corpus.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compare raw and augmented evaluation reports. Repeat a flag to average
    /// several runs.
    Report {
        #[arg(long, value_name = "FILE", required = true)]
        raw: Vec<PathBuf>,
        #[arg(long, value_name = "FILE", required = true)]
        augmented: Vec<PathBuf>,
        /// Also write the table here.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dhc::data::{load_dataset, Preset};
use dhc::engine::{
    evaluate, format_prediction, gradcheck, load_checkpoint, load_checkpoint_checked, load_taxonomy, run_training,
    TrainConfig, CONFIG_KEYS, GRADCHECK_TOLERANCE,
};
use dhc::{Decoder, Error, Result};

#[derive(Parser)]
#[command(name = "dhc", version, about = "Hierarchical text classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file
    #[command(after_help = CONFIG_KEYS)]
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Drop the dependence loss (beta = 0)
        #[arg(long)]
        beta0: bool,
        /// Give every layer its own independent representation
        #[arg(long)]
        independent_rep: bool,
    },
    /// Score a checkpoint on a labeled dataset
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Label documents read from stdin, one per line
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Write a synthetic taxonomy, dataset and training config
    GenData {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic and finite-difference gradients on random models
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

#[derive(clap::Args)]
struct DecoderArgs {
    /// greedy, heuristic or beam (default: the one the model was trained with)
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
}

impl DecoderArgs {
    fn resolve(&self, config: &TrainConfig) -> Result<Decoder> {
        match &self.decoder {
            Some(name) => Decoder::parse(name, self.beam_width),
            None => Ok(config.decoder),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train {
            config,
            seed,
            beta0,
            independent_rep,
        } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if beta0 {
                cfg = cfg.without_dependence_loss();
            }
            if independent_rep {
                cfg = cfg.with_independent_representations();
            }
            let outcome = run_training(&cfg)?;
            for epoch in &outcome.log {
                eprintln!("{epoch}");
            }
            if let Some(report) = outcome.log.last().and_then(|e| e.eval.as_ref()) {
                println!("{report}");
            }
        }
        Command::Eval {
            checkpoint,
            data,
            taxonomy,
            decoder,
        } => {
            let tree = load_taxonomy(&taxonomy)?;
            let (model, cfg) = load_checkpoint_checked(&checkpoint, Some(&tree))?;
            let text = std::fs::read_to_string(&data).map_err(|e| Error::Io { path: data, source: e })?;
            let dataset = load_dataset(&text, model.tree(), &cfg.featurizer)?;
            println!("{}", evaluate(&model, &dataset, decoder.resolve(&cfg)?)?);
        }
        Command::Predict { checkpoint, decoder } => {
            let (model, cfg) = load_checkpoint(&checkpoint)?;
            let decoder = decoder.resolve(&cfg)?;
            let texts = std::io::stdin()
                .lock()
                .lines()
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(|e| Error::Io {
                    path: "<stdin>".into(),
                    source: e,
                })?;
            let decoded = dhc::engine::predict(&model, &cfg.featurizer, &texts, decoder)?;
            let mut out = std::io::stdout().lock();
            for d in &decoded {
                let _ = writeln!(out, "{}", format_prediction(model.tree(), d));
            }
        }
        Command::GenData { preset, out_dir, seed } => {
            let preset = Preset::parse(&preset)?;
            let seed = seed.unwrap_or(preset.default_seed());
            let corpus = preset.spec(seed).generate()?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            write(&out_dir.join("taxonomy.tsv"), &corpus.taxonomy)?;
            write(&out_dir.join("data.tsv"), &corpus.dataset_file())?;
            let mut cfg = TrainConfig::for_preset(preset);
            cfg.taxonomy = Some("taxonomy.tsv".into());
            cfg.data = Some("data.tsv".into());
            cfg.checkpoint = Some("model.ckpt".into());
            cfg.log = Some("train.log".into());
            write(&out_dir.join("train.conf"), &cfg.to_config_string())?;
            println!(
                "{} documents, {} leaves -> {}",
                corpus.documents.len(),
                corpus.tree.leaf_count(),
                out_dir.display()
            );
        }
        Command::Gradcheck { seed, cases } => {
            let report = gradcheck(seed, cases)?;
            println!("cases\t{}", report.cases.len());
            println!("max_relative_error\t{:e}", report.max_rel_error);
            println!("f64_objective_max_relative_error\t{:e}", report.f64_max_rel_error);
            if !report.passed() {
                eprintln!("gradient check failed: tolerance {GRADCHECK_TOLERANCE:e}");
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

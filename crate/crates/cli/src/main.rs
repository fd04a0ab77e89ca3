use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use lagonn_core::adapter::AdapterConfig;
use lagonn_core::data::{load_dataset, LabelMap};
use lagonn_core::decorator::{DecorationMode, DecoratorConfig};
use lagonn_core::encoders::{write_pending_manifest, EmbeddingStore};
use lagonn_core::error::{Error, MissingText, Result};
use lagonn_core::experiment::{
    cmd_make_synthetic, cmd_report, cmd_run, parse_seed_list, pending_path, resolve_seeds,
    RunConfig, SyntheticConfig,
};
use lagonn_core::harness::Regime;
use lagonn_core::heads::{LogRegParams, KNN_HEAD_K};
use lagonn_core::pipeline::{PipelineConfig, Variant};

#[derive(Parser)]
#[command(
    name = "lagonn",
    version,
    about = "Nearest-neighbor decoration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant x regime x seed cell and write result shards.
    Run(RunArgs),
    /// Aggregate result shards into report.csv and report.txt.
    Report {
        #[arg(long)]
        shards: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a separable synthetic corpus with an aligned embedding store.
    MakeSynthetic(SyntheticArgs),
    /// Embedding store maintenance.
    #[command(subcommand)]
    Store(StoreCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Training pool the regimes sample from.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// hash:<dim>, store:<path> or synthetic:<path>.
    #[arg(long, default_value = "hash:256")]
    encoder: String,
    /// Comma-separated variant names.
    #[arg(
        long,
        default_value = "PROBE,LAGONN_CHEAP,LOGREG,KNN,LAGONN,SETFIT,LAGONN_EXP,SETFIT_LITE,LAGONN_LITE"
    )]
    variants: String,
    #[arg(long, default_value = "EXTREME,IMBALANCED,MODERATE,BALANCED")]
    regimes: String,
    /// Overridden by LAGONN_SEED when set.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    #[arg(long, default_value = "LABEL")]
    mode: String,
    #[arg(long, default_value = "[SEP]")]
    separator: String,
    #[arg(long, default_value_t = 1)]
    distance_decimals: usize,
    #[arg(long, default_value_t = AdapterConfig::default().pairs_per_example)]
    pairs_per_example: usize,
    #[arg(long, default_value_t = AdapterConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = AdapterConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = LogRegParams::default().l2_strength)]
    l2_strength: f64,
    #[arg(long, default_value_t = KNN_HEAD_K)]
    knn_k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = SyntheticConfig::default().n_per_class)]
    n_per_class: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().test_per_class)]
    test_per_class: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().classes)]
    classes: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().margin)]
    margin: f64,
    #[arg(long, default_value_t = SyntheticConfig::default().noise)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Print a store's dimension and record count.
    Info { store: PathBuf },
    /// List dataset texts absent from a store as a pending manifest.
    Pending {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        dataset: Vec<PathBuf>,
        #[arg(long, default_value = "[SEP]")]
        separator: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn split_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(|p| p.trim().parse()).collect()
}

fn run_config(args: RunArgs) -> Result<RunConfig> {
    let decorator = DecoratorConfig {
        mode: args.mode.parse::<DecorationMode>()?,
        separator: args.separator,
        distance_decimals: args.distance_decimals,
    };
    let adapter = AdapterConfig {
        pairs_per_example: args.pairs_per_example,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: 0,
    };
    let logreg = LogRegParams {
        l2_strength: args.l2_strength,
        ..LogRegParams::default()
    };
    Ok(RunConfig {
        dataset: args.dataset,
        test: args.test,
        labels: args.labels,
        encoder: args.encoder.parse()?,
        variants: split_list::<Variant>(&args.variants)?,
        regimes: split_list::<Regime>(&args.regimes)?,
        seeds: resolve_seeds(parse_seed_list(&args.seeds)?)?,
        pipeline: PipelineConfig {
            decorator,
            adapter,
            logreg,
            knn_k: args.knn_k,
        },
        out: args.out,
        jobs: args.jobs,
    })
}

fn store_pending(
    store: PathBuf,
    labels: PathBuf,
    datasets: Vec<PathBuf>,
    separator: &str,
    out: PathBuf,
) -> Result<usize> {
    let store = EmbeddingStore::load(store)?;
    let label_map = LabelMap::load(labels)?;
    let mut missing = Vec::new();
    for path in datasets {
        for text in load_dataset(path, label_map.clone())?.rendered(separator) {
            if !store.contains(&text) {
                missing.push(MissingText {
                    key: lagonn_core::encoders::sha256_hex(&text),
                    text,
                });
            }
        }
    }
    write_pending_manifest(out, &missing)?;
    Ok(missing.len())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = run_config(args)?;
            match cmd_run(&config) {
                Ok(summary) => {
                    println!(
                        "wrote {} shards to {}; {} training decorations checked, {} self-citations",
                        summary.shards.len(),
                        config.out.join("shards").display(),
                        summary.self_exclusion.decorations_checked,
                        summary.self_exclusion.self_citations
                    );
                    Ok(())
                }
                Err(Error::MissingEmbedding(missing)) => {
                    eprintln!(
                        "{} texts missing from the store; listed in {}",
                        missing.len(),
                        pending_path(&config.out).display()
                    );
                    Err(Error::MissingEmbedding(missing))
                }
                Err(e) => Err(e),
            }
        }
        Command::Report { shards, out } => {
            let paths = cmd_report(&shards, &out)?;
            print!(
                "{}",
                std::fs::read_to_string(&paths.text).map_err(|e| Error::Config(e.to_string()))?
            );
            Ok(())
        }
        Command::MakeSynthetic(args) => {
            let config = SyntheticConfig {
                n_per_class: args.n_per_class,
                test_per_class: args.test_per_class,
                classes: args.classes,
                dim: args.dim,
                margin: args.margin,
                noise: args.noise,
                seed: args.seed,
            };
            let paths = cmd_make_synthetic(&config, &args.out)?;
            println!(
                "wrote {}",
                paths.store.parent().unwrap_or(&args.out).display()
            );
            Ok(())
        }
        Command::Store(StoreCommand::Info { store }) => {
            let store = EmbeddingStore::load(store)?;
            println!("dim {} records {}", store.dim(), store.len());
            Ok(())
        }
        Command::Store(StoreCommand::Pending {
            store,
            labels,
            dataset,
            separator,
            out,
        }) => {
            let n = store_pending(store, labels, dataset, &separator, out.clone())?;
            println!("{n} missing texts written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

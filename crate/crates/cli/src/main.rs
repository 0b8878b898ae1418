use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmvgae::graph::SplitRatios;
use mmvgae_cli::commands::{self, parse_kv, parse_ratios};

#[derive(Parser)]
#[command(
    name = "mmvgae",
    version,
    about = "Multimodal-graph variational autoencoders for interaction prediction"
)]
struct Cli {
    /// Worker threads for matrix kernels (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Train and evaluate in 32-bit precision.
    #[arg(long = "f32", global = true)]
    f32_mode: bool,

    /// Configuration file (flat key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory or file, command dependent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an edge list, split it, and write a dataset bundle.
    Prepare(PrepareCli),
    /// Train a model on a prepared bundle.
    Train(TrainCli),
    /// Score a held-out split of a bundle with a checkpoint.
    Evaluate(EvaluateCli),
    /// Score explicit node pairs under one relation.
    Predict(PredictCli),
    /// Export latent or side-effect embeddings as CSV.
    ExportEmbeddings(ExportCli),
    /// Compute Morgan fingerprints for a SMILES file.
    Fingerprint(FingerprintCli),
}

#[derive(Args)]
struct PrepareCli {
    /// Edge list TSV: src_type, src_id, relation, dst_type, dst_id[, weight].
    #[arg(long)]
    edges: PathBuf,
    /// Relation declarations (JSON list).
    #[arg(long)]
    schema: PathBuf,
    /// SMILES source per node type, as type=path. Repeatable.
    #[arg(long = "smiles", value_parser = parse_kv)]
    smiles: Vec<(String, String)>,
    /// Dense feature CSV per node type, as type=path. Repeatable.
    #[arg(long = "dense", value_parser = parse_kv)]
    dense: Vec<(String, String)>,
    /// Node feature choice per type: type=one-hot|fingerprint|dense.
    #[arg(long = "features", value_parser = parse_kv)]
    features: Vec<(String, String)>,
    /// Train,validation,test edge ratios.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    ratios: (f64, f64, f64),
    /// Fraction of train edges used for message passing.
    #[arg(long, default_value_t = 0.8)]
    message_frac: f64,
    #[arg(long, default_value_t = 2048)]
    fp_width: usize,
    #[arg(long, default_value_t = 2)]
    fp_radius: usize,
    /// Abort on the first unparseable SMILES instead of zero-filling.
    #[arg(long)]
    strict_smiles: bool,
}

#[derive(Args)]
struct TrainCli {
    /// Prepared dataset bundle directory.
    #[arg(long)]
    bundle: PathBuf,
    /// key=value overrides applied after the config file. Repeatable.
    #[arg(long = "set", value_parser = parse_kv)]
    sets: Vec<(String, String)>,
}

#[derive(Args)]
struct EvaluateCli {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which split to score: val, test, or train.
    #[arg(long)]
    split: String,
}

#[derive(Args)]
struct PredictCli {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// TSV of src_id, dst_id pairs.
    #[arg(long)]
    pairs: PathBuf,
    /// Relation to score the pairs under.
    #[arg(long)]
    relation: String,
}

#[derive(Args)]
struct ExportCli {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// drug-latent | protein-latent | latent:<type> | side-effect.
    #[arg(long)]
    what: String,
}

#[derive(Args)]
struct FingerprintCli {
    /// TSV of drug_id, smiles rows.
    #[arg(long)]
    smiles: PathBuf,
    #[arg(long, default_value_t = 2048)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Emit one hex-packed column instead of 0/1 columns.
    #[arg(long)]
    hex: bool,
    /// Abort on the first unparseable SMILES.
    #[arg(long)]
    strict: bool,
}

fn run(cli: Cli) -> mmvgae::Result<()> {
    if cli.threads > 0 {
        // Row-parallel kernels are bit-deterministic at any width, so
        // the pool size is purely a throughput knob.
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| mmvgae::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Prepare(args) => {
            let out = cli
                .out
                .ok_or_else(|| mmvgae::Error::Config("prepare needs --out <dir>".into()))?;
            let (train, val, test) = args.ratios;
            commands::cmd_prepare(&commands::PrepareArgs {
                edges: args.edges,
                schema: args.schema,
                smiles: args.smiles.into_iter().map(|(k, v)| (k, v.into())).collect(),
                dense: args.dense.into_iter().map(|(k, v)| (k, v.into())).collect(),
                features: args.features,
                ratios: SplitRatios { train, val, test, message_frac: args.message_frac },
                fp_width: args.fp_width,
                fp_radius: args.fp_radius,
                strict_smiles: args.strict_smiles,
                seed: cli.seed.unwrap_or(0),
                out,
            })
        }
        Command::Train(args) => {
            let out = cli
                .out
                .ok_or_else(|| mmvgae::Error::Config("train needs --out <dir>".into()))?;
            let config = cli
                .config
                .ok_or_else(|| mmvgae::Error::Config("train needs --config <file>".into()))?;
            commands::cmd_train(&commands::TrainArgs {
                bundle: args.bundle,
                config,
                sets: args.sets,
                seed: cli.seed,
                f32_mode: cli.f32_mode,
                out,
            })
        }
        Command::Evaluate(args) => commands::cmd_evaluate(&commands::EvaluateArgs {
            bundle: args.bundle,
            checkpoint: args.checkpoint,
            split: args.split,
            config: cli.config,
            out: cli.out,
        }),
        Command::Predict(args) => commands::cmd_predict(&commands::PredictArgs {
            bundle: args.bundle,
            checkpoint: args.checkpoint,
            pairs: args.pairs,
            relation: args.relation,
            config: cli.config,
            out: cli.out,
        }),
        Command::ExportEmbeddings(args) => {
            let out = cli.out.ok_or_else(|| {
                mmvgae::Error::Config("export-embeddings needs --out <file>".into())
            })?;
            commands::cmd_export_embeddings(&commands::ExportArgs {
                bundle: args.bundle,
                checkpoint: args.checkpoint,
                what: args.what,
                config: cli.config,
                out,
            })
        }
        Command::Fingerprint(args) => commands::cmd_fingerprint(&commands::FingerprintArgs {
            smiles: args.smiles,
            width: args.width,
            radius: args.radius,
            hex: args.hex,
            strict: args.strict,
            out: cli.out,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.class().exit_code() as u8)
        }
    }
}

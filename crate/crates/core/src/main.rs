use std::path::PathBuf;
use std::process::ExitCode;


use clap::{Args, Parser, Subcommand};

use spectral_ser::config::RunConfig;
use spectral_ser::pipeline;
use spectral_ser::spectral::{LaplacianKind, Topology};
use spectral_ser::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-ser", version, about = "Spectral graph convolution for speech emotion recognition")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: `out_dir` from the config, else `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Extract node features from the WAV files of a manifest.
    Featurize {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train on every record of a feature manifest and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a checkpoint on a feature manifest.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// k-fold cross-validation on a feature manifest.
    Crossval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Dump a graph Fourier basis and check it against the Jacobi solver.
    InspectBasis {
        #[arg(long)]
        topology: Option<Topology>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        laplacian: Option<LaplacianKind>,
    },
    /// Write the synthetic corpus as feature CSVs plus a manifest.
    GenSynthetic,
}

fn required(path: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("no {what} given (flag or config key)")))
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.train.seed = seed;
    }
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.out_dir = Some(out.clone());
    let force = cli.common.force;
    let mut log = |line: &str| eprintln!("{line}");

    match cli.command {
        Command::Featurize { manifest } => {
            let manifest = required(manifest, &config.manifest, "manifest")?;
            let report = pipeline::featurize(&config, &manifest, &out, force, &mut log)?;
            println!("{}", report.manifest.display());
            return Ok(report.failures.is_empty());
        }
        Command::Train { manifest } => {
            let manifest = required(manifest, &config.manifest, "manifest")?;
            let report = pipeline::train(&config, &manifest, &out, force, &mut log)?;
            println!("{}", report.checkpoint.display());
        }
        Command::Evaluate {
            manifest,
            checkpoint,
        } => {
            let manifest = required(manifest, &config.manifest, "manifest")?;
            let checkpoint = checkpoint
                .or_else(|| config.checkpoint.clone())
                .unwrap_or_else(|| out.join("model.json"));
            let m = pipeline::evaluate(&config, &checkpoint, &manifest, &out, &mut log)?;
            println!("wa = {:.6}\nua = {:.6}", m.wa, m.ua);
        }
        Command::Crossval { manifest, folds } => {
            let manifest = required(manifest, &config.manifest, "manifest")?;
            if let Some(k) = folds {
                config.folds = k;
                config.validate()?;
            }
            let report = pipeline::crossval(&config, &manifest, &out, &mut log)?;
            print!("{}", report.to_csv());
        }
        Command::InspectBasis {
            topology,
            nodes,
            laplacian,
        } => {
            let report = pipeline::inspect_basis(
                topology.unwrap_or(config.model.topology),
                nodes.unwrap_or(config.model.nodes),
                laplacian.unwrap_or(config.model.laplacian),
                &out,
                &mut |_| {},
            )?;
            println!(
                "max_eigenvalue_deviation = {:e}\nmax_projector_deviation = {:e}",
                report.max_eigenvalue_deviation, report.max_projector_deviation
            );
        }
        Command::GenSynthetic => {
            let path = pipeline::gen_synthetic(&config, &out, force, &mut log)?;
            println!("{}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

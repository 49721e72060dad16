use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edlseg::metrics::reports_to_tsv;
use edlseg_cli::{
    cmd_evaluate, cmd_generate_data, cmd_grad_check, cmd_heatmap, cmd_kl_table, cmd_train, parse_methods, CliError,
    HeatmapSource, RunConfig,
};

#[derive(Parser)]
#[command(name = "edlseg", version, about = "Evidential OOD segmentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic shapes dataset and its manifest.
    GenerateData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `[data] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a network on `<data>/train.edsd`.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `[train] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score `<data>/eval.edsd` and print the metric table.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "uncertainty,max_softmax,entropy")]
        methods: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Source of `[eval] thresholds`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare analytic loss gradients with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print closed-form KL divergences to the Dir(a0) prior.
    KlTable,
    /// Export an uncertainty heatmap as a 16-bit PGM.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, requires = "index", conflicts_with = "image")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        index: Option<usize>,
        /// 8-bit binary PPM input instead of an eval image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::GenerateData { config, out, seed } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(s) = seed {
                cfg.data.seed = s;
            }
            let m = cmd_generate_data(&cfg, &out)?;
            println!(
                "wrote {} train / {} eval images to {} (seed {}, config sha256 {})",
                m.num_train,
                m.num_eval,
                out.display(),
                m.seed,
                m.config_sha256
            );
        }
        Command::Train { config, data, out, seed } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            let s = cmd_train(&cfg, &data, &out)?;
            println!(
                "trained {} iterations, final loss {:.6}; checkpoint {}",
                s.iterations,
                s.last.total,
                s.final_checkpoint.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            data,
            methods,
            workers,
            out,
            config,
        } => {
            let methods = parse_methods(&methods)?;
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let reports = cmd_evaluate(&checkpoint, &data, &methods, &cfg.eval.thresholds, workers)?;
            let table = reports_to_tsv(&reports);
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table)
                    .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
            }
        }
        Command::GradCheck { trials, seed } => {
            let report = cmd_grad_check(trials, seed)?;
            println!("{report}");
            if !report.passed() {
                return Ok(edlseg_cli::exit::CHECK_FAILED);
            }
        }
        Command::KlTable => print!("{}", cmd_kl_table()?),
        Command::Heatmap {
            checkpoint,
            data,
            index,
            image,
            out,
        } => {
            let source = match (&data, index, &image) {
                (Some(d), Some(i), None) => HeatmapSource::EvalImage { data: d, index: i },
                (None, None, Some(p)) => HeatmapSource::Ppm(p),
                _ => return Err(CliError::usage("give either --data with --index, or --image")),
            };
            let (w, h, _) = cmd_heatmap(&checkpoint, source, &out)?;
            println!("wrote {w}x{h} heatmap to {}", out.display());
        }
    }
    Ok(edlseg_cli::exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

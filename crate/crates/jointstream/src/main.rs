use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointstream::commands::{self, Failure, Overrides};
use jointstream::manifest::Split;
use jointstream::synth::SynthConfig;
use jointstream::Error;
use jointstream_core::imaging::PatchConfig;
use jointstream_core::{Domain, HeadKind};

#[derive(Parser)]
#[command(name = "jointstream", version, about = "Multi-label slide classification from joint spatial and frequency features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut tissue patches from the slides in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 640)]
        patch_size: usize,
        /// Defaults to half the patch size.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long, default_value_t = 0.3)]
        max_blank: f64,
    },
    /// Turn a patch index into one bag file per slide and domain.
    Features {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "rgb")]
        domains: Vec<Domain>,
        #[arg(long, default_value_t = commands::GRID)]
        grid: usize,
    },
    /// Train a head and write the checkpoint and run metadata.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a split with a checkpoint and write the report files.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to model.mrlp in the configured output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Write synthetic bags, a manifest and a starter config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        n_wsis: usize,
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 3.0)]
        difficulty: f64,
        #[arg(long)]
        two_domain: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    head: Option<HeadKind>,
    #[arg(long)]
    stream_mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<Domain>>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, head: self.head, stream_mode: self.stream_mode.clone(), domains: self.domains.clone() }
    }
}

fn report_failures(failures: &[Failure]) -> Result<(), Error> {
    for f in failures {
        eprintln!("error: {}: {}", f.wsi_id, f.message);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Partial { ids: failures.iter().map(|f| f.wsi_id.clone()).collect() })
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Extract { manifest, out, patch_size, stride, max_blank } => {
            let base = PatchConfig::with_patch_size(patch_size);
            let cfg = PatchConfig { stride: stride.unwrap_or(base.stride), max_blank, ..base };
            let outcome = commands::cmd_extract(&manifest, &out, &cfg)?;
            println!("{} patches written to {}", outcome.index.len(), out.display());
            report_failures(&outcome.failures)
        }
        Command::Features { index, manifest, out, domains, grid } => {
            let outcome = commands::cmd_features(&index, &manifest, &domains, grid, &out)?;
            println!("{} bag files written to {}", outcome.files.len(), out.display());
            report_failures(&outcome.failures)
        }
        Command::Train { run } => {
            let cfg = commands::load_config(&run.config, &run.overrides())?;
            let out = commands::cmd_train(&cfg)?;
            for r in &out.outcome.history {
                let show = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.4}"));
                println!("epoch {:>3}  loss {:.5}  val mAP {}  val AUC {}", r.epoch, r.train_loss, show(r.val_map), show(r.val_auc));
            }
            println!("checkpoint {}", out.checkpoint.display());
            Ok(())
        }
        Command::Eval { run, checkpoint, split } => {
            let cfg = commands::load_config(&run.config, &run.overrides())?;
            let checkpoint = checkpoint.unwrap_or_else(|| cfg.output.join(commands::CHECKPOINT_FILE));
            let out = commands::cmd_eval(&cfg, &checkpoint, split)?;
            print!("{}", jointstream::report::to_table(&out.report));
            println!("reports written to {}", out.dir.display());
            Ok(())
        }
        Command::Synth { out, seed, n_wsis, d, difficulty, two_domain } => {
            let min_d = if two_domain { 12 } else { 6 };
            if d < min_d {
                return Err(Error::Record { wsi_id: "synth".into(), message: format!("--d must be at least {min_d}") });
            }
            let manifest = commands::cmd_synth(&SynthConfig { seed, n_wsis, d, difficulty, two_domain }, &out)?;
            println!("{} slides written to {}", manifest.records.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

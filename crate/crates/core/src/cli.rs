//! Command-line front end. `voxsep <command> --help` lists the flags.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Profile, RunConfig, Variant};
use crate::error::{Error, Result};
use crate::eval::{median_report, sdr_sir, SeparationScore};
use crate::signal::{read_wav, write_wav};
use crate::training::{load_checkpoint, load_corpus, save_checkpoint, separate, EpochMetrics, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "voxsep", version, about = "Singing-voice separation: train, separate, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a corpus of track directories.
    Train(TrainArgs),
    /// Extract the voice from a mixture WAV file.
    Separate(SeparateArgs),
    /// Separate every corpus track and report median SDR/SIR.
    Evaluate(EvaluateArgs),
    /// Print the effective configuration as TOML.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Configuration file (TOML); flags override its values.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Named profile used when no configuration file is given.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint written after every epoch.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Per-epoch metrics log; defaults to `<out>.metrics.tsv`.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeparateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Overrides the checkpoint's inference variant.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Trained checkpoint; not needed with `--oracle`.
    #[arg(long, required_unless_present = "oracle")]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    /// Plain-text table; the CSV records go next to it with a `.csv` extension.
    #[arg(long)]
    report: PathBuf,
    /// Score the true vocals instead of model output.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    filter_len: Option<usize>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ProfileArgs {
    fn resolve(&self, fallback: Option<RunConfig>) -> Result<RunConfig> {
        let mut cfg = match (&self.config, self.profile, fallback) {
            (Some(path), _, _) => RunConfig::load(path)?,
            (None, Some(p), _) => RunConfig::for_profile(p),
            (None, None, Some(cfg)) => cfg,
            (None, None, None) => RunConfig::paper(),
        };
        if let Some(v) = self.variant {
            cfg.set_variant(v);
        }
        Ok(cfg)
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Usage(format!("corpus directory {} does not exist", path.display())))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn append_metrics(path: &Path, m: &EpochMetrics, header: bool) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if header {
        text.push_str("epoch\tmean_loss\tmean_lambda_rec\tmean_ri_iters\tsteps\tseconds\n");
    }
    text.push_str(&format!(
        "{}\t{}\t{}\t{}\t{}\t{:.3}\n",
        m.epoch, m.mean_loss, m.mean_lambda_rec, m.mean_ri_iters, m.steps, m.seconds
    ));
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    require_dir(&args.corpus)?;
    let resumed = args.resume.as_deref().map(load_checkpoint).transpose()?;
    let mut cfg = args.profile.resolve(resumed.as_ref().map(|c| c.config.clone()))?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if args.max_steps.is_some() {
        cfg.train.max_steps = args.max_steps;
    }
    if let Some(lr) = args.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.paths.corpus = Some(args.corpus.clone());
    cfg.paths.checkpoint = Some(args.out.clone());
    cfg.validate()?;

    let tracks = load_corpus(&args.corpus)?;
    let examples = tracks
        .iter()
        .map(|t| crate::training::build_examples(t, &cfg.stft, &cfg.model))
        .collect::<Result<Vec<_>>>()?
        .concat();
    log::info!("{} tracks, {} training subsequences", tracks.len(), examples.len());

    let mut trainer = match resumed {
        Some(ck) => Trainer::resume(ck, cfg)?,
        None => Trainer::new(cfg)?,
    };
    let metrics_path = args.metrics.unwrap_or_else(|| with_suffix(&args.out, ".metrics.tsv"));
    let mut header = !(args.resume.is_some() && metrics_path.exists());
    if header && metrics_path.exists() {
        std::fs::remove_file(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    }
    let out = args.out;
    trainer.fit(&examples, |m, t| {
        save_checkpoint(&t.checkpoint(), &out)?;
        append_metrics(&metrics_path, m, header)?;
        header = false;
        Ok(())
    })?;
    if trainer.epoch() == 0 || !out.exists() {
        save_checkpoint(&trainer.checkpoint(), &out)?;
    }
    println!(
        "trained {} epochs ({} steps); checkpoint {}",
        trainer.epoch(),
        trainer.step(),
        out.display()
    );
    Ok(())
}

fn cmd_separate(args: SeparateArgs) -> Result<()> {
    let ck = load_checkpoint(&args.model)?;
    let mut cfg = ck.config.clone();
    if let Some(v) = args.variant {
        cfg.set_variant(v);
    }
    let mixture = read_wav(&args.input)?;
    let out = separate(&mixture, &ck.params, &cfg)?;
    write_wav(&out.voice, &args.output)?;
    let iters = &out.ri_iterations;
    println!(
        "wrote {} ({} samples); {} subsequences, recurrent-inference iterations mean {:.2} min {} max {}",
        args.output.display(),
        out.voice.len(),
        iters.len(),
        out.mean_ri_iterations(),
        iters.iter().min().copied().unwrap_or(0),
        iters.iter().max().copied().unwrap_or(0)
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    require_dir(&args.corpus)?;
    let model = args.model.as_deref().map(load_checkpoint).transpose()?;
    let mut cfg = model.as_ref().map_or_else(RunConfig::paper, |c| c.config.clone());
    if let Some(v) = args.variant {
        cfg.set_variant(v);
    }
    if let Some(n) = args.filter_len {
        cfg.eval.proj_filter_len = n;
    }
    cfg.eval.validate()?;
    let tracks = load_corpus(&args.corpus)?;
    let mut scores = Vec::with_capacity(tracks.len());
    for track in &tracks {
        let estimate = match (&model, args.oracle) {
            (_, true) => track.voice.samples.clone(),
            (Some(ck), false) => separate(&track.mixture(), &ck.params, &cfg)?.voice.samples,
            (None, false) => return Err(Error::Usage("--model is required without --oracle".into())),
        };
        let refs = [&track.voice.samples[..], &track.accompaniment.samples[..]];
        let s = sdr_sir(&estimate, &refs, 0, &cfg.eval)?;
        log::info!("{}: SDR {:.2} dB, SIR {:.2} dB", track.id, s.sdr, s.sir);
        scores.push(SeparationScore {
            track_id: track.id.clone(),
            ..s
        });
    }
    let report = median_report(&scores)?;
    let label = if args.oracle { "oracle" } else { cfg.variant.name() };
    let mut text = report.to_text(label);
    text.push_str("\n# effective configuration\n");
    for line in cfg.to_toml().lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    std::fs::write(&args.report, &text).map_err(|e| Error::io(&args.report, e))?;
    let csv_path = args.report.with_extension("csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    report.write_csv(file)?;
    print!("{}", report.to_text(label));
    Ok(())
}

fn cmd_config(args: ConfigArgs) -> Result<()> {
    let cfg = args.profile.resolve(None)?;
    cfg.validate()?;
    match args.out {
        Some(path) => cfg.save(path),
        None => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Separate(a) => cmd_separate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Config(a) => cmd_config(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use harmtrace::manifest::{InputManifest, RunConfig};
use harmtrace::pipeline::{run, Stage, RUN_MANIFEST};
use harmtrace::stats::DedupMode;
use harmtrace::synth::{generate, SynthConfig};
use harmtrace::verify::{verify_run, verify_synthetic, VerifyReport, VERIFY_REPORT};
use harmtrace::{Error, Result};

/// Harm analysis of papers citing retracted work, over citation distances 1 to 6.
#[derive(Debug, Parser)]
#[command(name = "harmtrace", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HARMTRACE_THREADS")]
    threads: Option<usize>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean the inputs and report drop counters.
    Ingest(RunArgs),
    /// Build the citation graph and its cache.
    Build(RunArgs),
    /// Compute frontier levels (needs `build`).
    Frontiers(RunArgs),
    /// Compute harm vectors (needs `frontiers`).
    Harm(RunArgs),
    /// Emit every table family (needs `harm`).
    Stats(RunArgs),
    /// Run every stage.
    All(RunArgs),
    /// Write a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Check the pipeline against the brute-force oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Output directory (overrides the manifest).
    #[arg(long, env = "HARMTRACE_OUTPUT")]
    output: Option<PathBuf>,
    #[arg(long, env = "HARMTRACE_CUTOFF_YEAR")]
    cutoff_year: Option<i32>,
    #[arg(long, env = "HARMTRACE_MAX_DISTANCE")]
    max_distance: Option<u8>,
    /// both, dedup-only or repeats-only.
    #[arg(long, env = "HARMTRACE_DEDUP")]
    dedup: Option<DedupMode>,
    /// Keep the citing paper inside its own comparator cohort.
    #[arg(long, env = "HARMTRACE_NO_SELF_EXCLUDE")]
    no_self_exclude: bool,
    /// Leave papers with only a publication year out of the pre/post split.
    #[arg(long, env = "HARMTRACE_EXCLUDE_YEAR_ONLY")]
    exclude_year_only: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(y) = self.cutoff_year {
            cfg.cutoff_year = y;
        }
        if let Some(d) = self.max_distance {
            cfg.max_distance = d;
        }
        if let Some(m) = self.dedup {
            cfg.dedup = m;
        }
        if self.no_self_exclude {
            cfg.self_exclude = false;
        }
        if self.exclude_year_only {
            cfg.exclude_year_only = true;
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML or JSON manifest naming the four inputs.
    #[arg(long, env = "HARMTRACE_MANIFEST")]
    manifest: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = "HARMTRACE_SEED", default_value_t = 42)]
    seed: u64,
    /// Directory receiving the dataset.
    #[arg(long, env = "HARMTRACE_OUTPUT")]
    output: PathBuf,
    #[arg(long, default_value_t = 500)]
    papers: usize,
    #[arg(long, default_value_t = 8)]
    venues: usize,
    #[arg(long, default_value_t = 5)]
    fields: usize,
    #[arg(long, default_value_t = 2000)]
    first_year: i32,
    #[arg(long, default_value_t = 2015)]
    last_year: i32,
    #[arg(long, default_value_t = 0.04)]
    retraction_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    attachment_exponent: f64,
    #[arg(long, default_value_t = 5.0)]
    mean_out_degree: f64,
    /// Emit clean files only.
    #[arg(long)]
    no_noise: bool,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n_papers: self.papers,
            n_venues: self.venues,
            n_fields: self.fields,
            year_range: (self.first_year, self.last_year),
            retraction_fraction: self.retraction_fraction,
            attachment_exponent: self.attachment_exponent,
            mean_out_degree: self.mean_out_degree,
            noise: !self.no_noise,
        }
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Verify on this dataset instead of a synthetic one.
    #[arg(long, env = "HARMTRACE_MANIFEST")]
    manifest: Option<PathBuf>,
    #[arg(long, env = "HARMTRACE_SEED", default_value_t = 42)]
    seed: u64,
    /// Size of the synthetic corpus.
    #[arg(long, default_value_t = 500)]
    papers: usize,
    #[command(flatten)]
    overrides: Overrides,
}

fn load_config(manifest: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut cfg = InputManifest::load(manifest)?.resolve(base);
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn print_report(report: &VerifyReport) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        Err(Error::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

fn verify(args: &VerifyArgs) -> Result<()> {
    if let Some(manifest) = &args.manifest {
        let mut cfg = load_config(manifest, &args.overrides)?;
        if args.overrides.output.is_none() {
            cfg.output = cfg.output.join("verify");
        }
        let report = verify_run(&cfg, None, manifest.display().to_string())?;
        return print_report(&report);
    }
    let config = SynthConfig {
        seed: args.seed,
        n_papers: args.papers,
        ..SynthConfig::default()
    };
    let scratch;
    let workdir = match &args.overrides.output {
        Some(dir) => dir.clone(),
        None => {
            scratch = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            scratch.path().to_path_buf()
        }
    };
    let has_run_overrides = args.overrides.max_distance.is_some()
        || args.overrides.dedup.is_some()
        || args.overrides.no_self_exclude
        || args.overrides.exclude_year_only
        || args.overrides.cutoff_year.is_some();
    let report = if has_run_overrides {
        let dataset = generate(&config)?;
        let data_dir = workdir.join("data");
        let manifest = dataset.write_to(&data_dir)?;
        let mut cfg = load_config(&manifest, &args.overrides)?;
        cfg.output = workdir.join("out");
        let truth = (args.overrides.cutoff_year.is_none()).then_some(&dataset.truth);
        verify_run(&cfg, truth, format!("synthetic seed {}", config.seed))?
    } else {
        verify_synthetic(&config, &workdir)?
    };
    log::info!("report written to {}", workdir.join("out").join(VERIFY_REPORT).display());
    print_report(&report)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let stage = |args: &RunArgs, stage: Stage| -> Result<()> {
        let cfg = load_config(&args.manifest, &args.overrides)?;
        let outcome = run(stage, &cfg)?;
        log::info!(
            "{} done; {} files listed in {}",
            stage.name(),
            outcome.manifest.outputs.len(),
            cfg.output.join(RUN_MANIFEST).display()
        );
        Ok(())
    };
    match &cli.command {
        Command::Ingest(a) => stage(a, Stage::Ingest),
        Command::Build(a) => stage(a, Stage::Build),
        Command::Frontiers(a) => stage(a, Stage::Frontiers),
        Command::Harm(a) => stage(a, Stage::Harm),
        Command::Stats(a) => stage(a, Stage::Stats),
        Command::All(a) => stage(a, Stage::All),
        Command::Synth(a) => {
            let dataset = generate(&a.config())?;
            let manifest = dataset.write_to(&a.output)?;
            log::info!(
                "{} papers, {} edges, {} retractions; manifest at {}",
                dataset.truth.papers.len(),
                dataset.edges.len(),
                dataset.truth.seeds.len(),
                manifest.display()
            );
            Ok(())
        }
        Command::Verify(a) => verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind().exit_code() as u8);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind().exit_code() as u8)
        }
    }
}

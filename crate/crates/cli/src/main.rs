use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asttf::experiment::{run_experiment, ExperimentConfig, Method, RunReport};
use asttf::signal::{generate_bat_chirp, generate_test_signal, write_signal};
use asttf::Error;

#[derive(Parser)]
#[command(name = "asttf", version, about = "Sparse time-frequency analysis by atomic norm soft thresholding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or a builtin preset.
    Run(RunArgs),
    /// Write a synthetic signal file.
    Generate(GenerateArgs),
    /// Analyze one signal file with one method.
    Analyze(Box<AnalyzeArgs>),
}

#[derive(Args)]
struct RunArgs {
    /// Config file; its keys override the preset when both are given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1, table2 or bat.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// eq23 (two-component test signal) or bat (echolocation-style chirp).
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    length: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// ast_stf, stft, reassignment or stft_l1.
    #[arg(long)]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the file header.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// `none`, `sigma X` or `snr_db X`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frame_length: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    window_sigma_ratio: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    oversample: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    nfft: Option<usize>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    n_freq_bins: Option<usize>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn apply_sets(cfg: &mut ExperimentConfig, sets: &[String]) -> asttf::Result<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("expected KEY=VALUE, got '{s}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn run_config(args: &RunArgs) -> asttf::Result<ExperimentConfig> {
    let mut cfg = match (&args.preset, &args.config) {
        (None, None) => return Err(Error::config("config", "give --config, --preset or both")),
        (Some(p), _) => ExperimentConfig::preset(p)?,
        (None, Some(_)) => ExperimentConfig::default(),
    };
    if let Some(path) = &args.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    apply_sets(&mut cfg, &args.set)?;
    cfg.validate()?;
    Ok(cfg)
}

fn analyze_config(args: &AnalyzeArgs) -> asttf::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let method = Method::parse(&args.method)
        .ok_or_else(|| Error::config("method", format!("unknown method '{}'", args.method)))?;
    cfg.methods = vec![method];
    cfg.set("input", &args.input.to_string_lossy())?;
    cfg.output_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out/analyze"));
    let pairs: [(&str, Option<String>); 16] = [
        ("sample_rate", args.sample_rate.map(|v| v.to_string())),
        ("noise", args.noise.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
        ("frame.length", args.frame_length.map(|v| v.to_string())),
        ("frame.hop", args.hop.map(|v| v.to_string())),
        ("frame.window_sigma_ratio", args.window_sigma_ratio.clone()),
        ("ast.tau", args.tau.clone()),
        ("ast.rho", args.rho.map(|v| v.to_string())),
        ("ast.max_iters", args.max_iters.map(|v| v.to_string())),
        ("ast.tol", args.tol.map(|v| v.to_string())),
        ("ast.oversample", args.oversample.map(|v| v.to_string())),
        ("ast.epsilon", args.epsilon.map(|v| v.to_string())),
        ("baselines.nfft", args.nfft.map(|v| v.to_string())),
        ("baselines.lambda", args.lambda.clone()),
        ("n_freq_bins", args.n_freq_bins.map(|v| v.to_string())),
        ("baselines.max_iters", args.max_iters.map(|v| v.to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    apply_sets(&mut cfg, &args.set)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &RunReport, cfg: &ExperimentConfig) {
    print!("{}", report.report_csv());
    for f in &report.failures {
        eprintln!("method {} failed: {}", f.method, f.message);
    }
    eprintln!("outputs written to {}", cfg.output_dir.display());
}

fn execute(cfg: &ExperimentConfig) -> asttf::Result<ExitCode> {
    let report = run_experiment(cfg)?;
    print_report(&report, cfg);
    Ok(if report.is_complete() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn generate(args: &GenerateArgs) -> asttf::Result<ExitCode> {
    let signal = match args.preset.as_str() {
        "eq23" | "synthetic" => {
            generate_test_signal(args.sample_rate.unwrap_or(1024.0), args.length.unwrap_or(1024))?
        }
        "bat" => generate_bat_chirp(args.sample_rate.unwrap_or(370_370.37), args.length.unwrap_or(400))?,
        other => return Err(Error::config("preset", format!("unknown signal preset '{other}', expected eq23 or bat"))),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_signal(&args.out, &signal)?;
    eprintln!("wrote {} samples to {}", signal.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_config(args).and_then(|cfg| execute(&cfg)),
        Command::Generate(args) => generate(args),
        Command::Analyze(args) => analyze_config(args).and_then(|cfg| execute(&cfg)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

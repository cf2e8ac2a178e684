//! Command-line frontend: training and prediction plumbing, a blob-data
//! generator, spectrum inspection, and the two benchmark harnesses.
//!
//! Every value can come from three places, in descending precedence: a
//! command-line flag, a key in an optional TOML file passed as `--config`
//! (keys match the flag names, unknown keys are rejected), and a built-in
//! default.  The resolved configuration is echoed to stderr so a run can be
//! reproduced from its log alone.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 finished with warnings
//! (the model is still written, flagged `converged: false`).  The
//! `KREIN_SVM_THREADS` environment variable caps library parallelism;
//! `0` or absent means sequential.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use krein_svm::data::{load_auto, make_blobs, save_csv, save_libsvm, BlobConfig};
use krein_svm::experiments::{
    run_comparison, run_lambda_sweep, ComparisonConfig, SweepConfig, DEFAULT_MULTIPLIERS,
};
use krein_svm::kernels::{gram_matrix, KernelSpec};
use krein_svm::linalg::{eig_sym, min_eigenvalue_estimate, EigEstimate};
use krein_svm::solver::{
    accuracy, predict, train_ksvm, train_triksvm, FitResult, LambdaMode, SolverConfig,
    TrainedModel,
};

// ──────────────────────────── CLI definition ────────────────────────────

#[derive(Parser)]
#[command(
    name = "krein-svm",
    version,
    about = "SVM training and diagnostics for indefinite kernels",
    after_help = "Flags override --config TOML entries, which override built-in defaults.\n\
                  KREIN_SVM_THREADS caps library parallelism (0 or absent = sequential).\n\
                  Exit codes: 0 success, 1 usage or I/O error, 2 finished with warnings."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier and write the model as JSON
    Train(TrainArgs),
    /// Score a data file with a trained model
    Predict(PredictArgs),
    /// Generate a Gaussian-blob dataset
    GenData(GenDataArgs),
    /// Report the least eigenvalue of a kernel matrix
    Spectrum(SpectrumArgs),
    /// Sweep the diagonal shift and measure decision agreement
    BenchLambda(BenchLambdaArgs),
    /// Compare the shift solver against the eigen-flip baseline
    BenchCompare(BenchCompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training data: .csv (f0..fN,label header) or LIBSVM
    #[arg(long)]
    data: Option<PathBuf>,
    /// linear | rbf=G | tanh[=A,R] | precomputed=PATH [default: tanh]
    #[arg(long)]
    kernel: Option<String>,
    /// Box constraint, > 0 [default: 1]
    #[arg(long = "C")]
    c: Option<f64>,
    /// auto-exact | auto-power | auto-gershgorin | fixed=V [default: auto-exact]
    #[arg(long)]
    lambda_mode: Option<String>,
    /// trik | ksvm [default: trik]
    #[arg(long)]
    solver: Option<String>,
    /// Where the model JSON is written [default: model.json]
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Pivot budget [default: 50 per training point]
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    data: Option<PathBuf>,
    kernel: Option<String>,
    #[serde(alias = "C")]
    c: Option<f64>,
    lambda_mode: Option<String>,
    solver: Option<String>,
    model_out: Option<PathBuf>,
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON produced by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Data to score: .csv (label column optional) or LIBSVM
    #[arg(long)]
    data: Option<PathBuf>,
    /// Optional CSV output, one score,label row per input point
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictFile {
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    scores_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Points to generate [default: 200]
    #[arg(long)]
    samples: Option<usize>,
    /// Feature dimension [default: 5]
    #[arg(long)]
    dim: Option<usize>,
    /// Cluster centers, even so classes split equally [default: 4]
    #[arg(long)]
    centers: Option<usize>,
    /// MIN,MAX box the centers are drawn from [default: -10,10]
    #[arg(long, allow_hyphen_values = true)]
    center_box: Option<String>,
    /// Within-cluster standard deviation [default: 2]
    #[arg(long)]
    std: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output path: .csv writes headed CSV, else LIBSVM [default: blobs.csv]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDataFile {
    samples: Option<usize>,
    dim: Option<usize>,
    centers: Option<usize>,
    center_box: Option<String>,
    std: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data whose kernel matrix is inspected
    #[arg(long)]
    data: Option<PathBuf>,
    /// linear | rbf=G | tanh[=A,R] | precomputed=PATH [default: tanh]
    #[arg(long)]
    kernel: Option<String>,
    /// exact | power | gershgorin [default: exact]
    #[arg(long)]
    method: Option<String>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumFile {
    data: Option<PathBuf>,
    kernel: Option<String>,
    method: Option<String>,
}

#[derive(Args)]
struct BenchLambdaArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Points to generate [default: 400]
    #[arg(long)]
    samples: Option<usize>,
    /// Feature dimension [default: 5]
    #[arg(long)]
    dim: Option<usize>,
    /// Cluster centers [default: 4]
    #[arg(long)]
    centers: Option<usize>,
    /// MIN,MAX box the centers are drawn from [default: -2,2]
    #[arg(long, allow_hyphen_values = true)]
    center_box: Option<String>,
    /// Within-cluster standard deviation [default: 0.5]
    #[arg(long)]
    std: Option<f64>,
    /// Generator seed [default: 17]
    #[arg(long)]
    seed: Option<u64>,
    /// Held-out fraction for the agreement measure [default: 0.5]
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Train/test shuffle seed [default: 9]
    #[arg(long)]
    split_seed: Option<u64>,
    /// linear | rbf=G | tanh[=A,R] | precomputed=PATH [default: tanh=1,-1]
    #[arg(long)]
    kernel: Option<String>,
    /// Box constraint, > 0 [default: 1]
    #[arg(long = "C")]
    c: Option<f64>,
    /// Ascending shift multipliers, first must be 1 [default: 1,2,5,10,20]
    #[arg(long)]
    multipliers: Option<String>,
    /// Output directory [default: results/lambda]
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchLambdaFile {
    samples: Option<usize>,
    dim: Option<usize>,
    centers: Option<usize>,
    center_box: Option<String>,
    std: Option<f64>,
    seed: Option<u64>,
    test_fraction: Option<f64>,
    split_seed: Option<u64>,
    kernel: Option<String>,
    #[serde(alias = "C")]
    c: Option<f64>,
    multipliers: Option<String>,
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCompareArgs {
    /// TOML file supplying defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training-set sizes, comma separated [default: 100,200,400]
    #[arg(long)]
    sizes: Option<String>,
    /// Dataset seeds, comma separated [default: 1,2,3]
    #[arg(long)]
    seeds: Option<String>,
    /// Feature dimension [default: 25]
    #[arg(long)]
    dim: Option<usize>,
    /// Cluster centers [default: 2]
    #[arg(long)]
    centers: Option<usize>,
    /// MIN,MAX box the centers are drawn from [default: -2,2]
    #[arg(long, allow_hyphen_values = true)]
    center_box: Option<String>,
    /// Within-cluster standard deviation [default: 1]
    #[arg(long)]
    std: Option<f64>,
    /// Held-out fraction [default: 0.5]
    #[arg(long)]
    test_fraction: Option<f64>,
    /// linear | rbf=G | tanh[=A,R] | precomputed=PATH [default: tanh=0.02,-1]
    #[arg(long)]
    kernel: Option<String>,
    /// Box constraint, > 0 [default: 1]
    #[arg(long = "C")]
    c: Option<f64>,
    /// Output directory [default: results/compare]
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchCompareFile {
    sizes: Option<String>,
    seeds: Option<String>,
    dim: Option<usize>,
    centers: Option<usize>,
    center_box: Option<String>,
    std: Option<f64>,
    test_fraction: Option<f64>,
    kernel: Option<String>,
    #[serde(alias = "C")]
    c: Option<f64>,
    out_dir: Option<PathBuf>,
}

// ──────────────────────────── entry point ────────────────────────────

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits with 2 on usage errors by default, but this tool
            // reserves 2 for converged-with-warnings, so usage errors are 1.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // Library diagnostics (shift choice, pivot trace) surface via RUST_LOG.
    env_logger::Builder::from_default_env().format_timestamp(None).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::GenData(args) => cmd_gen_data(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::BenchLambda(args) => cmd_bench_lambda(args),
        Command::BenchCompare(args) => cmd_bench_compare(args),
    }
}

// ──────────────────────────── subcommands ────────────────────────────

fn cmd_train(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let file: TrainFile = load_overrides(args.config.as_deref())?;
    let data_path = require(args.data.or(file.data), "data")?;
    let kernel_arg = parse_kernel(&args.kernel.or(file.kernel).unwrap_or_else(|| "tanh".into()))?;
    let c = args.c.or(file.c).unwrap_or(1.0);
    let lambda_mode = parse_lambda_mode(
        &args.lambda_mode.or(file.lambda_mode).unwrap_or_else(|| "auto-exact".into()),
    )?;
    let solver = parse_solver(&args.solver.or(file.solver).unwrap_or_else(|| "trik".into()))?;
    let model_out =
        args.model_out.or(file.model_out).unwrap_or_else(|| PathBuf::from("model.json"));
    let max_iterations = args.max_iterations.or(file.max_iterations);

    let dataset = load_auto(&data_path)
        .with_context(|| format!("reading {}", data_path.display()))?
        .into_dataset()
        .context("training needs a labeled data file")?;
    let spec = kernel_arg.to_spec(dataset.points.dim());
    eprintln!(
        "resolved config: command=train data={} kernel={} C={} lambda_mode={} solver={} \
         model_out={} max_iterations={}",
        data_path.display(),
        kernel_label(&spec),
        c,
        lambda_mode_label(lambda_mode),
        solver_label(solver),
        model_out.display(),
        max_iterations.map_or_else(|| "auto".into(), |m: usize| m.to_string()),
    );

    let config = SolverConfig { c, lambda_mode, max_iterations, ..SolverConfig::default() };
    let start = Instant::now();
    let fit: FitResult = match solver {
        SolverChoice::Trik => train_triksvm(&dataset, &spec, &config)?,
        SolverChoice::Ksvm => train_ksvm(&dataset, &spec, &config)?,
    };
    let time_s = start.elapsed().as_secs_f64();
    eprintln!("resolved lambda: {:e}", fit.model.lambda);

    fit.model
        .save(&model_out)
        .with_context(|| format!("writing {}", model_out.display()))?;
    println!(
        "method={} l={} sv={} bsv={} iterations={} lambda={:e} time_s={:.3}",
        fit.model.diagnostics.method,
        dataset.len(),
        fit.report.sv.len(),
        fit.report.bsv.len(),
        fit.report.iterations,
        fit.model.lambda,
        time_s,
    );
    if !fit.report.converged {
        eprintln!(
            "warning: stopped before reaching the optimality tolerance; \
             the saved model is flagged converged=false"
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(args: PredictArgs) -> anyhow::Result<ExitCode> {
    let file: PredictFile = load_overrides(args.config.as_deref())?;
    let model_path = require(args.model.or(file.model), "model")?;
    let data_path = require(args.data.or(file.data), "data")?;
    let scores_out = args.scores_out.or(file.scores_out);

    let model = TrainedModel::load(&model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let loaded = load_auto(&data_path)
        .with_context(|| format!("reading {}", data_path.display()))?;
    eprintln!(
        "resolved config: command=predict model={} data={} scores_out={} model_lambda={:e}",
        model_path.display(),
        data_path.display(),
        scores_out.as_deref().map_or_else(|| "none".into(), |p| p.display().to_string()),
        model.lambda,
    );

    let points = loaded.points();
    let (labels, scores) =
        predict(&model, points).with_context(|| format!("scoring {}", data_path.display()))?;
    match loaded.labels() {
        Some(truth) => println!("accuracy={} n={}", accuracy(&labels, truth), points.len()),
        None => println!("scored n={} (no labels in input)", points.len()),
    }
    if let Some(path) = scores_out {
        let mut out = String::from("score,label\n");
        for (s, l) in scores.iter().zip(&labels) {
            out.push_str(&format!("{s},{l}\n"));
        }
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_data(args: GenDataArgs) -> anyhow::Result<ExitCode> {
    let file: GenDataFile = load_overrides(args.config.as_deref())?;
    let samples = args.samples.or(file.samples).unwrap_or(200);
    let dim = args.dim.or(file.dim).unwrap_or(5);
    let centers = args.centers.or(file.centers).unwrap_or(4);
    let center_box = match args.center_box.or(file.center_box) {
        Some(text) => parse_pair("center-box", &text)?,
        None => (-10.0, 10.0),
    };
    let std = args.std.or(file.std).unwrap_or(2.0);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("blobs.csv"));
    eprintln!(
        "resolved config: command=gen-data samples={samples} dim={dim} centers={centers} \
         center_box={},{} std={std} seed={seed} out={}",
        center_box.0,
        center_box.1,
        out.display(),
    );

    let config = BlobConfig {
        n_samples: samples,
        dimension: dim,
        n_centers: centers,
        center_box,
        cluster_std: std,
        seed,
    };
    let dataset = make_blobs(&config)?;
    let is_csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        save_csv(&dataset, &out)
    } else {
        save_libsvm(&dataset, &out)
    }
    .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} points in {} dimensions to {}", dataset.len(), dim, out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(args: SpectrumArgs) -> anyhow::Result<ExitCode> {
    let file: SpectrumFile = load_overrides(args.config.as_deref())?;
    let data_path = require(args.data.or(file.data), "data")?;
    let kernel_arg = parse_kernel(&args.kernel.or(file.kernel).unwrap_or_else(|| "tanh".into()))?;
    let method = parse_spectrum_method(&args.method.or(file.method).unwrap_or_else(|| "exact".into()))?;

    let loaded = load_auto(&data_path)
        .with_context(|| format!("reading {}", data_path.display()))?;
    let points = loaded.points();
    if points.is_empty() {
        bail!("{} holds no points", data_path.display());
    }
    let spec = kernel_arg.to_spec(points.dim());
    eprintln!(
        "resolved config: command=spectrum data={} kernel={} method={}",
        data_path.display(),
        kernel_label(&spec),
        method.label(),
    );

    let gram = gram_matrix(&spec, points)?;
    println!("matrix size: {0} x {0}", gram.n());
    match method {
        SpectrumMethod::Exact => {
            let eigen = eig_sym(&gram).context("exact eigendecomposition")?;
            println!("lambda_min (exact): {:e}", eigen.values[0]);
            let k = eigen.values.len().min(5);
            println!("{k} smallest eigenvalues: {}", join_scientific(&eigen.values[..k]));
            println!(
                "{k} largest eigenvalues: {}",
                join_scientific(&eigen.values[eigen.values.len() - k..]),
            );
        }
        SpectrumMethod::Power => {
            let value = min_eigenvalue_estimate(&gram, EigEstimate::ShiftedPower)
                .context("power iteration")?;
            println!("lambda_min (power): {value:e}");
        }
        SpectrumMethod::Gershgorin => {
            let value = min_eigenvalue_estimate(&gram, EigEstimate::Gershgorin)?;
            println!("lambda_min (gershgorin): {value:e}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench_lambda(args: BenchLambdaArgs) -> anyhow::Result<ExitCode> {
    let file: BenchLambdaFile = load_overrides(args.config.as_deref())?;
    let defaults = SweepConfig::default();
    let dim = args.dim.or(file.dim).unwrap_or(defaults.data.dimension);
    let kernel = match args.kernel.or(file.kernel) {
        Some(text) => parse_kernel(&text)?.to_spec(dim),
        None => defaults.kernel.clone(),
    };
    let center_box = match args.center_box.or(file.center_box) {
        Some(text) => parse_pair("center-box", &text)?,
        None => defaults.data.center_box,
    };
    let multipliers = match args.multipliers.or(file.multipliers) {
        Some(text) => parse_f64_list("multipliers", &text)?,
        None => DEFAULT_MULTIPLIERS.to_vec(),
    };
    let out_dir = args.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("results/lambda"));
    let config = SweepConfig {
        data: BlobConfig {
            n_samples: args.samples.or(file.samples).unwrap_or(defaults.data.n_samples),
            dimension: dim,
            n_centers: args.centers.or(file.centers).unwrap_or(defaults.data.n_centers),
            center_box,
            cluster_std: args.std.or(file.std).unwrap_or(defaults.data.cluster_std),
            seed: args.seed.or(file.seed).unwrap_or(defaults.data.seed),
        },
        test_fraction: args.test_fraction.or(file.test_fraction).unwrap_or(defaults.test_fraction),
        split_seed: args.split_seed.or(file.split_seed).unwrap_or(defaults.split_seed),
        kernel,
        c: args.c.or(file.c).unwrap_or(defaults.c),
    };
    eprintln!(
        "resolved config: command=bench-lambda samples={} dim={} centers={} center_box={},{} \
         std={} seed={} test_fraction={} split_seed={} kernel={} C={} multipliers={} out_dir={}",
        config.data.n_samples,
        config.data.dimension,
        config.data.n_centers,
        config.data.center_box.0,
        config.data.center_box.1,
        config.data.cluster_std,
        config.data.seed,
        config.test_fraction,
        config.split_seed,
        kernel_label(&config.kernel),
        config.c,
        join_plain(&multipliers),
        out_dir.display(),
    );

    let result = run_lambda_sweep(&config, &multipliers)?;
    println!("base lambda: {:e}", result.base_lambda);
    for r in &result.records {
        println!(
            "multiplier={} lambda={:e} accuracy_test={} iterations={} sv={}",
            r.multiplier, r.lambda, r.accuracy_test, r.iterations, r.sv_count,
        );
    }
    for f in &result.failures {
        println!("multiplier={} lambda={:e} failed: {}", f.multiplier, f.lambda, f.error);
    }
    println!("minimum pairwise agreement: {}", result.min_agreement());
    result.write_files(&out_dir)?;
    println!(
        "wrote lambda_sweep.csv, agreement.csv, lambda_sweep.json to {}",
        out_dir.display(),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench_compare(args: BenchCompareArgs) -> anyhow::Result<ExitCode> {
    let file: BenchCompareFile = load_overrides(args.config.as_deref())?;
    let defaults = ComparisonConfig::default();
    let sizes = match args.sizes.or(file.sizes) {
        Some(text) => parse_usize_list("sizes", &text)?,
        None => vec![100, 200, 400],
    };
    let seeds = match args.seeds.or(file.seeds) {
        Some(text) => parse_u64_list("seeds", &text)?,
        None => vec![1, 2, 3],
    };
    let dim = args.dim.or(file.dim).unwrap_or(defaults.template.dimension);
    let kernel = match args.kernel.or(file.kernel) {
        Some(text) => parse_kernel(&text)?.to_spec(dim),
        None => KernelSpec::Tanh { a: 0.02, r: -1.0 },
    };
    let center_box = match args.center_box.or(file.center_box) {
        Some(text) => parse_pair("center-box", &text)?,
        None => defaults.template.center_box,
    };
    let threads = threads_from_env()?;
    let out_dir =
        args.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("results/compare"));
    let config = ComparisonConfig {
        template: BlobConfig {
            dimension: dim,
            n_centers: args.centers.or(file.centers).unwrap_or(defaults.template.n_centers),
            center_box,
            cluster_std: args.std.or(file.std).unwrap_or(defaults.template.cluster_std),
            ..defaults.template
        },
        test_fraction: args.test_fraction.or(file.test_fraction).unwrap_or(defaults.test_fraction),
        c: args.c.or(file.c).unwrap_or(defaults.c),
        threads,
    };
    eprintln!(
        "resolved config: command=bench-compare sizes={} seeds={} dim={} centers={} \
         center_box={},{} std={} test_fraction={} kernel={} C={} threads={} out_dir={}",
        join_plain(&sizes),
        join_plain(&seeds),
        config.template.dimension,
        config.template.n_centers,
        config.template.center_box.0,
        config.template.center_box.1,
        config.template.cluster_std,
        config.test_fraction,
        kernel_label(&kernel),
        config.c,
        config.threads,
        out_dir.display(),
    );

    let result = run_comparison(&sizes, &seeds, &kernel, &config)?;
    println!(
        "mean test accuracy: trik={} ksvm={}",
        result.mean_test_accuracy(|r| &r.trik),
        result.mean_test_accuracy(|r| &r.ksvm),
    );
    let failed = result
        .records
        .iter()
        .flat_map(|r| [&r.trik, &r.ksvm])
        .filter(|outcome| outcome.record().is_none())
        .count();
    if failed > 0 {
        println!("failed runs: {failed} (details in comparison.json)");
    }
    result.write_files(&out_dir)?;
    println!(
        "wrote comparison.csv, timing_loglog.csv, comparison.json to {}",
        out_dir.display(),
    );
    Ok(ExitCode::SUCCESS)
}

// ──────────────────────────── flag parsing ────────────────────────────

/// Kernel choice as written on the command line; `tanh` without parameters
/// resolves against the data dimension (`a = 1/d`, `r = -1`).
#[derive(Clone, Debug, PartialEq)]
enum KernelArg {
    Linear,
    Rbf(f64),
    TanhDataDriven,
    Tanh(f64, f64),
    Precomputed(PathBuf),
}

impl KernelArg {
    fn to_spec(&self, dimension: usize) -> KernelSpec {
        match self {
            KernelArg::Linear => KernelSpec::Linear,
            KernelArg::Rbf(gamma) => KernelSpec::Rbf { gamma: *gamma },
            KernelArg::TanhDataDriven => KernelSpec::tanh_defaults(dimension),
            KernelArg::Tanh(a, r) => KernelSpec::Tanh { a: *a, r: *r },
            KernelArg::Precomputed(path) => {
                KernelSpec::Precomputed { matrix_path: path.clone() }
            }
        }
    }
}

fn parse_kernel(text: &str) -> anyhow::Result<KernelArg> {
    let (name, params) = match text.split_once('=') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (text.trim(), None),
    };
    match (name, params) {
        ("linear", None) => Ok(KernelArg::Linear),
        ("rbf", Some(p)) => Ok(KernelArg::Rbf(parse_float("rbf gamma", p)?)),
        ("tanh", None) => Ok(KernelArg::TanhDataDriven),
        ("tanh", Some(p)) => {
            let parts: Vec<&str> = p.split(',').collect();
            if parts.len() != 2 {
                bail!("tanh takes two parameters, e.g. tanh=0.02,-1");
            }
            Ok(KernelArg::Tanh(
                parse_float("tanh a", parts[0])?,
                parse_float("tanh r", parts[1])?,
            ))
        }
        ("precomputed", Some(p)) if !p.is_empty() => Ok(KernelArg::Precomputed(PathBuf::from(p))),
        _ => bail!(
            "unknown kernel {text:?}; expected linear, rbf=GAMMA, tanh, tanh=A,R \
             or precomputed=PATH"
        ),
    }
}

fn kernel_label(spec: &KernelSpec) -> String {
    match spec {
        KernelSpec::Linear => "linear".into(),
        KernelSpec::Rbf { gamma } => format!("rbf{{gamma={gamma}}}"),
        KernelSpec::Tanh { a, r } => format!("tanh{{a={a},r={r}}}"),
        KernelSpec::Precomputed { matrix_path } => {
            format!("precomputed{{{}}}", matrix_path.display())
        }
    }
}

fn parse_lambda_mode(text: &str) -> anyhow::Result<LambdaMode> {
    match text.trim() {
        "auto-exact" => Ok(LambdaMode::AutoExact),
        "auto-power" => Ok(LambdaMode::AutoPower),
        "auto-gershgorin" => Ok(LambdaMode::AutoGershgorin),
        other => match other.strip_prefix("fixed=") {
            Some(v) => Ok(LambdaMode::Fixed(parse_float("fixed lambda", v)?)),
            None => bail!(
                "unknown lambda mode {text:?}; expected auto-exact, auto-power, \
                 auto-gershgorin or fixed=VALUE"
            ),
        },
    }
}

fn lambda_mode_label(mode: LambdaMode) -> String {
    match mode {
        LambdaMode::AutoExact => "auto-exact".into(),
        LambdaMode::AutoPower => "auto-power".into(),
        LambdaMode::AutoGershgorin => "auto-gershgorin".into(),
        LambdaMode::Fixed(v) => format!("fixed={v}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SolverChoice {
    Trik,
    Ksvm,
}

fn parse_solver(text: &str) -> anyhow::Result<SolverChoice> {
    match text.trim() {
        "trik" => Ok(SolverChoice::Trik),
        "ksvm" => Ok(SolverChoice::Ksvm),
        other => bail!("unknown solver {other:?}; expected trik or ksvm"),
    }
}

fn solver_label(solver: SolverChoice) -> &'static str {
    match solver {
        SolverChoice::Trik => "trik",
        SolverChoice::Ksvm => "ksvm",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SpectrumMethod {
    Exact,
    Power,
    Gershgorin,
}

impl SpectrumMethod {
    fn label(self) -> &'static str {
        match self {
            SpectrumMethod::Exact => "exact",
            SpectrumMethod::Power => "power",
            SpectrumMethod::Gershgorin => "gershgorin",
        }
    }
}

fn parse_spectrum_method(text: &str) -> anyhow::Result<SpectrumMethod> {
    match text.trim() {
        "exact" => Ok(SpectrumMethod::Exact),
        "power" => Ok(SpectrumMethod::Power),
        "gershgorin" => Ok(SpectrumMethod::Gershgorin),
        other => bail!("unknown spectrum method {other:?}; expected exact, power or gershgorin"),
    }
}

fn parse_float(name: &str, text: &str) -> anyhow::Result<f64> {
    let value: f64 = text
        .trim()
        .parse()
        .map_err(|_| anyhow!("{name} must be a number, got {text:?}"))?;
    if !value.is_finite() {
        bail!("{name} must be finite, got {text:?}");
    }
    Ok(value)
}

/// `MIN,MAX` pair, e.g. a center box.
fn parse_pair(name: &str, text: &str) -> anyhow::Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("{name} must be MIN,MAX, got {text:?}");
    }
    Ok((parse_float(name, parts[0])?, parse_float(name, parts[1])?))
}

fn parse_f64_list(name: &str, text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',').map(|item| parse_float(name, item)).collect()
}

fn parse_usize_list(name: &str, text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| anyhow!("{name} must be comma-separated integers, got {item:?}"))
        })
        .collect()
}

fn parse_u64_list(name: &str, text: &str) -> anyhow::Result<Vec<u64>> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| anyhow!("{name} must be comma-separated integers, got {item:?}"))
        })
        .collect()
}

// ──────────────────────────── plumbing ────────────────────────────

/// Reads the optional `--config` TOML; absent file means all defaults.
fn load_overrides<T: Default + serde::de::DeserializeOwned>(
    path: Option<&Path>,
) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow!("--{flag} is required (flag or config file)"))
}

/// `KREIN_SVM_THREADS`: 0 or absent means sequential.
fn threads_from_env() -> anyhow::Result<usize> {
    match std::env::var("KREIN_SVM_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                anyhow!("KREIN_SVM_THREADS must be a non-negative integer, got {raw:?}")
            })?;
            Ok(n.max(1))
        }
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(anyhow!("KREIN_SVM_THREADS is not valid unicode: {e}")),
    }
}

fn join_scientific(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ")
}

fn join_plain<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

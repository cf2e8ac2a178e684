//! Scripted experiment harnesses: the shift-parameter sweep and the
//! TrIK-vs-KSVM comparison grid.
//!
//! Both harnesses are deterministic end to end — datasets come from seeded
//! generators and the solvers are seed-free — so reruns reproduce every
//! number except wall-clock timings.  Results are returned as plain structs
//! and can optionally be written to disk as a CSV (flat, plot-ready, one row
//! per run) plus a JSON mirror that keeps the full coefficient vectors the
//! CSV leaves out.
//!
//! A run that fails (solver error, degenerate data) is recorded as an
//! explicit failure marker instead of aborting the whole grid; failed runs
//! are kept out of the CSVs so every emitted row matches the header schema.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::data::{make_blobs, train_test_split, BlobConfig, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::linalg::eig_sym;
use crate::solver::{
    accuracy, predict, train_ksvm, train_triksvm, FitResult, LambdaMode, SolverConfig,
};

/// Coefficients below this magnitude count as zero when reporting sparsity.
const NNZ_TOL: f64 = 1e-12;

/// Shift multipliers used when the caller does not supply any.
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];

// ───────────────────────────── lambda sweep ─────────────────────────────

/// Problem setup for [`run_lambda_sweep`]: one seeded dataset, one kernel,
/// one box constraint.  Only the shift varies across the sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub data: BlobConfig,
    /// Fraction of the blobs held out for the agreement/accuracy test set.
    pub test_fraction: f64,
    /// Seed for the train/test shuffle (independent of the blob seed).
    pub split_seed: u64,
    pub kernel: KernelSpec,
    pub c: f64,
}

impl Default for SweepConfig {
    /// A compact four-blob problem with a sigmoid kernel.  The tight cluster
    /// box keeps the tanh arguments away from saturation; see `data`'s
    /// generator defaults for the contrast.
    fn default() -> Self {
        SweepConfig {
            data: BlobConfig {
                center_box: (-2.0, 2.0),
                cluster_std: 0.5,
                ..BlobConfig::new(400, 17)
            },
            test_fraction: 0.5,
            split_seed: 9,
            kernel: KernelSpec::Tanh { a: 1.0, r: -1.0 },
            c: 1.0,
        }
    }
}

/// One converged sweep run at a fixed shift multiple.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaRecord {
    pub multiplier: f64,
    pub lambda: f64,
    pub accuracy_test: f64,
    pub iterations: usize,
    /// Active-set size at convergence (free plus bounded vectors).
    pub sv_count: usize,
    pub b: f64,
    /// Dual coefficients in the original (indefinite) kernel space.
    pub alpha: Vec<f64>,
    /// Dual coefficients of the shifted surrogate problem.
    pub alpha_tilde: Vec<f64>,
}

/// A sweep run that errored; the rest of the sweep continues without it.
#[derive(Clone, Debug, Serialize)]
pub struct SweepFailure {
    pub multiplier: f64,
    pub lambda: f64,
    pub error: String,
}

/// Output of [`run_lambda_sweep`].
///
/// `records` is ordered by multiplier, so with a negative base eigenvalue the
/// recorded `lambda` values are strictly decreasing; with a PSD kernel the
/// base is clamped to zero and every run is the same unshifted problem.
/// `agreement[i][j]` is the fraction of test points on which runs `i` and `j`
/// predict the same label (indices follow `records`).
#[derive(Clone, Debug, Serialize)]
pub struct LambdaSweepResult {
    pub config: SweepConfig,
    pub multipliers: Vec<f64>,
    /// Exact least eigenvalue of the training Gram, clamped to at most zero.
    pub base_lambda: f64,
    pub records: Vec<LambdaRecord>,
    pub failures: Vec<SweepFailure>,
    pub agreement: Vec<Vec<f64>>,
}

/// Train the shifted solver at `lambda = m * base` for each multiplier `m`
/// and measure how much the resulting decision rules agree on held-out data.
///
/// `multipliers` must be strictly ascending and start at 1, so the first run
/// uses the least eigenvalue itself.  Solver failures at individual shifts
/// are collected in `failures` rather than aborting the sweep.
pub fn run_lambda_sweep(config: &SweepConfig, multipliers: &[f64]) -> Result<LambdaSweepResult> {
    if multipliers.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one multiplier".into()));
    }
    if multipliers[0] != 1.0 {
        return Err(Error::InvalidConfig(format!(
            "sweep multipliers must start at 1, got {}",
            multipliers[0]
        )));
    }
    if multipliers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "sweep multipliers must be strictly ascending".into(),
        ));
    }

    let blobs = make_blobs(&config.data)?;
    let (train, test) = train_test_split(&blobs, config.test_fraction, config.split_seed)?;

    let gram = gram_matrix(&config.kernel, &train.points)?;
    let eig = eig_sym(&gram)?;
    let min_eig = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    // A PSD Gram needs no shift; every multiple of zero is the same problem.
    let base_lambda = min_eig.min(0.0);

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut predictions: Vec<Vec<f64>> = Vec::new();
    for &m in multipliers {
        let lambda = m * base_lambda;
        let solver_config = SolverConfig {
            c: config.c,
            lambda_mode: LambdaMode::Fixed(lambda),
            ..SolverConfig::default()
        };
        let outcome = train_triksvm(&train, &config.kernel, &solver_config)
            .and_then(|fit| {
                let (labels, _) = predict(&fit.model, &test.points)?;
                Ok((fit, labels))
            });
        match outcome {
            Ok((fit, labels)) => {
                records.push(LambdaRecord {
                    multiplier: m,
                    lambda,
                    accuracy_test: accuracy(&labels, &test.labels),
                    iterations: fit.report.iterations,
                    sv_count: fit.report.sv.len() + fit.report.bsv.len(),
                    b: fit.report.b,
                    alpha: fit.report.alpha.clone(),
                    alpha_tilde: fit.report.alpha_tilde.clone(),
                });
                predictions.push(labels);
            }
            Err(e) => failures.push(SweepFailure {
                multiplier: m,
                lambda,
                error: e.to_string(),
            }),
        }
    }

    let agreement = agreement_matrix(&predictions);
    Ok(LambdaSweepResult {
        config: config.clone(),
        multipliers: multipliers.to_vec(),
        base_lambda,
        records,
        failures,
        agreement,
    })
}

/// Fraction of positions where each pair of label vectors coincides.
fn agreement_matrix(predictions: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = predictions.len();
    let mut matrix = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let total = predictions[i].len();
            let same = predictions[i]
                .iter()
                .zip(&predictions[j])
                .filter(|(a, b)| a == b)
                .count();
            let frac = if total == 0 { 1.0 } else { same as f64 / total as f64 };
            matrix[i][j] = frac;
            matrix[j][i] = frac;
        }
    }
    matrix
}

impl LambdaSweepResult {
    /// Worst off-diagonal entry of the agreement matrix (1.0 when fewer than
    /// two runs succeeded).
    pub fn min_agreement(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for (i, row) in self.agreement.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if i != j {
                    worst = worst.min(a);
                }
            }
        }
        worst
    }

    /// Write `lambda_sweep.csv`, `agreement.csv`, and `lambda_sweep.json`
    /// into `dir` (created if missing).  Failed runs appear only in the JSON.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;

        let mut csv = String::from(
            "lambda_multiplier,lambda,accuracy_test,iterations,sv_count,alpha_l2,alpha_tilde_l2\n",
        );
        for r in &self.records {
            let alpha_l2 = l2_norm(&r.alpha);
            let alpha_tilde_l2 = l2_norm(&r.alpha_tilde);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.multiplier, r.lambda, r.accuracy_test, r.iterations, r.sv_count, alpha_l2,
                alpha_tilde_l2
            ));
        }
        fs::write(dir.join("lambda_sweep.csv"), csv)?;

        // Square matrix labelled by multiplier on both axes.
        let labels: Vec<String> = self.records.iter().map(|r| r.multiplier.to_string()).collect();
        let mut agreement = String::from("multiplier");
        for label in &labels {
            agreement.push(',');
            agreement.push_str(label);
        }
        agreement.push('\n');
        for (label, row) in labels.iter().zip(&self.agreement) {
            agreement.push_str(label);
            for value in row {
                agreement.push_str(&format!(",{value}"));
            }
            agreement.push('\n');
        }
        fs::write(dir.join("agreement.csv"), agreement)?;

        fs::write(dir.join("lambda_sweep.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ──────────────────────────── method comparison ────────────────────────────

/// Grid setup for [`run_comparison`]: blob shape shared by every run, with
/// the sample count and seed supplied per run.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonConfig {
    /// Template for the generated datasets; `n_samples` and `seed` are
    /// overridden by the grid, the rest (dimension, centers, spread) is kept.
    pub template: BlobConfig,
    pub test_fraction: f64,
    pub c: f64,
    /// Worker threads for the grid; `1` (or `0`) runs sequentially.  Every
    /// cell is independent, so the records are identical for any thread
    /// count — only the `time_s` fields pick up contention noise.
    pub threads: usize,
}

impl Default for ComparisonConfig {
    /// Two well-separated Gaussians in 25 dimensions.  The high dimension
    /// keeps sigmoid Grams well-conditioned on the working sets the solver
    /// visits; in low dimension their effective rank is small and the
    /// back-transition amplifies noise once the free set outgrows it.
    fn default() -> Self {
        ComparisonConfig {
            template: BlobConfig {
                dimension: 25,
                n_centers: 2,
                center_box: (-2.0, 2.0),
                cluster_std: 1.0,
                ..BlobConfig::new(0, 0)
            },
            test_fraction: 0.5,
            c: 1.0,
            threads: 1,
        }
    }
}

/// Metrics for one solver on one dataset.
#[derive(Clone, Debug, Serialize)]
pub struct MethodRecord {
    pub acc_train: f64,
    pub acc_test: f64,
    /// Median training wall time over the repeats (seconds, monotonic clock).
    pub time_s: f64,
    /// Active-set size at convergence (free plus bounded vectors).
    pub sv_count: usize,
    /// Coefficients with magnitude above `1e-12` in the original space.
    pub alpha_nnz: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// A method either produced metrics or an explicit failure marker; a missing
/// entry is never silent.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MethodOutcome {
    Ok {
        #[serde(flatten)]
        record: MethodRecord,
    },
    Failed {
        error: String,
    },
}

impl MethodOutcome {
    pub fn record(&self) -> Option<&MethodRecord> {
        match self {
            MethodOutcome::Ok { record } => Some(record),
            MethodOutcome::Failed { .. } => None,
        }
    }
}

/// Both solvers on one generated dataset.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRecord {
    pub size: usize,
    pub seed: u64,
    pub trik: MethodOutcome,
    pub ksvm: MethodOutcome,
}

/// Output of [`run_comparison`], one record per `(size, seed)` pair.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonResult {
    pub config: ComparisonConfig,
    pub kernel: KernelSpec,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub records: Vec<ComparisonRecord>,
}

/// Train both solvers on a grid of generated problems and record accuracy,
/// sparsity, and training time per run.
///
/// Timing repeats the training three times and keeps the median for sizes up
/// to 400; larger problems are timed once.  The train/test shuffle reuses the
/// dataset seed, so a `(size, seed)` pair fully determines everything except
/// the clock.  Per-run solver failures are recorded as markers, not errors.
pub fn run_comparison(
    sizes: &[usize],
    seeds: &[u64],
    kernel: &KernelSpec,
    config: &ComparisonConfig,
) -> Result<ComparisonResult> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("comparison needs at least one size".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("comparison needs at least one seed".into()));
    }

    let solver_config = SolverConfig {
        c: config.c,
        ..SolverConfig::default()
    };
    let cells: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&size| seeds.iter().map(move |&seed| (size, seed)))
        .collect();
    let run_cell = |(size, seed): (usize, u64)| -> ComparisonRecord {
        let blob_config = BlobConfig {
            n_samples: size,
            seed,
            ..config.template.clone()
        };
        let run = make_blobs(&blob_config)
            .and_then(|blobs| train_test_split(&blobs, config.test_fraction, seed));
        let (trik, ksvm) = match run {
            Ok((train, test)) => (
                run_method(&train, &test, kernel, &solver_config, train_triksvm),
                run_method(&train, &test, kernel, &solver_config, |d, k, c| {
                    train_ksvm(d, k, c)
                }),
            ),
            Err(e) => {
                let marker = MethodOutcome::Failed { error: e.to_string() };
                (marker.clone(), marker)
            }
        };
        ComparisonRecord { size, seed, trik, ksvm }
    };

    let workers = config.threads.max(1).min(cells.len());
    let records: Vec<ComparisonRecord> = if workers <= 1 {
        cells.iter().map(|&cell| run_cell(cell)).collect()
    } else {
        // Workers take cells by stride and hand back (slot, record) pairs;
        // sorting by slot restores the sequential (size-major) order, so the
        // output is byte-identical to a single-threaded run apart from
        // timings.
        let mut indexed: Vec<(usize, ComparisonRecord)> = Vec::with_capacity(cells.len());
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let cells = &cells;
                    let run_cell = &run_cell;
                    scope.spawn(move || {
                        cells
                            .iter()
                            .enumerate()
                            .skip(w)
                            .step_by(workers)
                            .map(|(slot, &cell)| (slot, run_cell(cell)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                indexed.extend(handle.join().expect("comparison worker panicked"));
            }
        });
        indexed.sort_by_key(|(slot, _)| *slot);
        indexed.into_iter().map(|(_, record)| record).collect()
    };

    Ok(ComparisonResult {
        config: config.clone(),
        kernel: kernel.clone(),
        sizes: sizes.to_vec(),
        seeds: seeds.to_vec(),
        records,
    })
}

fn run_method(
    train: &Dataset,
    test: &Dataset,
    kernel: &KernelSpec,
    config: &SolverConfig,
    train_fn: impl Fn(&Dataset, &KernelSpec, &SolverConfig) -> Result<FitResult>,
) -> MethodOutcome {
    let repeats = if train.len() <= 400 { 3 } else { 1 };
    let mut times = Vec::with_capacity(repeats);
    let mut fit = None;
    for _ in 0..repeats {
        let start = Instant::now();
        match train_fn(train, kernel, config) {
            Ok(result) => {
                times.push(start.elapsed().as_secs_f64());
                fit = Some(result);
            }
            Err(e) => return MethodOutcome::Failed { error: e.to_string() },
        }
    }
    let fit = fit.expect("at least one repeat ran");
    times.sort_by(|a, b| a.total_cmp(b));
    let time_s = times[times.len() / 2];

    let metrics = predict(&fit.model, &train.points).and_then(|(train_labels, _)| {
        let (test_labels, _) = predict(&fit.model, &test.points)?;
        Ok((train_labels, test_labels))
    });
    match metrics {
        Ok((train_labels, test_labels)) => MethodOutcome::Ok {
            record: MethodRecord {
                acc_train: accuracy(&train_labels, &train.labels),
                acc_test: accuracy(&test_labels, &test.labels),
                time_s,
                sv_count: fit.report.sv.len() + fit.report.bsv.len(),
                alpha_nnz: fit.report.alpha.iter().filter(|a| a.abs() > NNZ_TOL).count(),
                iterations: fit.report.iterations,
                converged: fit.report.converged,
            },
        },
        Err(e) => MethodOutcome::Failed { error: e.to_string() },
    }
}

impl ComparisonResult {
    /// Mean test accuracy over successful runs of one method column.
    pub fn mean_test_accuracy(&self, pick: impl Fn(&ComparisonRecord) -> &MethodOutcome) -> f64 {
        let accs: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| pick(r).record().map(|m| m.acc_test))
            .collect();
        if accs.is_empty() {
            return f64::NAN;
        }
        accs.iter().sum::<f64>() / accs.len() as f64
    }

    /// Write `comparison.csv`, `timing_loglog.csv`, and `comparison.json`
    /// into `dir` (created if missing).  Failed runs appear only in the JSON.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;

        let mut csv = String::from("size,seed,method,acc_train,acc_test,time_s,sv_count,alpha_nnz\n");
        let mut loglog = String::from("method,size,seed,log10_size,log10_time_s\n");
        for r in &self.records {
            for (method, outcome) in [("trik", &r.trik), ("ksvm", &r.ksvm)] {
                if let Some(m) = outcome.record() {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        r.size, r.seed, method, m.acc_train, m.acc_test, m.time_s, m.sv_count,
                        m.alpha_nnz
                    ));
                    loglog.push_str(&format!(
                        "{},{},{},{},{}\n",
                        method,
                        r.size,
                        r.seed,
                        (r.size as f64).log10(),
                        m.time_s.log10()
                    ));
                }
            }
        }
        fs::write(dir.join("comparison.csv"), csv)?;
        fs::write(dir.join("timing_loglog.csv"), loglog)?;
        fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

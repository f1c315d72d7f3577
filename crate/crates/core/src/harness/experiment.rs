//! Seeded experiment runs, grid selection and CSV artifacts.

use std::fmt::Write as _;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::config::{DatasetSource, ExperimentConfig, GammaSource, Method, OracleKind};
use super::write_atomic;
use crate::active::{
    evaluate, run_active_loop, train_on, ActiveConfig, FixedKernels, GroundTruthOracle, InteractiveOracle,
    KernelSource, Oracle, StopReason,
};
use crate::data::{load_dataset, standardize, stratified_initial_sample, synth_shifted, BandStats, Dataset};
use crate::error::{Error, Result};
use crate::eval::{aggregate_curves, CurveStats, RunCurve};
use crate::kernels::{gamma_heuristic, FormVariant, KernelBank, KernelKind, KernelSpec};
use crate::mkl_da::{mmd_vector, DomainSplit, MklOptions, MmdContext};
use crate::par;
use crate::rng::{seeded_rng, Stream};

pub const CURVE_HEADER: &str = "iteration,added_samples,oa_per_seed,kappa_per_seed,oa_mean,oa_sd,kappa_mean,kappa_sd";
pub const SUMMARY_HEADER: &str = "method,source_samples,target_samples,oa_mean,oa_sd,kappa_mean,kappa_sd,note";

/// Result of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub source_samples: usize,
    pub added: Vec<usize>,
    pub curve: RunCurve,
    pub stop: StopReason,
    /// Mean kernel weights of the final model.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    pub runs: Vec<SeedRun>,
    pub stats: CurveStats,
    pub added: Vec<usize>,
    pub curve_csv: String,
    pub summary_csv: String,
}

impl ExperimentReport {
    pub fn final_oa_mean(&self) -> f64 {
        *self.stats.oa_mean.last().expect("at least one iteration")
    }

    pub fn initial_oa_mean(&self) -> f64 {
        self.stats.oa_mean[0]
    }
}

/// Loads or synthesizes the configured dataset, standardized when enabled.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let raw = match &cfg.dataset {
        DatasetSource::File(path) => load_dataset(path)?,
        DatasetSource::Synth(s) => synth_shifted(s)?,
    };
    if raw.source_ids().is_empty() || raw.target_ids().is_empty() {
        return Err(Error::DegenerateInput("dataset needs source and target samples".into()));
    }
    if cfg.standardize {
        standardize(&raw, &BandStats::from_source(&raw)?)
    } else {
        Ok(raw)
    }
}

/// Stratified, seeded fold assignment for `labels`.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded_rng(seed, Stream::CrossValidation);
    let mut assignment = vec![0; labels.len()];
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut offset = 0;
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset += members.len();
    }
    assignment
}

/// Mean fold accuracy of one grid point.
#[allow(clippy::too_many_arguments)]
fn cv_accuracy(
    bank: &KernelBank,
    dataset: &Dataset,
    ids: &[usize],
    labels: &[usize],
    folds: &[usize],
    num_folds: usize,
    ctx: &MmdContext,
    c: f64,
    lambda: f64,
    opts: &MklOptions,
) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for f in 0..num_folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..ids.len()).partition(|&i| folds[i] != f);
        if test.is_empty() {
            continue;
        }
        let train_ids: Vec<usize> = train.iter().map(|&i| ids[i]).collect();
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let test_ids: Vec<usize> = test.iter().map(|&i| ids[i]).collect();
        let model = match train_on(bank, &train_ids, &train_labels, ctx, c, lambda, opts) {
            Ok(m) => m,
            Err(Error::DegenerateClasses(_)) => continue,
            Err(e) => return Err(e),
        };
        total += evaluate(&model, bank, dataset, &test_ids)?.0;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::DegenerateClasses("no usable cross-validation fold".into()));
    }
    Ok(total / counted as f64)
}

/// Grid point with the best mean fold accuracy, scanning C ascending then
/// λ ascending and keeping the first maximum.
#[allow(clippy::too_many_arguments)]
pub fn select_grid_point(
    bank: &KernelBank,
    dataset: &Dataset,
    ids: &[usize],
    c_grid: &[f64],
    lambda_grid: &[f64],
    num_folds: usize,
    seed: u64,
    ctx: &MmdContext,
    opts: &MklOptions,
) -> Result<(f64, f64)> {
    let labels: Vec<usize> = ids
        .iter()
        .map(|&i| dataset.label(i).ok_or(Error::UnknownIdentifier(i)))
        .collect::<Result<_>>()?;
    let num_folds = num_folds.min(ids.len()).max(2);
    let folds = stratified_folds(&labels, num_folds, seed);
    let mut cs = c_grid.to_vec();
    let mut ls = lambda_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let points: Vec<(f64, f64)> = cs.iter().flat_map(|&c| ls.iter().map(move |&l| (c, l))).collect();
    if points.len() == 1 {
        return Ok(points[0]);
    }
    let scores = par::map_slice(&points, |&(c, l)| {
        cv_accuracy(bank, dataset, ids, &labels, &folds, num_folds, ctx, c, l, opts)
    });
    let mut best: Option<((f64, f64), f64)> = None;
    for (point, score) in points.into_iter().zip(scores) {
        let score = score?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((point, score));
        }
    }
    Ok(best.expect("non-empty grid").0)
}

fn kernel_specs(cfg: &ExperimentConfig, gamma: f64) -> Result<Vec<KernelSpec>> {
    if cfg.method.is_multi_kernel() {
        cfg.kernels
            .iter()
            .map(|&(kind, variant)| KernelSpec::with_variant(kind, gamma, variant))
            .collect()
    } else {
        Ok(vec![KernelSpec::with_variant(KernelKind::Gaussian, gamma, FormVariant::Rational)?])
    }
}

/// Kernels over `D_S ∪ D_T` whose bandwidth follows the labeled set.
struct LabeledGammaKernels<'a> {
    dataset: &'a Dataset,
    cfg: &'a ExperimentConfig,
    initial: Vec<usize>,
    target: Vec<usize>,
    current: FixedKernels,
}

impl<'a> LabeledGammaKernels<'a> {
    fn build(&self, gamma: f64) -> Result<FixedKernels> {
        build_kernels(self.cfg, self.dataset, &self.initial, &self.target, gamma)
    }
}

impl KernelSource for LabeledGammaKernels<'_> {
    fn bank(&self) -> &KernelBank {
        &self.current.bank
    }

    fn context(&self) -> &crate::mkl_da::MmdContext {
        &self.current.context
    }

    fn refresh(&mut self, labeled: &[usize]) -> Result<()> {
        let gamma = gamma_heuristic(self.dataset.select_rows(labeled).view())?;
        self.current = self.build(gamma)?;
        Ok(())
    }
}

/// Bank over `initial ∪ target` and the discrepancy between them (zero for
/// single-kernel methods).
fn build_kernels(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    initial: &[usize],
    target: &[usize],
    gamma: f64,
) -> Result<FixedKernels> {
    let specs = kernel_specs(cfg, gamma)?;
    let bank_ids: Vec<usize> = initial.iter().chain(target).copied().collect();
    let bank = KernelBank::build(dataset.features(), &bank_ids, &specs)?;
    let context = if cfg.method.is_multi_kernel() {
        mmd_vector(bank.matrices(), &DomainSplit::new(initial.to_vec(), target.to_vec())?)?
    } else {
        MmdContext::zeros(1)
    };
    Ok(FixedKernels { bank, context })
}

/// Runs one seed of the configured method.
pub fn run_seed(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64, oracle: &mut dyn Oracle) -> Result<SeedRun> {
    let method = cfg.method;
    let initial = if method.is_active() {
        stratified_initial_sample(dataset, cfg.initial_per_class, seed)?
    } else {
        dataset.source_ids()
    };
    let target = dataset.target_ids();
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => gamma_heuristic(dataset.select_rows(&initial).view())?,
    };
    let fixed = build_kernels(cfg, dataset, &initial, &target, gamma)?;

    let lambda_grid = if method.is_multi_kernel() { cfg.lambda_grid.clone() } else { vec![0.0] };
    let opts = MklOptions {
        max_outer: cfg.max_outer,
        mode: cfg.d_mode,
        ..MklOptions::default()
    };
    let (c, lambda) = select_grid_point(
        &fixed.bank,
        dataset,
        &initial,
        &cfg.c_grid,
        &lambda_grid,
        cfg.cv_folds,
        seed,
        &fixed.context,
        &opts,
    )?;
    log::info!("seed {seed}: {} gamma={gamma} C={c} lambda={lambda}", method.name());

    let active = ActiveConfig {
        q: cfg.q,
        budget: if method.is_active() { cfg.budget } else { 0 },
        strategy: method.strategy(),
        c,
        lambda,
        mkl: opts,
        eval_on: cfg.eval_on,
        seed,
    };
    let outcome = if cfg.gamma.is_none() && cfg.gamma_source == GammaSource::Labeled {
        let mut kernels = LabeledGammaKernels {
            dataset,
            cfg,
            initial: initial.clone(),
            target,
            current: fixed,
        };
        run_active_loop(&active, dataset, &mut kernels, &initial, oracle)?
    } else {
        let mut kernels = fixed;
        run_active_loop(&active, dataset, &mut kernels, &initial, oracle)?
    };
    if outcome.stop != StopReason::Budget {
        log::warn!("seed {seed}: stopped early ({:?}) after {} iterations", outcome.stop, outcome.records.len() - 1);
    }
    Ok(SeedRun {
        seed,
        c,
        lambda,
        gamma,
        source_samples: initial.len(),
        added: outcome.records.iter().map(|r| r.added).collect(),
        curve: outcome.records.iter().map(|r| (r.oa, r.kappa)).collect(),
        stop: outcome.stop,
        weights: outcome.model.mean_weights(),
    })
}

fn note(method: Method) -> &'static str {
    match method {
        Method::SkvLike => "single-kernel approximation of the SKV baseline",
        Method::MklDaNoAl => "approximation of the DTMKL baseline",
        _ => "",
    }
}

fn join_values(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Runs every seed and renders the CSV artifacts (without writing them).
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let dataset = prepare_dataset(cfg)?;
    let runs: Vec<SeedRun> = match cfg.oracle {
        OracleKind::GroundTruth => par::map_slice(&cfg.seeds, |&seed| {
            let mut oracle = GroundTruthOracle::from_dataset(&dataset);
            run_seed(cfg, &dataset, seed, &mut oracle)
        })
        .into_iter()
        .collect::<Result<_>>()?,
        OracleKind::Interactive => {
            let stdin = io::stdin();
            let mut oracle = InteractiveOracle::new(
                BufReader::new(stdin.lock()),
                io::stderr(),
                dataset.num_classes(),
                dataset.len(),
            );
            cfg.seeds
                .iter()
                .map(|&seed| run_seed(cfg, &dataset, seed, &mut oracle))
                .collect::<Result<_>>()?
        }
    };

    let iterations = runs.iter().map(|r| r.curve.len()).min().expect("seeds are non-empty");
    if runs.iter().any(|r| r.curve.len() != iterations) {
        log::warn!("seeds stopped at different iterations; curves truncated to {iterations}");
    }
    let curves: Vec<RunCurve> = runs.iter().map(|r| r.curve[..iterations].to_vec()).collect();
    let stats = aggregate_curves(&curves)?;
    let added = runs[0].added[..iterations].to_vec();

    let mut curve_csv = String::from(CURVE_HEADER);
    curve_csv.push('\n');
    for t in 0..iterations {
        let _ = writeln!(
            curve_csv,
            "{t},{},{},{},{},{},{},{}",
            added[t],
            join_values(curves.iter().map(|c| c[t].0)),
            join_values(curves.iter().map(|c| c[t].1)),
            stats.oa_mean[t],
            stats.oa_sd[t],
            stats.kappa_mean[t],
            stats.kappa_sd[t],
        );
    }
    let last = iterations - 1;
    let mut summary_csv = String::from(SUMMARY_HEADER);
    summary_csv.push('\n');
    let _ = writeln!(
        summary_csv,
        "{},{},{},{},{},{},{},{}",
        cfg.method.name(),
        runs[0].source_samples,
        added[last],
        stats.oa_mean[last],
        stats.oa_sd[last],
        stats.kappa_mean[last],
        stats.kappa_sd[last],
        note(cfg.method),
    );
    Ok(ExperimentReport {
        method: cfg.method,
        runs,
        stats,
        added,
        curve_csv,
        summary_csv,
    })
}

/// Output directory: explicit setting, then `ADAMKL_OUTPUT`, then `adamkl-out`.
pub fn resolve_output(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .or_else(|| std::env::var_os(super::OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("adamkl-out"))
}

/// Runs the experiment and writes `config.echo`, `curve.csv` and
/// `summary.csv` into `output`. The echo is written first, so it survives
/// runtime failures.
pub fn run_experiment(cfg: &ExperimentConfig, output: &Path) -> Result<ExperimentReport> {
    write_atomic(&output.join("config.echo"), cfg.echo().as_bytes())?;
    let report = execute(cfg)?;
    write_atomic(&output.join("curve.csv"), report.curve_csv.as_bytes())?;
    write_atomic(&output.join("summary.csv"), report.summary_csv.as_bytes())?;
    Ok(report)
}

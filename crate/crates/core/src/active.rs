//! Margin sampling, query selection, annotation oracles and the active loop.
//!
//! Each iteration retrains on `D_L = D_S ∪ D_C`, scores every candidate in
//! the target pool by its smallest absolute one-versus-all decision value,
//! sends the `q` lowest-scoring candidates to the oracle and moves them
//! from the pool into `D_C`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{kappa, overall_accuracy, ConfusionMatrix};
use crate::kernels::KernelBank;
use crate::mkl_da::{train_mkl_da, MklModel, MklOptions, MmdContext};
use crate::par;
use crate::rng::{seeded_rng, Stream};
use crate::svm::argmax_first;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    /// Lowest margin first.
    #[default]
    Margin,
    /// Uniform draws without replacement.
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Margin => "margin",
            Strategy::Random => "random",
        }
    }
}

/// Which target samples are scored after each retrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EvalSet {
    /// Target samples not yet acquired.
    #[default]
    Remaining,
    /// Every target sample.
    All,
}

impl EvalSet {
    pub fn name(self) -> &'static str {
        match self {
            EvalSet::Remaining => "remaining",
            EvalSet::All => "all",
        }
    }
}

/// Labeled, acquired and pool identifier sets of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveState {
    source: Vec<(usize, usize)>,
    acquired: Vec<(usize, usize)>,
    pool: BTreeSet<usize>,
    target: Vec<usize>,
    pub iteration: usize,
    pub rng_seed: u64,
}

impl ActiveState {
    /// `source` pairs identifiers with labels; `target` lists the pool.
    pub fn new(source: Vec<(usize, usize)>, target: Vec<usize>, rng_seed: u64) -> Result<Self> {
        let pool: BTreeSet<usize> = target.iter().copied().collect();
        if pool.len() != target.len() {
            return Err(Error::Coverage("duplicate target identifiers".into()));
        }
        if let Some((id, _)) = source.iter().find(|(id, _)| pool.contains(id)) {
            return Err(Error::Coverage(format!("identifier {id} is both source and target")));
        }
        Ok(Self {
            source,
            acquired: Vec::new(),
            pool,
            target,
            iteration: 0,
            rng_seed,
        })
    }

    /// `D_L` identifiers: source first, then acquisitions in order.
    pub fn labeled_ids(&self) -> Vec<usize> {
        self.source.iter().chain(&self.acquired).map(|p| p.0).collect()
    }

    pub fn labeled_labels(&self) -> Vec<usize> {
        self.source.iter().chain(&self.acquired).map(|p| p.1).collect()
    }

    pub fn acquired(&self) -> Vec<usize> {
        self.acquired.iter().map(|p| p.0).collect()
    }

    /// Pool identifiers in ascending order.
    pub fn pool(&self) -> Vec<usize> {
        self.pool.iter().copied().collect()
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn eval_ids(&self, set: EvalSet) -> Vec<usize> {
        match set {
            EvalSet::Remaining => self.pool(),
            EvalSet::All => self.target.clone(),
        }
    }

    /// Moves annotated identifiers from the pool into `D_C`.
    pub fn acquire(&mut self, annotated: &[(usize, usize)]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &(id, _) in annotated {
            if !self.pool.contains(&id) || !seen.insert(id) {
                return Err(Error::Coverage(format!("identifier {id} is not in the pool")));
            }
        }
        for &(id, label) in annotated {
            self.pool.remove(&id);
            self.acquired.push((id, label));
        }
        Ok(())
    }

    /// Checks `D_L = D_S ∪ D_C`, `pool ∩ D_C = ∅` and `pool ∪ D_C = D_T`.
    pub fn check_invariants(&self) -> Result<()> {
        let labeled: BTreeSet<usize> = self.labeled_ids().into_iter().collect();
        let expected: BTreeSet<usize> = self
            .source
            .iter()
            .chain(&self.acquired)
            .map(|p| p.0)
            .collect();
        let acquired: BTreeSet<usize> = self.acquired.iter().map(|p| p.0).collect();
        let target: BTreeSet<usize> = self.target.iter().copied().collect();
        let ok = labeled == expected
            && labeled.len() == self.source.len() + self.acquired.len()
            && self.pool.is_disjoint(&acquired)
            && self.pool.union(&acquired).copied().collect::<BTreeSet<_>>() == target;
        if ok {
            Ok(())
        } else {
            Err(Error::Coverage("active state invariants violated".into()))
        }
    }
}

/// Bookkeeping for one iteration of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub iteration: usize,
    pub selected: Vec<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<usize>,
    /// Total acquired target samples after this iteration.
    pub added: usize,
    pub oa: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    PoolExhausted,
    OperatorAbort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveOutcome {
    pub records: Vec<QueryRecord>,
    pub stop: StopReason,
    pub state: ActiveState,
    /// The model trained on the final `D_L`.
    pub model: MklModel,
}

/// `min_c |f_c(x)|` for one candidate given its per-kernel rows (`M × N_L`).
pub fn margin_score(model: &MklModel, rows: ArrayView2<f64>) -> Result<f64> {
    let values = model.decision_values(rows)?;
    Ok(values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

/// Picks up to `q` pool identifiers.
///
/// `pool` and `scores` are aligned. Margin selection takes the `q` smallest
/// scores with ties broken by ascending identifier; random selection draws
/// uniformly without replacement. Output is in ascending identifier order.
pub fn select_queries(
    strategy: Strategy,
    pool: &[usize],
    scores: &[f64],
    q: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if q == 0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must be at least 1".into(),
        });
    }
    let take = q.min(pool.len());
    let mut picked: Vec<usize> = match strategy {
        Strategy::Margin => {
            if scores.len() != pool.len() {
                return Err(Error::DimensionMismatch {
                    expected: pool.len(),
                    found: scores.len(),
                });
            }
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(pool[a].cmp(&pool[b])));
            order[..take].iter().map(|&i| pool[i]).collect()
        }
        Strategy::Random => index::sample(rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i])
            .collect(),
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Supplies labels for queried samples.
pub trait Oracle {
    /// Label for `id`, or `None` when the operator aborts the run.
    fn label(&mut self, id: usize, features: &[f64]) -> Result<Option<usize>>;

    fn is_interactive(&self) -> bool {
        false
    }
}

/// Looks labels up in a held-out array.
#[derive(Debug, Clone)]
pub struct GroundTruthOracle {
    labels: Vec<Option<usize>>,
}

impl GroundTruthOracle {
    pub fn new(labels: Vec<Option<usize>>) -> Self {
        Self { labels }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self::new(dataset.labels().to_vec())
    }
}

impl Oracle for GroundTruthOracle {
    fn label(&mut self, id: usize, _features: &[f64]) -> Result<Option<usize>> {
        self.labels
            .get(id)
            .copied()
            .flatten()
            .map(Some)
            .ok_or(Error::UnknownIdentifier(id))
    }
}

/// Line-oriented terminal annotation: one decimal class index per prompt,
/// a blank line (or end of input) aborts.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
    num_classes: usize,
    num_samples: usize,
    retries: usize,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W, num_classes: usize, num_samples: usize) -> Self {
        Self {
            input,
            output,
            num_classes,
            num_samples,
            retries: 0,
        }
    }

    /// Rejected entries so far.
    pub fn retries(&self) -> usize {
        self.retries
    }
}

fn feature_summary(features: &[f64]) -> String {
    if features.is_empty() {
        return "no features".into();
    }
    let min = features.iter().copied().fold(f64::INFINITY, f64::min);
    let max = features.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = features.iter().sum::<f64>() / features.len() as f64;
    let head: Vec<String> = features.iter().take(4).map(|v| format!("{v:.3}")).collect();
    format!(
        "bands={} min={min:.3} max={max:.3} mean={mean:.3} first=[{}]",
        features.len(),
        head.join(", ")
    )
}

impl<R: BufRead, W: Write> Oracle for InteractiveOracle<R, W> {
    fn label(&mut self, id: usize, features: &[f64]) -> Result<Option<usize>> {
        if id >= self.num_samples {
            return Err(Error::UnknownIdentifier(id));
        }
        loop {
            write!(
                self.output,
                "sample {id} ({}) class [0-{}], blank to stop: ",
                feature_summary(features),
                self.num_classes - 1
            )?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            let entry = line.trim();
            if entry.is_empty() {
                return Ok(None);
            }
            match entry.parse::<usize>() {
                Ok(c) if c < self.num_classes => return Ok(Some(c)),
                _ => {
                    self.retries += 1;
                    log::warn!("rejected label `{entry}` for sample {id}; expected 0..{}", self.num_classes);
                }
            }
        }
    }

    fn is_interactive(&self) -> bool {
        true
    }
}

/// Trains one-versus-all classifiers on bank rows for `ids`.
pub fn train_on(
    bank: &KernelBank,
    ids: &[usize],
    labels: &[usize],
    ctx: &MmdContext,
    c: f64,
    lambda: f64,
    opts: &MklOptions,
) -> Result<MklModel> {
    let blocks = bank.square_blocks(ids)?;
    train_mkl_da(&blocks, labels, ids.to_vec(), ctx, c, lambda, opts)
}

/// Per-class decision values for every identifier in `ids`, in order.
pub fn batch_decisions(model: &MklModel, bank: &KernelBank, ids: &[usize]) -> Result<Vec<Vec<f64>>> {
    if model.classes.is_empty() {
        return Err(Error::Untrained);
    }
    if model.num_kernels() != bank.num_kernels() {
        return Err(Error::DimensionMismatch {
            expected: model.num_kernels(),
            found: bank.num_kernels(),
        });
    }
    let cols = bank.positions(&model.labeled_indices)?;
    let rows = bank.positions(ids)?;
    let packed = model.packed();
    let matrices = bank.matrices();
    let nl = cols.len();
    Ok(par::map_slice(&rows, |&x| {
        let mut gathered = vec![0.0; matrices.len() * nl];
        for (m, mat) in matrices.iter().enumerate() {
            let row = mat.values().row(x);
            for (slot, &c) in gathered[m * nl..(m + 1) * nl].iter_mut().zip(&cols) {
                *slot = row[c];
            }
        }
        packed.decisions(&gathered)
    }))
}

/// Predicted class tags for `ids` (largest decision value, lowest tag on ties).
pub fn predict_ids(model: &MklModel, bank: &KernelBank, ids: &[usize]) -> Result<Vec<usize>> {
    let tags: Vec<usize> = model.classes.iter().map(|c| c.binary.class_tag).collect();
    batch_decisions(model, bank, ids)?
        .iter()
        .map(|v| argmax_first(v).map(|i| tags[i]).ok_or(Error::Untrained))
        .collect()
}

/// OA and kappa of `model` on the labeled identifiers `ids`. Kappa is NaN
/// when undefined; both are NaN when `ids` is empty.
pub fn evaluate(model: &MklModel, bank: &KernelBank, dataset: &Dataset, ids: &[usize]) -> Result<(f64, f64)> {
    let ids: Vec<usize> = ids.iter().copied().filter(|&i| dataset.label(i).is_some()).collect();
    if ids.is_empty() {
        log::warn!("empty evaluation set");
        return Ok((f64::NAN, f64::NAN));
    }
    let pred = predict_ids(model, bank, &ids)?;
    let truth: Vec<usize> = ids.iter().map(|&i| dataset.label(i).expect("filtered")).collect();
    let oa = overall_accuracy(&pred, &truth)?;
    let cm = ConfusionMatrix::from_predictions(&pred, &truth, dataset.num_classes())?;
    let k = match kappa(&cm) {
        Ok(k) => k,
        Err(Error::UndefinedKappa) => {
            log::warn!("kappa undefined on {} samples", ids.len());
            f64::NAN
        }
        Err(e) => return Err(e),
    };
    Ok((oa, k))
}

/// Base kernels and discrepancy vector used by the loop.
///
/// `refresh` runs after every acquisition with the new `D_L`, letting an
/// implementation rebuild its kernels (for example with a bandwidth
/// recomputed from the labeled samples).
pub trait KernelSource {
    fn bank(&self) -> &KernelBank;
    fn context(&self) -> &MmdContext;
    fn refresh(&mut self, _labeled: &[usize]) -> Result<()> {
        Ok(())
    }
}

/// Kernels fixed for the whole run.
#[derive(Debug, Clone)]
pub struct FixedKernels {
    pub bank: KernelBank,
    pub context: MmdContext,
}

impl KernelSource for FixedKernels {
    fn bank(&self) -> &KernelBank {
        &self.bank
    }

    fn context(&self) -> &MmdContext {
        &self.context
    }
}

#[derive(Debug, Clone)]
pub struct ActiveConfig {
    pub q: usize,
    pub budget: usize,
    pub strategy: Strategy,
    pub c: f64,
    pub lambda: f64,
    pub mkl: MklOptions,
    pub eval_on: EvalSet,
    pub seed: u64,
}

/// Runs the active loop from the labeled source identifiers `initial`.
///
/// The kernel bank must cover `initial` and every target identifier of
/// `dataset`. Iteration 0 trains and evaluates without querying; each of
/// the `budget` following iterations queries, annotates, retrains and
/// evaluates. The run stops early when the pool empties or the oracle
/// aborts, returning the records gathered so far.
pub fn run_active_loop(
    config: &ActiveConfig,
    dataset: &Dataset,
    kernels: &mut dyn KernelSource,
    initial: &[usize],
    oracle: &mut dyn Oracle,
) -> Result<ActiveOutcome> {
    if config.q == 0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must be at least 1".into(),
        });
    }
    let source = initial
        .iter()
        .map(|&id| dataset.label(id).map(|l| (id, l)).ok_or(Error::UnknownIdentifier(id)))
        .collect::<Result<Vec<_>>>()?;
    let mut state = ActiveState::new(source, dataset.target_ids(), config.seed)?;
    let mut rng = seeded_rng(config.seed, Stream::Query);

    let fit = |state: &ActiveState, kernels: &dyn KernelSource| {
        train_on(
            kernels.bank(),
            &state.labeled_ids(),
            &state.labeled_labels(),
            kernels.context(),
            config.c,
            config.lambda,
            &config.mkl,
        )
    };
    let mut model = fit(&state, kernels)?;
    let (oa, k) = evaluate(&model, kernels.bank(), dataset, &state.eval_ids(config.eval_on))?;
    let mut records = vec![QueryRecord {
        iteration: 0,
        selected: Vec::new(),
        scores: Vec::new(),
        labels: Vec::new(),
        added: 0,
        oa,
        kappa: k,
    }];

    let mut stop = StopReason::Budget;
    for t in 1..=config.budget {
        let pool = state.pool();
        if pool.is_empty() {
            stop = StopReason::PoolExhausted;
            break;
        }
        let scores: Vec<f64> = batch_decisions(&model, kernels.bank(), &pool)?
            .iter()
            .map(|v| v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())))
            .collect();
        let selected = select_queries(config.strategy, &pool, &scores, config.q, &mut rng)?;
        let mut annotated = Vec::with_capacity(selected.len());
        for &id in &selected {
            let features = dataset.features().row(id).to_vec();
            match oracle.label(id, &features)? {
                Some(label) => annotated.push((id, label)),
                None => {
                    stop = StopReason::OperatorAbort;
                    break;
                }
            }
        }
        if stop == StopReason::OperatorAbort {
            break;
        }
        state.acquire(&annotated)?;
        state.iteration = t;
        debug_assert!(state.check_invariants().is_ok());

        kernels.refresh(&state.labeled_ids())?;
        model = fit(&state, kernels)?;
        let (oa, k) = evaluate(&model, kernels.bank(), dataset, &state.eval_ids(config.eval_on))?;
        let picked_scores = selected
            .iter()
            .map(|id| scores[pool.binary_search(id).expect("selected from pool")])
            .collect();
        records.push(QueryRecord {
            iteration: t,
            labels: annotated.iter().map(|p| p.1).collect(),
            selected,
            scores: picked_scores,
            added: state.acquired.len(),
            oa,
            kappa: k,
        });
        log::debug!("iteration {t}: oa {oa:.4} kappa {k:.4}");
    }
    Ok(ActiveOutcome {
        records,
        stop,
        state,
        model,
    })
}

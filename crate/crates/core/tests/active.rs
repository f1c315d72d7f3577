mod common;

use std::collections::BTreeSet;

use adamkl::active::{
    batch_decisions, margin_score, run_active_loop, select_queries, train_on, ActiveConfig, EvalSet, FixedKernels,
    GroundTruthOracle, Oracle, StopReason, Strategy,
};
use adamkl::data::{stratified_initial_sample, synth_shifted, Dataset, SynthConfig};
use adamkl::error::Result;
use adamkl::kernels::{KernelBank, KernelKind, KernelSpec};
use adamkl::mkl_da::{mmd_vector, DomainSplit, MklOptions};
use adamkl::rng::{seeded_rng, Stream};
use proptest::prelude::*;

fn small_dataset() -> Dataset {
    synth_shifted(&SynthConfig {
        num_classes: 3,
        dimension: 4,
        per_class_source: 10,
        per_class_target: 20,
        shift_magnitude: 4.0,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn kernels(ds: &Dataset, initial: &[usize]) -> FixedKernels {
    let target = ds.target_ids();
    let ids: Vec<usize> = initial.iter().chain(&target).copied().collect();
    let specs: Vec<KernelSpec> = [KernelKind::Gaussian, KernelKind::Laplacian]
        .into_iter()
        .map(|k| KernelSpec::new(k, 0.1).unwrap())
        .collect();
    let bank = KernelBank::build(ds.features(), &ids, &specs).unwrap();
    let context = mmd_vector(bank.matrices(), &DomainSplit::new(initial.to_vec(), target).unwrap()).unwrap();
    FixedKernels { bank, context }
}

fn config(strategy: Strategy, q: usize, budget: usize) -> ActiveConfig {
    ActiveConfig {
        q,
        budget,
        strategy,
        c: 1.0,
        lambda: 0.25,
        mkl: MklOptions::default(),
        eval_on: EvalSet::Remaining,
        seed: 4,
    }
}

/// Counts calls and refuses identifiers outside the target pool.
struct CheckingOracle {
    inner: GroundTruthOracle,
    seen: BTreeSet<usize>,
    target: BTreeSet<usize>,
}

impl Oracle for CheckingOracle {
    fn label(&mut self, id: usize, features: &[f64]) -> Result<Option<usize>> {
        assert!(self.target.contains(&id), "queried non-target {id}");
        assert!(self.seen.insert(id), "queried {id} twice");
        self.inner.label(id, features)
    }
}

#[test]
fn loop_bookkeeping() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 3, 1).unwrap();
    let mut k = kernels(&ds, &initial);
    let mut oracle = CheckingOracle {
        inner: GroundTruthOracle::from_dataset(&ds),
        seen: BTreeSet::new(),
        target: ds.target_ids().into_iter().collect(),
    };
    let out = run_active_loop(&config(Strategy::Margin, 5, 4), &ds, &mut k, &initial, &mut oracle).unwrap();
    assert_eq!(out.stop, StopReason::Budget);
    assert_eq!(out.records.len(), 5);
    assert_eq!(out.records.iter().map(|r| r.added).collect::<Vec<_>>(), vec![0, 5, 10, 15, 20]);
    assert_eq!(out.state.acquired().len(), 20);
    out.state.check_invariants().unwrap();
    let target = ds.target_ids();
    assert_eq!(out.state.eval_ids(EvalSet::Remaining).len(), target.len() - 20);
    for r in &out.records[1..] {
        assert_eq!(r.selected.len(), 5);
        assert_eq!(r.labels, r.selected.iter().map(|&i| ds.label(i).unwrap()).collect::<Vec<_>>());
        assert!(r.oa >= 0.0 && r.oa <= 1.0);
    }
}

#[test]
fn budget_zero_records_only_the_initial_evaluation() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 3, 1).unwrap();
    let mut k = kernels(&ds, &initial);
    let mut oracle = GroundTruthOracle::from_dataset(&ds);
    let out = run_active_loop(&config(Strategy::Margin, 5, 0), &ds, &mut k, &initial, &mut oracle).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].added, 0);
}

#[test]
fn pool_exhaustion_stops_cleanly() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 3, 1).unwrap();
    let mut k = kernels(&ds, &initial);
    let mut oracle = GroundTruthOracle::from_dataset(&ds);
    let mut cfg = config(Strategy::Random, 25, 5);
    cfg.eval_on = EvalSet::All;
    let out = run_active_loop(&cfg, &ds, &mut k, &initial, &mut oracle).unwrap();
    assert_eq!(out.stop, StopReason::PoolExhausted);
    assert_eq!(out.records.iter().map(|r| r.added).collect::<Vec<_>>(), vec![0, 25, 50, 60]);
    assert!(out.state.pool().is_empty());
}

#[test]
fn twenty_per_query_for_ten_iterations_acquires_two_hundred() {
    let ds = synth_shifted(&SynthConfig {
        num_classes: 3,
        dimension: 3,
        per_class_source: 5,
        per_class_target: 80,
        ..SynthConfig::default()
    })
    .unwrap();
    let initial = stratified_initial_sample(&ds, 2, 0).unwrap();
    let mut k = kernels(&ds, &initial);
    let mut oracle = GroundTruthOracle::from_dataset(&ds);
    let out = run_active_loop(&config(Strategy::Random, 20, 10), &ds, &mut k, &initial, &mut oracle).unwrap();
    assert_eq!(out.state.acquired().len(), 200);
    assert_eq!(out.records.len(), 11);
}

struct AbortAfter(usize);

impl Oracle for AbortAfter {
    fn label(&mut self, _id: usize, _features: &[f64]) -> Result<Option<usize>> {
        if self.0 == 0 {
            return Ok(None);
        }
        self.0 -= 1;
        Ok(Some(0))
    }
}

#[test]
fn operator_abort_keeps_partial_history() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 3, 1).unwrap();
    let mut k = kernels(&ds, &initial);
    let out = run_active_loop(&config(Strategy::Margin, 4, 5), &ds, &mut k, &initial, &mut AbortAfter(6)).unwrap();
    assert_eq!(out.stop, StopReason::OperatorAbort);
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.state.acquired().len(), 4);
}

#[test]
fn runs_are_pure_functions_of_their_inputs() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 3, 1).unwrap();
    for strategy in [Strategy::Margin, Strategy::Random] {
        let run = || {
            let mut k = kernels(&ds, &initial);
            let mut oracle = GroundTruthOracle::from_dataset(&ds);
            run_active_loop(&config(strategy, 3, 3), &ds, &mut k, &initial, &mut oracle).unwrap()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn margin_scores_match_recomputation() {
    let ds = small_dataset();
    let initial = stratified_initial_sample(&ds, 4, 2).unwrap();
    let k = kernels(&ds, &initial);
    let labels: Vec<usize> = initial.iter().map(|&i| ds.label(i).unwrap()).collect();
    let model = train_on(&k.bank, &initial, &labels, &k.context, 1.0, 0.25, &MklOptions::default()).unwrap();
    assert_eq!(model.classes.len(), 3);
    let pool = ds.target_ids();
    let batch = batch_decisions(&model, &k.bank, &pool).unwrap();
    let grams: Vec<_> = k.bank.matrices().iter().map(|m| m.values().clone()).collect();
    let cols = k.bank.positions(&initial).unwrap();
    for (row, &id) in batch.iter().zip(&pool) {
        let x = k.bank.position(id).unwrap();
        let per_class: Vec<f64> = model
            .classes
            .iter()
            .map(|c| {
                common::decision_reference(&grams, &c.weights, &c.binary.dual.alpha, &c.binary.labels, c.binary.dual.b, &cols, x)
            })
            .collect();
        for (a, b) in row.iter().zip(&per_class) {
            assert!((a - b).abs() < 1e-10);
        }
        let expected = per_class.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let score = margin_score(&model, k.bank.rows_at(x, &cols).view()).unwrap();
        assert!((score - expected).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn margin_selection_is_the_q_smallest(
        scores in proptest::collection::vec(0.0f64..1.0, 1..40),
        q in 1usize..10,
        quantize in proptest::bool::ANY,
    ) {
        let scores: Vec<f64> = if quantize { scores.iter().map(|s| (s * 4.0).floor()).collect() } else { scores };
        let pool: Vec<usize> = (0..scores.len()).map(|i| 3 * i + 1).collect();
        let mut rng = seeded_rng(0, Stream::Test);
        let picked = select_queries(Strategy::Margin, &pool, &scores, q, &mut rng).unwrap();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        let mut expected: Vec<usize> = order.iter().take(q).map(|&i| pool[i]).collect();
        expected.sort_unstable();
        prop_assert_eq!(picked, expected);
    }

    #[test]
    fn random_selection_is_a_subset_without_repeats(n in 1usize..60, q in 1usize..20, seed in 0u64..1000) {
        let pool: Vec<usize> = (0..n).map(|i| i * 2).collect();
        let mut rng = seeded_rng(seed, Stream::Query);
        let picked = select_queries(Strategy::Random, &pool, &[], q, &mut rng).unwrap();
        prop_assert_eq!(picked.len(), q.min(n));
        let unique: BTreeSet<usize> = picked.iter().copied().collect();
        prop_assert_eq!(unique.len(), picked.len());
        prop_assert!(picked.iter().all(|id| pool.contains(id)));
    }
}

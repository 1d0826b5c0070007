mod common;

use common::{oracle, toy, toy_config};
use incoherence::estimators::{
    coupled_witness_check, detect_incoherence, empirical_error, empirical_incoherence, estimate_error,
    estimate_incoherence, estimation_sample_size, plan_detection_samples, plan_estimation_samples, ExecSemantics,
    InfrastructureError, UniformCoder, UniformGen,
};
use incoherence::runner::ShimPool;
use incoherence::simulator::{
    as_sampling_coder, as_sampling_gen, int_domain, quarter_instance, random_instance, OutputTable,
    RandomInstanceConfig, SyntheticCoder, SyntheticGen, TableSemantics,
};
use incoherence::{Exact, ExactInstance, FloatPolicy, PacParams, Probability, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn planners_agree_with_a_direct_search() {
    for &eps in &[0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.9] {
        for &delta in &[0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9] {
            let p = PacParams::new(eps, delta).unwrap();
            assert_eq!(plan_estimation_samples(&p), oracle::smallest_estimation_n(eps, delta), "{eps} {delta}");
            assert_eq!(plan_detection_samples(&p), oracle::smallest_detection_n(eps, delta), "{eps} {delta}");
        }
    }
}

#[test]
fn planner_reference_values() {
    let n = |e, d| plan_estimation_samples(&PacParams::new(e, d).unwrap());
    let k = |e, d| plan_detection_samples(&PacParams::new(e, d).unwrap());
    assert_eq!(n(0.1, 0.05), 185);
    assert_eq!(n(0.05, 0.05), 738);
    assert_eq!(k(0.1, 0.05), 29);
    assert_eq!(k(0.5, 0.5), 1);
    assert_eq!(k(0.01, 0.01), 459);
    assert_eq!(estimation_sample_size(0.5, 1.999).unwrap(), 1);
    assert!(estimation_sample_size(0.5, 2.0).is_err());
    assert!(PacParams::new(0.0, 0.5).is_err());
    assert!(PacParams::new(0.5, 1.0).is_err());
    assert_eq!(PacParams::default().epsilon(), 0.05);
}

fn exact_f64(inst: &ExactInstance) -> (f64, f64) {
    (oracle::pointwise_error(inst).to_f64(), oracle::pointwise_incoherence(inst).to_f64())
}

#[test]
fn estimates_land_within_epsilon_of_exact_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let p = PacParams::new(0.1, 0.05).unwrap();
    let runs = 200;
    let mut misses = (0, 0);
    for _ in 0..runs {
        let inst = random_instance(&RandomInstanceConfig::default(), &mut rng);
        let (err, inc) = exact_f64(&inst);
        let sem = inst.semantics();
        let c = as_sampling_coder(&inst.coder);
        let g = as_sampling_gen(&inst.gen);
        let e = estimate_error(&c, &g, &sem.gt_index(), &sem, &p, &mut rng).unwrap();
        let i = estimate_incoherence(&c, &g, &sem, &p, &mut rng).unwrap();
        assert_eq!(e.samples_used, 185);
        misses.0 += ((e.estimate() - err).abs() > 0.1) as usize;
        misses.1 += ((i.estimate() - inc).abs() > 0.1) as usize;
    }
    assert!(misses.0 as f64 <= 0.08 * runs as f64, "{misses:?}");
    assert!(misses.1 as f64 <= 0.08 * runs as f64, "{misses:?}");
}

#[test]
fn detection_stops_at_the_first_disagreement() {
    let inst = quarter_instance::<Exact>();
    let sem = inst.semantics();
    let c = as_sampling_coder(&inst.coder);
    let g = as_sampling_gen(&inst.gen);
    let p = PacParams::new(0.1, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0;
    for _ in 0..500 {
        let d = detect_incoherence(&c, &g, &sem, &p, &mut rng).unwrap();
        if let Some(w) = &d.witness {
            assert!(w.replay(&sem).unwrap());
            assert_eq!(w.input, 1);
            assert_ne!(w.first, w.second);
        }
        assert!(d.trials_used <= 29);
        total += d.trials_used;
    }
    // geometric with success probability 1/4, truncated at 29
    let mean = total as f64 / 500.0;
    assert!((3.0..5.0).contains(&mean), "{mean}");
}

fn disagreeing_pair() -> (SyntheticCoder<Exact>, OutputTable) {
    let n = 4;
    let a = OutputTable::from_ints(&[0; 4]);
    let b = OutputTable::from_ints(&[1; 4]);
    assert_eq!(a.len(), n);
    (SyntheticCoder::uniform(vec![a.clone(), b]).unwrap(), a)
}

#[test]
fn empirical_variance_shrinks_with_n() {
    let (c, gt) = disagreeing_pair();
    let sem = TableSemantics::new(&c, Some(&gt));
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut variances = Vec::new();
    for n in [10usize, 100, 1000] {
        let inputs: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let vals: Vec<f64> = (0..300)
            .map(|_| empirical_incoherence(&[0usize, 1], &inputs, &sem, &mut rng).unwrap().value::<f64>())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((mean - 0.5).abs() < 0.05, "{n}: {mean}");
        variances.push(var);
    }
    assert!(variances[0] > variances[1] && variances[1] > variances[2], "{variances:?}");
}

#[test]
fn empirical_error_counts_ground_truth_mismatches() {
    let (c, gt) = disagreeing_pair();
    let sem = TableSemantics::new(&c, Some(&gt));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inputs: Vec<usize> = (0..4).cycle().take(4000).collect();
    let r = empirical_error(&[0usize, 1], &sem.gt_index(), &inputs, &sem, &mut rng).unwrap();
    let v = r.value::<f64>();
    assert!((v - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt() + 1e-9, "{v}");
    let w = r.witness.unwrap();
    assert_eq!((w.first, w.second), (1, sem.gt_index()));
    let perfect = empirical_error(&[0usize], &sem.gt_index(), &inputs, &sem, &mut rng).unwrap();
    assert_eq!(perfect.mismatches, 0);
    assert!(perfect.witness.is_none());
    let exact: Exact = perfect.value();
    assert_eq!(exact, Exact::from_ratio(0, 1));
}

#[test]
fn empirical_estimators_reject_empty_arguments() {
    let (c, gt) = disagreeing_pair();
    let sem = TableSemantics::new(&c, Some(&gt));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(empirical_incoherence::<usize, usize, _, _>(&[], &[0], &sem, &mut rng).is_err());
    assert!(empirical_incoherence(&[0usize], &[] as &[usize], &sem, &mut rng).is_err());
}

#[test]
fn coupled_terms_are_explained_by_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let inst = random_instance(&RandomInstanceConfig::default(), &mut rng);
        let sem = inst.semantics();
        let candidates: Vec<usize> = (0..inst.coder.programs.len()).collect();
        let inputs: Vec<usize> = (0..50).map(|i| i % inst.gen.support.len()).collect();
        let c = coupled_witness_check(&candidates, &sem.gt_index(), &inputs, &sem, &mut rng).unwrap();
        assert!(c.holds(), "{c:?}");
    }
}

#[test]
fn exec_semantics_runs_real_programs() {
    let pool = ShimPool::new("toy", toy_config(10.0)).unwrap();
    let sem = ExecSemantics {
        executor: &pool,
        policy: FloatPolicy::default(),
    };
    let gt = toy("gt", "fn f\nabs");
    let cands = vec![toy("a", "fn f\nabs"), toy("b", "fn f\nif_lt 0 const {\"t\":\"int\",\"v\":\"0\"}")];
    let inputs: Vec<Vec<Value>> = (-5..5).map(|i| vec![Value::int(i)]).collect();
    let coder = UniformCoder { candidates: &cands };
    let gen = UniformGen { inputs: &inputs };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = PacParams::new(0.2, 0.1).unwrap();
    let e = estimate_error(&coder, &gen, &gt, &sem, &p, &mut rng).unwrap();
    assert!((e.estimate() - 0.25).abs() < 0.2);
    let d = detect_incoherence(&coder, &gen, &sem, &p, &mut rng).unwrap();
    if let Some(w) = d.witness {
        assert!(w.replay(&sem).unwrap());
    }
    // a reference that raises is an infrastructure failure, not a sample
    let broken = toy("gt2", "fn f\nraise nope");
    let err = estimate_error(&coder, &gen, &broken, &sem, &p, &mut rng).unwrap_err();
    assert!(matches!(err, InfrastructureError::GroundTruthAbort { .. }), "{err:?}");
}

#[test]
fn probabilities_convert_between_scalars() {
    let g = SyntheticGen::<f64>::uniform(int_domain(3)).unwrap();
    assert_eq!(g.probabilities.len(), 3);
    assert_eq!(Exact::from_ratio(3, 12), Exact::from_ratio(1, 4));
}

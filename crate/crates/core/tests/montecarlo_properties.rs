use std::sync::Arc;

use kramers_core::linalg::{Matrix, Vector};
use kramers_core::{DomainSpec, Model};
use kramers_core::models::{ConstantBenchmark, WallGravity};
use kramers_core::montecarlo::{non_increasing_within_ci, run_experiment, run_with_model};
use kramers_core::{coupled_outcome, CoupledSpec, ExecutionPolicy, ExperimentPlan, ModelSpec};

#[test]
fn noiseless_benchmark_gives_a_deterministic_indicator() {
    let bench = ConstantBenchmark {
        dim: 1,
        friction: 1.0,
        noise: 0.0,
        spring: 1.0,
    };
    let model = bench.build::<1>().unwrap();
    let masses = vec![1e-1, 1e-2, 1e-3, 1e-4];
    let sups: Vec<f64> = masses
        .iter()
        .map(|&m| coupled_outcome(&model, &CoupledSpec::new(Vector::<1>::new(1.0), m, 1.0, 1e-4, 0, 0)).sup_distance)
        .collect();
    // threshold between the m = 1e-2 and m = 1e-3 sup-distances
    let eps = (sups[1] * sups[2]).sqrt();
    let plan = ExperimentPlan {
        model: ModelSpec::Constant(bench),
        x0: Some(vec![1.0]),
        horizon: 1.0,
        dt: 1e-4,
        epsilons: vec![eps],
        masses,
        n_paths: 8,
        master_seed: 3,
    };
    let table = run_experiment(&plan, ExecutionPolicy::default()).unwrap().convergence;
    let p: Vec<f64> = table.rows.iter().map(|r| r.p_exceed).collect();
    assert_eq!(p, vec![1.0, 1.0, 0.0, 0.0]);
}

#[test]
fn nothing_exits_all_space() {
    let plan = ExperimentPlan {
        model: ModelSpec::Constant(ConstantBenchmark::default()),
        x0: None,
        horizon: 0.5,
        dt: 1e-3,
        epsilons: vec![0.05],
        masses: vec![1.0, 0.1],
        n_paths: 50,
        master_seed: 1,
    };
    let r = run_experiment(&plan, ExecutionPolicy::default()).unwrap();
    assert!(r.exits.rows.iter().all(|row| row.p_exit == 0.0 && row.ci_low == 0.0));
    assert!(r.convergence.rows.iter().all(|row| row.limit_exits == 0));
}

#[test]
fn coupled_counts_decrease_with_mass_and_dominate_exits() {
    let plan = ExperimentPlan {
        model: ModelSpec::WallGravity(WallGravity::default()),
        x0: Some(vec![0.03]),
        horizon: 0.2,
        dt: 1e-4,
        epsilons: vec![0.02, 0.1],
        masses: vec![1e-1, 1e-2, 1e-3],
        n_paths: 200,
        master_seed: 5,
    };
    let r = run_experiment(&plan, ExecutionPolicy::default()).unwrap();
    assert!(r.within_quarantine());
    for row in &r.convergence.rows {
        assert!(row.exceed_count >= row.exit_count);
        assert!(row.ci_low <= row.p_exceed && row.p_exceed <= row.ci_high);
    }
    for eps in &plan.epsilons {
        let est: Vec<_> = r
            .convergence
            .rows_for_epsilon(*eps)
            .map(|row| (row.p_exceed, row.ci_low, row.ci_high))
            .collect();
        assert!(non_increasing_within_ci(&est), "eps {eps}: {est:?}");
    }
    let exits: Vec<_> = r.exits.rows.iter().map(|row| (row.p_exit, row.ci_low, row.ci_high)).collect();
    assert!(non_increasing_within_ci(&exits), "{exits:?}");
}

#[test]
fn exits_count_as_exceedances() {
    // free Brownian particle in (0, 1): both processes leave readily
    let model = Model::<1, 1>::new(
        "free",
        DomainSpec::interval(0.0, 1.0).unwrap(),
        Arc::new(|_| Vector::<1>::zeros()),
        Arc::new(|_| Matrix::<1>::identity()),
        Arc::new(|_| Matrix::<1>::identity()),
    )
    .unwrap()
    .with_friction_grad(Arc::new(|_| [Matrix::<1>::zeros()]));
    let plan = ExperimentPlan {
        model: ModelSpec::Constant(ConstantBenchmark::default()),
        x0: Some(vec![0.1]),
        horizon: 0.5,
        dt: 1e-4,
        epsilons: vec![1e3],
        masses: vec![1e-1, 1e-3],
        n_paths: 100,
        master_seed: 9,
    };
    let r = run_with_model(&model, &plan, ExecutionPolicy::default()).unwrap();
    for row in &r.convergence.rows {
        assert!(row.exit_count > 0 && row.limit_exits > 0);
        // with ε huge, only a cemetery can exceed it
        assert!(row.exceed_count >= row.exit_count.max(row.limit_exits));
    }
}

#[test]
fn plan_round_trips_through_json() {
    let plan = ExperimentPlan::default();
    let back: ExperimentPlan = serde_json::from_str(&plan.to_json()).unwrap();
    assert_eq!(back, plan);
    assert!(serde_json::from_str::<ExperimentPlan>(r#"{"model":{"model":"constant"},"T":1,"dt":0.1,"epsilons":[0.1],"masses":[1],"n_paths":1,"master_seed":0,"bogus":1}"#).is_err());
}

use kramers_core::linalg::Vector;
use kramers_core::models::{ConstantBenchmark, WallGravity};
use kramers_core::{
    coupled_outcome, simulate_coupled, step_overdamped, CoupledSpec, ExtendedState, ModelSpec, NoiseStream,
};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn overdamped_ou_moments() {
    let c = ConstantBenchmark {
        dim: 1,
        friction: 2.0,
        noise: 1.0,
        spring: 1.0,
    };
    let model = c.build::<1>().unwrap();
    let (x0, horizon, dt, paths) = (1.0, 1.0, 1e-3, 4000);
    let steps = (horizon / dt) as usize;
    let finals: Vec<f64> = (0..paths)
        .map(|i| {
            let mut noise = NoiseStream::<1>::new(5, i, dt);
            let mut s = ExtendedState::InDomain {
                x: Vector::<1>::new(x0),
                v: None,
            };
            for _ in 0..steps {
                s = step_overdamped(&model, &s, dt, &noise.next_increment()).unwrap();
            }
            s.position().unwrap()[0]
        })
        .collect();
    // dx = −θx dt + ς dB with θ = k/g, ς = s/g
    let theta = c.spring / c.friction;
    let vol = c.noise / c.friction;
    let mean = x0 * (-theta * horizon).exp();
    let var = vol * vol * (1.0 - (-2.0 * theta * horizon).exp()) / (2.0 * theta);
    let (m, se) = mean_and_se(&finals);
    assert!((m - mean).abs() < 3.0 * se, "mean {m} vs {mean} (se {se})");
    let sq: Vec<f64> = finals.iter().map(|x| (x - mean).powi(2)).collect();
    let (v, se_v) = mean_and_se(&sq);
    assert!((v - var).abs() < 3.0 * se_v, "var {v} vs {var} (se {se_v})");
}

#[test]
fn replay_is_bit_identical_under_concurrency() {
    let model = WallGravity::default().build().unwrap();
    let spec = CoupledSpec::new(Vector::<1>::new(0.4), 1e-3, 0.05, 1e-5, 17, 4);
    let reference = simulate_coupled(&model, &spec);
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let model = &model;
                scope.spawn(move || {
                    // unrelated work interleaved with the replay
                    let _ = coupled_outcome(model, &CoupledSpec::new(Vector::<1>::new(0.6), 1e-2, 0.05, 1e-5, 1, t));
                    simulate_coupled(model, &spec)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for r in results {
        assert_eq!(r, reference);
    }
}

#[test]
fn cemetery_is_absorbing_and_exit_means_leaving_the_domain() {
    let w = WallGravity::default();
    let model = w.build().unwrap();
    let mut exits = 0;
    for i in 0..200 {
        let mut spec = CoupledSpec::new(Vector::<1>::new(0.02), 1.0, 0.05, 1e-4, 3, i);
        // the soft wall repels strongly; some paths get a kick towards it
        spec.v0 = Vector::<1>::new(-5.0 * (i % 40) as f64);
        let pair = simulate_coupled(&model, &spec);
        for traj in [&pair.underdamped, &pair.limit] {
            if let Some(first) = traj.iter().position(|s| s.is_cemetery()) {
                assert!(traj[first..].iter().all(|s| s.is_cemetery()));
            }
            for s in traj.iter().filter_map(|s| s.position()) {
                assert!(s[0] > w.a && s[0] < w.b);
            }
        }
        match pair.outcome.exit_time_m {
            Some(_) => {
                exits += 1;
                assert_eq!(pair.outcome.sup_distance, f64::INFINITY);
            }
            None => assert!(pair.underdamped.iter().all(|s| !s.is_cemetery())),
        }
    }
    assert!(exits > 0 && exits < 200, "exits {exits}");
}

#[test]
fn halving_dt_keeps_second_moment_within_monte_carlo_error() {
    let model = ModelSpec::default_for("constant").unwrap();
    let kramers_core::AnyModel::One(model) = model.build().unwrap() else {
        unreachable!()
    };
    let second_moments = |dt: f64| {
        let (mut um, mut lim) = (Vec::new(), Vec::new());
        for i in 0..10_000 {
            let pair = simulate_coupled(
                &model,
                &CoupledSpec::new(Vector::<1>::new(0.5), 0.1, 0.5, dt, 99, i),
            );
            um.push(pair.underdamped.last().unwrap().position().unwrap()[0].powi(2));
            lim.push(pair.limit.last().unwrap().position().unwrap()[0].powi(2));
        }
        (mean_and_se(&um), mean_and_se(&lim))
    };
    let (a_um, a_lim) = second_moments(2e-3);
    let (b_um, b_lim) = second_moments(1e-3);
    for ((ma, sa), (mb, sb)) in [(a_um, b_um), (a_lim, b_lim)] {
        let ci = 1.959964 * (sa * sa + sb * sb).sqrt();
        assert!((ma - mb).abs() < ci, "{ma} vs {mb}, CI {ci}");
    }
}

#[test]
fn constant_benchmark_small_mass_tracks_limit() {
    let model = ConstantBenchmark::default().build::<1>().unwrap();
    let sup = |m: f64| -> Vec<f64> {
        (0..40)
            .map(|i| coupled_outcome(&model, &CoupledSpec::new(Vector::<1>::new(0.0), m, 1.0, 1e-5, 21, i)).sup_distance)
            .collect()
    };
    let big = sup(1e-1);
    let small = sup(1e-4);
    let wins = big.iter().zip(&small).filter(|(b, s)| b > s).count();
    assert!(wins >= 38, "m=1e-1 should dominate m=1e-4 pathwise, won {wins}/40");
    assert!(small.iter().filter(|&&s| s > 0.05).count() <= 4);
}

//! The noise-induced drift computed through the generic Lyapunov pipeline against the
//! closed forms of the three physical models.

use approx::assert_relative_eq;
use kramers_core::linalg::{Matrix, Vector};
use kramers_core::lyapunov::{default_fd_step, finite_difference_grad, grad_friction_inverse};
use kramers_core::models::{
    from_fluctuation_dissipation, limiting_coefficients, DiffusionProfile, DlvoPair, RotationalPore,
    WallGravity,
};
use kramers_core::{noise_induced_drift, DomainSpec, Model};
use std::sync::Arc;

#[test]
fn wall_gravity_drift_is_d_prime() {
    let w = WallGravity::default();
    let model = w.build().unwrap();
    let fd_model = model.without_friction_grad();
    let prof = w.profile().unwrap();
    for x in model.domain().grid_points::<1>(1000) {
        let expected = prof.d_prime(x[0]);
        let h = default_fd_step(&x);
        assert!((noise_induced_drift(&model, &x).unwrap()[0] - expected).abs() < 1e-8);
        if model.domain().boundary_distance(x.as_slice()) > h {
            let fd = noise_induced_drift(&fd_model, &x).unwrap()[0];
            assert!((fd - expected).abs() < 1e-8_f64.max(10.0 * h * h) * (1.0 + expected.abs()), "x={x} fd={fd} exact={expected}");
        }
    }
    let mid = Vector::<1>::new(w.midpoint());
    assert!(grad_friction_inverse(&model, &mid, None).unwrap()[0][(0, 0)].abs() < 1e-15);
}

#[test]
fn dlvo_pair_drift_alternates_sign() {
    let p = DlvoPair::default();
    let model = p.build().unwrap();
    let prof = p.profile().unwrap();
    for x in model.domain().grid_points::<2>(1000) {
        let dp = prof.d_prime(x[1] - x[0]);
        let s = noise_induced_drift(&model, &x).unwrap();
        assert!((s[0] + dp).abs() < 1e-8 && (s[1] - dp).abs() < 1e-8);
    }
}

#[test]
fn rotational_pore_drift_is_radial() {
    let r = RotationalPore::default();
    let model = r.build().unwrap();
    let prof = r.profile().unwrap();
    for x in model.domain().grid_points::<2>(1000) {
        let expected = x * (2.0 * prof.d_prime(x.norm_squared()));
        assert!((noise_induced_drift(&model, &x).unwrap() - expected).norm() < 1e-8);
    }
}

#[test]
fn rotational_pore_limiting_equation_term_by_term() {
    let r = RotationalPore {
        omega: 2.5,
        kbt: 0.7,
        ..Default::default()
    };
    let model = r.build().unwrap();
    let prof = r.profile().unwrap();
    let points = [
        Vector::<2>::new(0.1, 0.2),
        Vector::<2>::new(-0.5, 0.3),
        Vector::<2>::new(0.0, -0.9),
        Vector::<2>::new(0.6, 0.6),
        Vector::<2>::new(-0.2, -0.05),
    ];
    for x in points {
        let s = x.norm_squared();
        let (d, dp, up) = (prof.d(s), prof.d_prime(s), r.radial_d1(s));
        let lc = limiting_coefficients(&model, &x).unwrap();
        // dx_i = [∓Ω x_j − 2x_i 𝒰′(r²) 𝒟(r²)/k_BT + 2x_i 𝒟′(r²)] dt + √(2𝒟(r²)) dB_i
        let expected = Vector::<2>::new(
            -r.omega * x[1] - 2.0 * x[0] * up * d / r.kbt + 2.0 * x[0] * dp,
            r.omega * x[0] - 2.0 * x[1] * up * d / r.kbt + 2.0 * x[1] * dp,
        );
        assert_relative_eq!(lc.drift, expected, max_relative = 1e-10, epsilon = 1e-12);
        assert_relative_eq!(lc.diffusion, Matrix::<2>::identity() * (2.0 * d).sqrt(), max_relative = 1e-12);
    }
}

#[test]
fn finite_differences_converge_at_second_order() {
    let w = WallGravity::default();
    let model = w.build().unwrap();
    let x = Vector::<1>::new(0.3);
    let exact = grad_friction_inverse(&model, &x, None).unwrap()[0][(0, 0)];
    let err = |h: f64| (finite_difference_grad(&model, &x, h).unwrap()[0][(0, 0)] - exact).abs();
    let (e1, e2) = (err(1e-2), err(5e-3));
    // central differences: halving h divides the error by ~4
    assert!((e1 / e2 - 4.0).abs() < 0.1, "ratio {}", e1 / e2);

    let p = DlvoPair::default();
    let model = p.build().unwrap();
    let x = Vector::<2>::new(-0.4, 0.3);
    let exact = grad_friction_inverse(&model, &x, None).unwrap();
    for l in 0..2 {
        let err = |h: f64| (finite_difference_grad(&model, &x, h).unwrap()[l] - exact[l]).norm();
        let ratio = err(2e-2) / err(1e-2);
        assert!((ratio - 4.0).abs() < 0.2, "l={l} ratio {ratio}");
    }
}

#[test]
fn finite_differences_refuse_points_near_the_wall() {
    let model = WallGravity::default().build().unwrap();
    let x = Vector::<1>::new(1e-6);
    assert!(matches!(
        finite_difference_grad(&model, &x, 1e-5),
        Err(kramers_core::Error::BoundaryTooClose { .. })
    ));
}

#[test]
fn user_supplied_profile_in_one_dimension() {
    // D(x) = 1 + x²/2 on R: S = D′ = x for any fluctuation–dissipation model
    let profile = DiffusionProfile::<1>::new(
        Arc::new(|x: &Vector<1>| 1.0 + 0.5 * x[0] * x[0]),
        Arc::new(|x: &Vector<1>| *x),
        2.0,
    )
    .unwrap();
    let model: Model<1, 1> =
        from_fluctuation_dissipation("user", profile, Arc::new(|x: &Vector<1>| -x), DomainSpec::AllSpace).unwrap();
    let fd = model.without_friction_grad();
    for x in [-2.0, -0.3, 0.0, 0.8, 2.5] {
        let v = Vector::<1>::new(x);
        let h = default_fd_step(&v);
        assert_relative_eq!(noise_induced_drift(&model, &v).unwrap()[0], x, epsilon = 1e-12);
        assert!((noise_induced_drift(&fd, &v).unwrap()[0] - x).abs() < 1e-8_f64.max(10.0 * h * h));
    }
}

#[test]
fn builtin_models_satisfy_assumptions_on_a_grid() {
    fn check<const N: usize>(model: &Model<N, N>, kbt: f64) {
        for x in model.domain().grid_points::<N>(1000) {
            let g = model.friction(&x).expect("positive-definite friction");
            let s = model.diffusion(&x).unwrap().sigma_sq();
            assert_relative_eq!(s, g.as_matrix() * (2.0 * kbt), max_relative = 1e-13);
        }
    }
    let w = WallGravity::default();
    check(&w.build().unwrap(), w.kbt);
    let p = DlvoPair::default();
    check(&p.build().unwrap(), p.kbt);
    let r = RotationalPore::default();
    check(&r.build().unwrap(), r.kbt);
}

#[test]
fn forces_are_minus_potential_gradients() {
    let w = WallGravity::default();
    let model = w.build().unwrap();
    for x in model.domain().grid_points::<1>(200) {
        let h = 1e-6;
        let fd = (w.potential(x[0] + h) - w.potential(x[0] - h)) / (2.0 * h);
        assert_relative_eq!(model.force(&x)[0], -fd, max_relative = 1e-6, epsilon = 1e-6);
    }
    let p = DlvoPair::default();
    let model = p.build().unwrap();
    for x in model.domain().grid_points::<2>(200) {
        let u = p.potential_grad(&x);
        assert_relative_eq!(model.force(&x), -u, max_relative = 1e-12);
        // (∂₁ + ∂₂)U = k(x₁ + x₂)
        assert_relative_eq!(u[0] + u[1], p.k_spring * (x[0] + x[1]), max_relative = 1e-9, epsilon = 1e-9);
    }
}

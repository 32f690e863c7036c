use cropctl::integrate::{crank_nicolson_step, integrate_forward, ControlPath, Scheme};
use cropctl::model::{state_rhs, system_matrix};
use cropctl::pmp::{
    hamiltonian, hamiltonian_parts, optimal_control, switching_coefficient, switching_function,
};
use cropctl::{Adjoint, AdjointMode, ModelParams, State};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (
        (0.01..1.0f64, 0.0..0.2f64, 0.05..1.0f64, 0.05..0.5f64),
        (0.05..1.0f64, 0.0..0.2f64, 0.0..0.5f64),
    )
        .prop_map(
            |((alpha, delta_s, rho, gamma), (beta, delta_e, theta))| ModelParams {
                alpha,
                delta_s: delta_s + 1e-3,
                rho,
                gamma,
                beta,
                delta_e,
                theta,
                n_steps: 60,
                ..ModelParams::baseline()
            },
        )
}

fn state() -> impl Strategy<Value = State> {
    (0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64).prop_map(|(s, r, e)| State::new(s, r, e))
}

fn adjoint() -> impl Strategy<Value = Adjoint> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(a, b, c)| Adjoint::new(a, b, c))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #[test]
    fn state_rhs_is_linear_in_the_state(
        p in params(), x1 in state(), x2 in state(), u in 0.0..=1.0f64,
        a in -3.0..3.0f64, b in -3.0..3.0f64,
    ) {
        let combo = State::new(a * x1.s + b * x2.s, a * x1.r + b * x2.r, a * x1.e + b * x2.e);
        let lhs = state_rhs(&combo, u, &p).unwrap();
        let (f1, f2) = (state_rhs(&x1, u, &p).unwrap(), state_rhs(&x2, u, &p).unwrap());
        let scale = 1e3 * (x1.max_abs() + x2.max_abs());
        prop_assert!(close(lhs.s, a * f1.s + b * f2.s, scale));
        prop_assert!(close(lhs.r, a * f1.r + b * f2.r, scale));
        prop_assert!(close(lhs.e, a * f1.e + b * f2.e, scale));
    }

    #[test]
    fn energy_gain_never_below_decay(p in params(), x in state(), u in 0.0..=1.0f64) {
        let dx = state_rhs(&x, u, &p).unwrap();
        let floor = -p.delta_e * x.e;
        prop_assert!(dx.e >= floor);
        prop_assert_eq!(dx.e == floor, u * x.r == 0.0);
    }

    #[test]
    fn boundary_faces_point_inward(p in params(), x in state(), u in 0.0..=1.0f64) {
        prop_assert!(state_rhs(&State::new(0.0, x.r, x.e), u, &p).unwrap().s >= 0.0);
        prop_assert!(state_rhs(&State::new(x.s, 0.0, x.e), u, &p).unwrap().r >= 0.0);
        prop_assert!(state_rhs(&State::new(x.s, x.r, 0.0), u, &p).unwrap().e >= 0.0);
    }

    #[test]
    fn no_diversion_keeps_energy_empty(p in params()) {
        let u = ControlPath::constant(p.n_steps, 0.0).unwrap();
        for scheme in [Scheme::CrankNicolson, Scheme::Rk4] {
            let traj = integrate_forward(&u, &p, scheme).unwrap();
            prop_assert!(traj.states.iter().all(|x| x.e == 0.0));
        }
    }

    #[test]
    fn projection_is_idempotent(raw in prop::collection::vec(-2.0..3.0f64, 1..40)) {
        let once = ControlPath::projected(raw).unwrap();
        let twice = ControlPath::projected(once.values().to_vec()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.values().iter().all(|u| (0.0..=1.0).contains(u)));
    }

    #[test]
    fn random_paths_stay_nonnegative(
        p in params(),
        u in prop::collection::vec(0.0..=1.0f64, 60),
    ) {
        let traj = integrate_forward(&ControlPath::new(u).unwrap(), &p, Scheme::CrankNicolson).unwrap();
        for x in &traj.states {
            prop_assert!(x.is_finite());
            prop_assert!(x.min_component() >= -1e-10);
        }
    }

    #[test]
    fn baseline_paths_stay_bounded(u in prop::collection::vec(0.0..=1.0f64, 250)) {
        let p = ModelParams { n_steps: 250, ..ModelParams::baseline() };
        let traj = integrate_forward(&ControlPath::new(u).unwrap(), &p, Scheme::CrankNicolson).unwrap();
        prop_assert!(traj.states.iter().all(|x| x.max_abs() < 1e6));
    }

    #[test]
    fn crank_nicolson_step_satisfies_trapezoid(p in params(), x in state(), u in 0.0..=1.0f64, h in 1e-3..0.5f64) {
        let next = crank_nicolson_step(&x, u, h, &p).unwrap();
        let a = system_matrix(u, &p);
        let residual = (next.to_vector() - x.to_vector()) - a * (next.to_vector() + x.to_vector()) * (0.5 * h);
        prop_assert!(residual.amax() <= 1e-12 * x.max_abs().max(1.0));
    }

    #[test]
    fn control_law_maximizes_hamiltonian(p in params(), x in state(), lam in adjoint()) {
        let mode = AdjointMode::CorrectedFromHamiltonian;
        let u_star = optimal_control(switching_coefficient(&lam, &p), x.r, &p);
        prop_assert!((0.0..=1.0).contains(&u_star));
        let best = hamiltonian(&x, u_star, &lam, &p, mode);
        for i in 0..=200 {
            let u = i as f64 / 200.0;
            prop_assert!(hamiltonian(&x, u, &lam, &p, mode) <= best + 1e-12 * best.abs().max(1.0));
        }
    }

    #[test]
    fn hamiltonian_is_concave_in_control(p in params(), x in state(), lam in adjoint(), u in 0.1..0.9f64) {
        let d = 1e-2;
        let mode = AdjointMode::PaperEq9;
        let h = |v: f64| hamiltonian(&x, v, &lam, &p, mode);
        let second = (h(u + d) - 2.0 * h(u) + h(u - d)) / (d * d);
        prop_assert!((second + 2.0 * p.c2).abs() <= 1e-6 * h(u).abs().max(1.0));
    }

    #[test]
    fn parts_reassemble_hamiltonian(p in params(), x in state(), lam in adjoint(), u in 0.0..=1.0f64) {
        for mode in [AdjointMode::PaperEq9, AdjointMode::CorrectedFromHamiltonian] {
            let parts = hamiltonian_parts(&x, &lam, &p, mode);
            let h = hamiltonian(&x, u, &lam, &p, mode);
            prop_assert!(close(parts.evaluate(u, x.r, &p), h, h.abs()));
        }
    }

    #[test]
    fn zero_control_iff_switching_nonpositive(p in params(), x in state(), lam in adjoint()) {
        let u = optimal_control(switching_coefficient(&lam, &p), x.r, &p);
        prop_assert_eq!(u == 0.0, switching_function(&x, &lam, &p) <= 0.0);
    }
}

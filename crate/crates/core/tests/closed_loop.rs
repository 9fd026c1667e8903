use std::f64::consts::PI;

use neurofl_core::{
    binomial_gains, compute_metrics, default_network, hurwitz_check, pendulum_plant, rk4_step,
    run_closed_loop, ControlMode, ControllerState, DisturbanceSpec, PlantModel, ReferenceSpec,
    Sinusoid, Trajectory,
};

const G: f64 = 9.81;

fn pendulum(c: f64) -> PlantModel {
    pendulum_plant(1.0, 1.0, c, G).unwrap()
}

fn sine() -> ReferenceSpec {
    ReferenceSpec::Sinusoid(Sinusoid {
        amplitude: 1.0,
        angular_frequency: 1.0,
        phase: 0.0,
    })
}

fn baseline(lambda: f64) -> ControllerState {
    ControllerState::new(binomial_gains(2, lambda).unwrap(), ControlMode::Baseline)
}

/// Max over interior samples of `|e'' + k1 e' + k0 e - rhs_k|`, with `e''`
/// from central differences of the logged velocity error.
fn error_dynamics_residual(traj: &Trajectory, k: &[f64], rhs: impl Fn(usize) -> f64) -> f64 {
    let e0: Vec<f64> = traj.records.iter().map(|r| r.x[0] - r.x_d[0]).collect();
    let e1: Vec<f64> = traj.records.iter().map(|r| r.x[1] - r.x_d[1]).collect();
    let dt = traj.dt;
    (1..e0.len() - 1)
        .map(|i| {
            let e2 = (e1[i + 1] - e1[i - 1]) / (2.0 * dt);
            (e2 + k[1] * e1[i] + k[0] * e0[i] - rhs(i)).abs()
        })
        .fold(0.0, f64::max)
}

// Under zero-order hold, e'' jumps at each sample by roughly dt * d/dt(f - xd_n + d),
// and the central difference sees half of that jump. The plant terms are bounded by
// g/l * |x'| + c * |x''| and the sine reference contributes |x_d'''| <= 1.
fn zoh_bound(traj: &Trajectory, c: f64, disturbance_rate: f64) -> f64 {
    let vmax = traj
        .records
        .iter()
        .map(|r| r.x[1].abs())
        .fold(0.0, f64::max);
    let amax = 15.0;
    let rate = G * vmax + c * amax + 1.0 + disturbance_rate;
    0.5 * traj.dt * rate * 1.5
}

#[test]
fn nominal_cancellation_reproduces_linear_error_dynamics() {
    let plant = pendulum(0.1);
    let mut maxima = Vec::new();
    for dt in [2e-3, 1e-3] {
        let traj = run_closed_loop(
            &plant,
            &plant,
            &baseline(2.0),
            &sine(),
            &DisturbanceSpec::none(),
            5.0,
            dt,
            2,
        )
        .unwrap();
        let residual = error_dynamics_residual(&traj, &[4.0, 4.0], |_| 0.0);
        assert!(
            residual <= zoh_bound(&traj, 0.1, 0.0),
            "residual {residual} at dt {dt}"
        );
        maxima.push(residual);
    }
    // first order in dt
    let ratio = maxima[0] / maxima[1];
    assert!((1.6..2.4).contains(&ratio), "residual ratio {ratio}");
}

#[test]
fn compensated_error_dynamics_match_disturbance_mismatch() {
    let plant = pendulum(0.1);
    let ctrl = ControllerState::new(
        binomial_gains(2, 2.0).unwrap(),
        ControlMode::Compensated(default_network(11, 0.5, 20.0).unwrap()),
    );
    let dist = DisturbanceSpec::sinusoid(0.8, 0.5, 0.2);
    let traj = run_closed_loop(&plant, &plant, &ctrl, &sine(), &dist, 5.0, 1e-3, 2).unwrap();
    let records = &traj.records;
    // e'' + k . e = d - d_hat
    let residual =
        error_dynamics_residual(&traj, &[4.0, 4.0], |i| records[i].d_true - records[i].d_hat);
    // sinusoid rate bound: 0.8 * 2 pi * 0.5
    let bound = zoh_bound(&traj, 0.1, 0.8 * PI) + 20.0 * traj.dt;
    assert!(residual <= bound, "residual {residual} > {bound}");
}

#[test]
fn constant_disturbance_settles_at_d_over_k0() {
    // Oracle: e'' + 4 e' + 4 e = d has equilibrium e = d / 4.
    let plant = pendulum(0.1);
    let d = 0.5;
    let traj = run_closed_loop(
        &plant,
        &plant,
        &baseline(2.0),
        &ReferenceSpec::Constant { level: 0.0 },
        &DisturbanceSpec::constant(d),
        20.0,
        1e-3,
        1,
    )
    .unwrap();
    let m = compute_metrics(&traj).unwrap();
    let expected = d / 4.0;
    assert!(
        (m.steady_state_error - expected).abs() <= 1e-3 * expected,
        "steady state {} vs {expected}",
        m.steady_state_error
    );
}

#[test]
fn runs_are_bitwise_deterministic() {
    let plant = pendulum(0.1);
    let ctrl = ControllerState::new(
        binomial_gains(2, 2.0).unwrap(),
        ControlMode::Compensated(default_network(7, 0.5, 10.0).unwrap()),
    );
    let dist = DisturbanceSpec::noise(0.5, 2.0, 1234, 1e-2);
    let run = || run_closed_loop(&plant, &plant, &ctrl, &sine(), &dist, 3.0, 1e-2, 3).unwrap();
    let a = run();
    let b = run();
    let bits = |t: &Trajectory| -> Vec<u64> {
        t.records
            .iter()
            .flat_map(|r| {
                r.x.iter()
                    .chain(&r.x_d)
                    .chain([&r.u, &r.s, &r.d_hat, &r.d_true, &r.w_norm])
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn unforced_pendulum_conserves_energy() {
    let plant = pendulum(0.0);
    let energy = |x: &[f64]| 0.5 * x[1] * x[1] + G * (1.0 - x[0].cos());
    let mut x = vec![1.0, 0.0];
    let e0 = energy(&x);
    let dt = 1e-3;
    for k in 0..10_000 {
        let t = k as f64 * dt;
        x = rk4_step(
            |y, tau| vec![y[1], plant.f(y, tau) + plant.b(y, tau) * 0.0],
            &x,
            t,
            dt,
        )
        .unwrap();
    }
    let drift = (energy(&x) - e0).abs() / e0;
    assert!(drift < 1e-6, "relative energy drift {drift}");
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let global_error = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut y = vec![1.0];
        for k in 0..steps {
            y = rk4_step(|y, _| vec![y[0]], &y, k as f64 * dt, dt).unwrap();
        }
        (y[0] - 1f64.exp()).abs()
    };
    let e = [global_error(1e-2), global_error(5e-3), global_error(2.5e-3)];
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn binomial_gains_are_hurwitz_across_orders() {
    for n in 1..=10 {
        for lambda in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let poly = binomial_gains(n, lambda)
                .unwrap()
                .characteristic_polynomial();
            assert!(hurwitz_check(&poly).unwrap(), "n = {n}, lambda = {lambda}");
            assert!(poly.eval(-lambda).abs() <= 1e-9 * lambda.powi(n as i32));
        }
    }
}

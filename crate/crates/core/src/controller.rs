//! Baseline feedback linearization and the RBF-compensated variant.

use crate::dynamics::{filtered_error, tracking_error, GainVector, StateVector};
use crate::error::{Error, Result};
use crate::plants::PlantModel;
use crate::rbf::RbfNetwork;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMode {
    Baseline,
    Compensated(RbfNetwork),
}

impl ControlMode {
    pub fn network(&self) -> Option<&RbfNetwork> {
        match self {
            ControlMode::Baseline => None,
            ControlMode::Compensated(net) => Some(net),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControlMode::Baseline => "baseline",
            ControlMode::Compensated(_) => "compensated",
        }
    }
}

/// Nominal model terms at the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalTerms {
    pub f: f64,
    pub b: f64,
    pub b_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSignal {
    pub u: f64,
    /// `u` was clamped to the symmetric input limit.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedControl {
    pub u: f64,
    pub s: f64,
    pub d_hat: f64,
    pub saturated: bool,
}

/// What happened during one [`ControllerState::control_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub u: f64,
    pub s: f64,
    pub d_hat: f64,
    pub weight_norm: f64,
    pub u_saturated: bool,
    pub weights_capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    gains: GainVector,
    mode: ControlMode,
    u_limit: Option<f64>,
    last_u: f64,
}

impl ControllerState {
    pub fn new(gains: GainVector, mode: ControlMode) -> Self {
        ControllerState {
            gains,
            mode,
            u_limit: None,
            last_u: 0.0,
        }
    }

    pub fn with_u_limit(mut self, limit: Option<f64>) -> Result<Self> {
        if let Some(l) = limit {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::domain(format!("u_limit must be > 0, got {l}")));
            }
        }
        self.u_limit = limit;
        Ok(self)
    }

    pub fn gains(&self) -> &GainVector {
        &self.gains
    }

    pub fn mode(&self) -> &ControlMode {
        &self.mode
    }

    pub fn network(&self) -> Option<&RbfNetwork> {
        self.mode.network()
    }

    pub fn u_limit(&self) -> Option<f64> {
        self.u_limit
    }

    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    /// `u = (-f + xd_n - k . e) / b`.
    pub fn fl_control(
        &self,
        x: &StateVector,
        x_d: &StateVector,
        xd_n: f64,
        nominal: NominalTerms,
    ) -> Result<ControlSignal> {
        check_b(nominal)?;
        let error = tracking_error(x, x_d)?;
        let feedback = self.gains.feedback(&error)?;
        let raw = (-nominal.f + xd_n - feedback) / nominal.b;
        Ok(self.saturate(raw))
    }

    /// `u = (-f + xd_n - k . e - d_hat(s)) / b`. Does not adapt the network.
    pub fn nn_fl_control(
        &self,
        x: &StateVector,
        x_d: &StateVector,
        xd_n: f64,
        nominal: NominalTerms,
        lambda: f64,
    ) -> Result<CompensatedControl> {
        let net = self.network().ok_or_else(|| {
            Error::Config("compensated control requested but the controller has no network".into())
        })?;
        check_b(nominal)?;
        let error = tracking_error(x, x_d)?;
        let feedback = self.gains.feedback(&error)?;
        let s = filtered_error(&error, lambda)?;
        let d_hat = net.output(s);
        let raw = (-nominal.f + xd_n - feedback - d_hat) / nominal.b;
        let ControlSignal { u, saturated } = self.saturate(raw);
        Ok(CompensatedControl {
            u,
            s,
            d_hat,
            saturated,
        })
    }

    /// One sampled control update: evaluate the nominal model, compute `u`,
    /// then (compensated mode) adapt the weights with the same `s` over `dt_ctrl`.
    pub fn control_step(
        &self,
        nominal: &PlantModel,
        x: &StateVector,
        x_d: &StateVector,
        xd_n: f64,
        t: f64,
        dt_ctrl: f64,
    ) -> Result<(f64, ControllerState, StepLog)> {
        if !(dt_ctrl > 0.0 && dt_ctrl.is_finite()) {
            return Err(Error::domain(format!("dt_ctrl must be > 0, got {dt_ctrl}")));
        }
        if x.order() != nominal.order() {
            return Err(Error::domain(format!(
                "state order {} does not match plant order {}",
                x.order(),
                nominal.order()
            )));
        }
        let terms = NominalTerms {
            f: nominal.f(x.values(), t),
            b: nominal.guarded_b(x.values(), t)?,
            b_min: nominal.b_min(),
        };
        let lambda = self.gains.lambda();

        match &self.mode {
            ControlMode::Baseline => {
                let signal = self.fl_control(x, x_d, xd_n, terms)?;
                let s = filtered_error(&tracking_error(x, x_d)?, lambda)?;
                let next = ControllerState {
                    last_u: signal.u,
                    ..self.clone()
                };
                let log = StepLog {
                    u: signal.u,
                    s,
                    d_hat: 0.0,
                    weight_norm: 0.0,
                    u_saturated: signal.saturated,
                    weights_capped: false,
                };
                Ok((signal.u, next, log))
            }
            ControlMode::Compensated(net) => {
                let out = self.nn_fl_control(x, x_d, xd_n, terms, lambda)?;
                let adapted = net.adapt_weights(out.s, dt_ctrl).map_err(|e| match e {
                    Error::Divergence { reason, .. } => Error::Divergence { t, reason },
                    other => other,
                })?;
                let log = StepLog {
                    u: out.u,
                    s: out.s,
                    d_hat: out.d_hat,
                    weight_norm: adapted.network.weight_norm(),
                    u_saturated: out.saturated,
                    weights_capped: adapted.capped,
                };
                let next = ControllerState {
                    gains: self.gains.clone(),
                    mode: ControlMode::Compensated(adapted.network),
                    u_limit: self.u_limit,
                    last_u: out.u,
                };
                Ok((out.u, next, log))
            }
        }
    }

    fn saturate(&self, raw: f64) -> ControlSignal {
        match self.u_limit {
            Some(limit) if raw.abs() > limit => ControlSignal {
                u: limit.copysign(raw),
                saturated: true,
            },
            _ => ControlSignal {
                u: raw,
                saturated: false,
            },
        }
    }
}

fn check_b(nominal: NominalTerms) -> Result<()> {
    if nominal.b.abs() >= nominal.b_min {
        Ok(())
    } else {
        Err(Error::Controllability {
            x: Vec::new(),
            t: f64::NAN,
            b: nominal.b,
            b_min: nominal.b_min,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::binomial_gains;
    use crate::plants::pendulum_plant;
    use crate::rbf::default_network;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn terms(f: f64, b: f64) -> NominalTerms {
        NominalTerms { f, b, b_min: 0.1 }
    }

    fn baseline(n: usize, lambda: f64) -> ControllerState {
        ControllerState::new(binomial_gains(n, lambda).unwrap(), ControlMode::Baseline)
    }

    fn compensated(net: RbfNetwork) -> ControllerState {
        ControllerState::new(
            binomial_gains(2, 2.0).unwrap(),
            ControlMode::Compensated(net),
        )
    }

    #[test]
    fn fl_control_examples() {
        let ctrl = baseline(2, 2.0);
        let z = sv(&[0.0, 0.0]);
        assert_eq!(
            ctrl.fl_control(&z, &z, 0.0, terms(0.0, 1.0)).unwrap().u,
            0.0
        );
        assert_eq!(
            ctrl.fl_control(&z, &z, 2.0, terms(-3.0, 2.0)).unwrap().u,
            2.5
        );
        let u = ctrl
            .fl_control(&sv(&[1.0, 0.5]), &z, 0.0, terms(0.0, 1.0))
            .unwrap()
            .u;
        assert_eq!(u, -6.0);
    }

    #[test]
    fn fl_control_guards_b() {
        let ctrl = baseline(1, 1.0);
        let z = sv(&[0.0]);
        assert!(matches!(
            ctrl.fl_control(&z, &z, 0.0, terms(0.0, 0.05)),
            Err(Error::Controllability { .. })
        ));
    }

    #[test]
    fn saturation_clamps_and_flags() {
        let ctrl = baseline(2, 2.0).with_u_limit(Some(4.0)).unwrap();
        let z = sv(&[0.0, 0.0]);
        let sig = ctrl
            .fl_control(&sv(&[1.0, 0.5]), &z, 0.0, terms(0.0, 1.0))
            .unwrap();
        assert_eq!(
            sig,
            ControlSignal {
                u: -4.0,
                saturated: true
            }
        );
        let sig = ctrl.fl_control(&z, &z, 2.0, terms(-3.0, 2.0)).unwrap();
        assert!(!sig.saturated);
        assert!(baseline(2, 2.0).with_u_limit(Some(0.0)).is_err());
    }

    #[test]
    fn nn_fl_control_examples() {
        let z = sv(&[0.0, 0.0]);
        // one neuron centred at s = 0 with w = 1 gives d_hat = 1 when the error is zero
        let net = RbfNetwork::new(vec![0.0], vec![1.0], vec![1.0], 1.0).unwrap();
        let out = compensated(net)
            .nn_fl_control(&z, &z, 0.0, terms(0.0, 2.0), 2.0)
            .unwrap();
        assert_eq!(out.d_hat, 1.0);
        assert_eq!(out.u, -0.5);
        assert_eq!(out.s, 0.0);

        let ctrl = compensated(default_network(5, 1.0, 1.0).unwrap());
        let x = sv(&[0.4, -0.1]);
        let x_d = sv(&[0.1, 0.2]);
        let nn = ctrl
            .nn_fl_control(&x, &x_d, 0.7, terms(1.5, 3.0), 2.0)
            .unwrap();
        let fl = ctrl.fl_control(&x, &x_d, 0.7, terms(1.5, 3.0)).unwrap();
        assert_eq!(nn.u, fl.u);
        assert_eq!(nn.d_hat, 0.0);

        assert!(matches!(
            baseline(2, 2.0).nn_fl_control(&z, &z, 0.0, terms(0.0, 1.0), 2.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_error_gives_zero_filtered_error() {
        for n in 1..=5 {
            let ctrl = ControllerState::new(
                binomial_gains(n, 3.0).unwrap(),
                ControlMode::Compensated(default_network(3, 1.0, 1.0).unwrap()),
            );
            let x = StateVector::new((0..n).map(|i| i as f64 * 0.3).collect()).unwrap();
            let out = ctrl
                .nn_fl_control(&x, &x, 0.0, terms(0.0, 1.0), 3.0)
                .unwrap();
            assert_eq!(out.s, 0.0);
        }
    }

    #[test]
    fn baseline_step_keeps_controller() {
        let plant = pendulum_plant(1.0, 1.0, 0.1, 9.81).unwrap();
        let ctrl = baseline(2, 2.0);
        let x = sv(&[0.2, 0.1]);
        let x_d = sv(&[0.0, 0.0]);
        let (u, next, log) = ctrl.control_step(&plant, &x, &x_d, 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(next.gains(), ctrl.gains());
        assert_eq!(next.mode(), ctrl.mode());
        assert_eq!(next.last_u(), u);
        assert_eq!(log.d_hat, 0.0);
        let expected = ctrl
            .fl_control(&x, &x_d, 0.0, terms(plant.f(x.values(), 0.0), 1.0))
            .unwrap()
            .u;
        assert_eq!(u, expected);
    }

    #[test]
    fn compensated_step_with_zero_s_keeps_weights() {
        let plant = pendulum_plant(1.0, 1.0, 0.1, 9.81).unwrap();
        let net = default_network(3, 1.0, 5.0)
            .unwrap()
            .with_weights(vec![0.2, -0.4, 0.1])
            .unwrap();
        let ctrl = compensated(net.clone());
        let x = sv(&[0.3, 0.5]);
        let (u, next, log) = ctrl.control_step(&plant, &x, &x, 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(next.network().unwrap().weights(), net.weights());
        assert_eq!(log.s, 0.0);
        let base = baseline(2, 2.0)
            .control_step(&plant, &x, &x, 0.0, 0.0, 1e-3)
            .unwrap()
            .0;
        // b = 1, so u differs from the baseline by exactly -d_hat(0)
        assert_relative_eq!(u, base - net.output(0.0), max_relative = 1e-15);
    }

    #[test]
    fn compensated_step_hand_arithmetic() {
        // f = 0, b = 2 plant with one neuron mu = 0, sigma = 1, w = 1, eta = 1
        let plant = crate::plants::PlantModel::new(
            "flat",
            2,
            std::sync::Arc::new(|_: &[f64], _| 0.0),
            std::sync::Arc::new(|_: &[f64], _| 2.0),
            1.0,
            vec![],
        )
        .unwrap();
        let net = RbfNetwork::new(vec![0.0], vec![1.0], vec![1.0], 1.0).unwrap();
        let ctrl = compensated(net);
        let x = sv(&[1.0, 0.5]);
        let x_d = sv(&[0.0, 0.0]);
        let (u, next, log) = ctrl.control_step(&plant, &x, &x_d, 0.0, 0.0, 0.1).unwrap();
        // s = 2 * 1 + 0.5 = 2.5, phi = exp(-3.125), d_hat = phi
        let phi = (-3.125f64).exp();
        assert_eq!(log.s, 2.5);
        assert_relative_eq!(log.d_hat, phi, max_relative = 1e-15);
        // u = (0 + 0 - (4 * 1 + 4 * 0.5) - phi) / 2
        assert_relative_eq!(u, (-6.0 - phi) / 2.0, max_relative = 1e-15);
        // w' = 1 + 0.1 * 1 * 2.5 * phi
        let w = next.network().unwrap().weights()[0];
        assert_relative_eq!(w, 1.0 + 0.25 * phi, max_relative = 1e-15);
        assert_relative_eq!(log.weight_norm, w);
    }

    #[test]
    fn control_step_rejects_bad_dt() {
        let plant = pendulum_plant(1.0, 1.0, 0.1, 9.81).unwrap();
        let z = sv(&[0.0, 0.0]);
        assert!(baseline(2, 2.0)
            .control_step(&plant, &z, &z, 0.0, 0.0, 0.0)
            .is_err());
    }

    proptest! {
        #[test]
        fn feedback_is_affine_in_each_error_component(
            e in proptest::collection::vec(-2.0f64..2.0, 3),
            idx in 0usize..3,
            f in -5.0f64..5.0,
            b in 0.5f64..4.0,
            lambda in 0.5f64..4.0,
        ) {
            let ctrl = baseline(3, lambda);
            let x_d = sv(&[0.0, 0.0, 0.0]);
            let nominal = NominalTerms { f, b, b_min: 0.1 };
            let u0 = ctrl.fl_control(&sv(&e), &x_d, 0.0, nominal).unwrap().u;
            let mut bumped = e.clone();
            bumped[idx] += 1.0;
            let u1 = ctrl.fl_control(&sv(&bumped), &x_d, 0.0, nominal).unwrap().u;
            let slope = -ctrl.gains().gains()[idx] / b;
            prop_assert!((u1 - u0 - slope).abs() <= 1e-12 * (1.0 + u0.abs() + slope.abs()));
        }
    }
}

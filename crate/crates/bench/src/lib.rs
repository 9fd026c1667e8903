//! Shared scenarios for the criterion benchmarks.

use neurofl_core::{
    binomial_gains, default_network, pendulum_plant, ControlMode, ControllerState, DisturbanceSpec,
    PlantModel, ReferenceSpec, Sinusoid,
};

pub fn pendulum() -> PlantModel {
    pendulum_plant(1.0, 1.0, 0.1, 9.81).expect("valid pendulum")
}

pub fn sine_reference() -> ReferenceSpec {
    ReferenceSpec::Sinusoid(Sinusoid {
        amplitude: 1.0,
        angular_frequency: 1.0,
        phase: 0.0,
    })
}

pub fn compensated(neurons: usize) -> ControllerState {
    ControllerState::new(
        binomial_gains(2, 2.0).expect("valid gains"),
        ControlMode::Compensated(default_network(neurons, 0.5, 20.0).expect("valid network")),
    )
}

pub fn baseline() -> ControllerState {
    ControllerState::new(
        binomial_gains(2, 2.0).expect("valid gains"),
        ControlMode::Baseline,
    )
}

pub fn constant_disturbance() -> DisturbanceSpec {
    DisturbanceSpec::constant(0.5)
}

//! Closed-loop simulation: references, fixed-step RK4, zero-order-hold control
//! and run metrics.

use std::fmt;

use crate::controller::ControllerState;
use crate::dynamics::{filtered_error, tracking_error, StateVector};
use crate::error::{Error, Result};
use crate::plants::{DisturbanceSignal, DisturbanceSpec, PlantModel};
use crate::rbf::RbfNetwork;

/// Any state magnitude above this is treated as divergence.
pub const DEFAULT_DIVERGENCE_LIMIT: f64 = 1e9;

/// Classical fourth-order Runge-Kutta step of `y' = deriv(y, t)`.
pub fn rk4_step<F>(mut deriv: F, y: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Vec<f64>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("step size must be > 0, got {dt}")));
    }
    let half = 0.5 * dt;
    let check = |v: Vec<f64>| -> Result<Vec<f64>> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Divergence {
                t,
                reason: format!("non-finite derivative during RK4 step: {v:?}"),
            })
        }
    };
    let axpy =
        |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };

    let k1 = check(deriv(y, t))?;
    let k2 = check(deriv(&axpy(half, &k1), t + half))?;
    let k3 = check(deriv(&axpy(half, &k2), t + half))?;
    let k4 = check(deriv(&axpy(dt, &k3), t + dt))?;
    let next: Vec<f64> = (0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check(next)
}

/// `amplitude * sin(angular_frequency * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
}

impl Sinusoid {
    /// k-th time derivative, `A w^k sin(w t + phi + k pi / 2)`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        let arg = self.angular_frequency * t + self.phase;
        let scale = self.amplitude * self.angular_frequency.powi(k as i32);
        // quarter-turn shifts applied exactly instead of through pi/2 round-off
        match k % 4 {
            0 => scale * arg.sin(),
            1 => scale * arg.cos(),
            2 => -scale * arg.sin(),
            _ => -scale * arg.cos(),
        }
    }
}

/// Desired output trajectory, analytically differentiable to any order.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    Constant { level: f64 },
    Sinusoid(Sinusoid),
    SumOfSinusoids(Vec<Sinusoid>),
}

impl ReferenceSpec {
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        match self {
            ReferenceSpec::Constant { level } => {
                if k == 0 {
                    *level
                } else {
                    0.0
                }
            }
            ReferenceSpec::Sinusoid(s) => s.derivative(k, t),
            ReferenceSpec::SumOfSinusoids(terms) => terms.iter().map(|s| s.derivative(k, t)).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ReferenceSpec::Constant { level } => level.is_finite(),
            ReferenceSpec::Sinusoid(s) => sinusoid_finite(s),
            ReferenceSpec::SumOfSinusoids(terms) => {
                !terms.is_empty() && terms.iter().all(sinusoid_finite)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(
                "reference parameters must be finite (and a sum needs at least one term)",
            ))
        }
    }
}

fn sinusoid_finite(s: &Sinusoid) -> bool {
    s.amplitude.is_finite() && s.angular_frequency.is_finite() && s.phase.is_finite()
}

/// `x_d = [r, r', ..., r^(n-1)]` and `r^(n)` at time `t`.
pub fn reference_at(spec: &ReferenceSpec, order: usize, t: f64) -> Result<(StateVector, f64)> {
    if order == 0 {
        return Err(Error::domain("reference order must be >= 1"));
    }
    let x_d = (0..order).map(|k| spec.derivative(k, t)).collect();
    Ok((StateVector::new(x_d)?, spec.derivative(order, t)))
}

/// Source of the disturbance `d` seen by the truth plant.
///
/// Sampled at every RK4 stage, so `d` varies continuously between control samples.
pub trait DisturbanceSource {
    fn sample(&mut self, t: f64, x: &[f64]) -> f64;
}

impl DisturbanceSource for DisturbanceSignal {
    fn sample(&mut self, t: f64, _x: &[f64]) -> f64 {
        DisturbanceSignal::sample(self, t)
    }
}

/// Disturbance that lies exactly in the span of an RBF network:
/// `d = sum_i w*_i phi_i(s)` with `s` computed from the current tracking error.
#[derive(Debug, Clone)]
pub struct IdealRepresentation {
    pub target: RbfNetwork,
    pub lambda: f64,
    pub reference: ReferenceSpec,
}

impl IdealRepresentation {
    pub fn filtered_error(&self, t: f64, x: &[f64]) -> Result<f64> {
        let (x_d, _) = reference_at(&self.reference, x.len(), t)?;
        let x = StateVector::new(x.to_vec())?;
        filtered_error(&tracking_error(&x, &x_d)?, self.lambda)
    }
}

impl DisturbanceSource for IdealRepresentation {
    fn sample(&mut self, t: f64, x: &[f64]) -> f64 {
        match self.filtered_error(t, x) {
            Ok(s) => self.target.output(s),
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    InputSaturated,
    WeightsCapped,
    ControllabilityFault(String),
    Divergence(String),
}

impl Event {
    pub fn is_fault(&self) -> bool {
        matches!(self, Event::ControllabilityFault(_) | Event::Divergence(_))
    }

    /// Short tag used in CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            Event::InputSaturated => "u_saturated",
            Event::WeightsCapped => "w_capped",
            Event::ControllabilityFault(_) => "controllability_fault",
            Event::Divergence(_) => "diverged",
        }
    }

    fn from_fault(err: &Error) -> Self {
        match err {
            Error::Controllability { .. } => Event::ControllabilityFault(err.to_string()),
            _ => Event::Divergence(err.to_string()),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::ControllabilityFault(msg) | Event::Divergence(msg) => {
                write!(f, "{}: {}", self.tag(), msg)
            }
            _ => f.write_str(self.tag()),
        }
    }
}

/// One control sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: Vec<f64>,
    pub x_d: Vec<f64>,
    pub u: f64,
    pub s: f64,
    pub d_hat: f64,
    pub d_true: f64,
    pub w_norm: f64,
    pub events: Vec<Event>,
}

impl Record {
    pub fn tracking_error(&self) -> f64 {
        self.x[0] - self.x_d[0]
    }

    pub fn is_fault(&self) -> bool {
        self.events.iter().any(Event::is_fault)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub order: usize,
    pub dt: f64,
    pub records: Vec<Record>,
    /// Terminal fault, if the run stopped early.
    pub fault: Option<Error>,
}

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// Hooks into a running simulation, mostly for tests and diagnostics.
pub trait Observer {
    /// Called for every RK4 stage evaluation with the input being applied.
    fn on_stage(&mut self, _t: f64, _u: f64) {}

    /// Called once per logged sample with the controller that produced it,
    /// before its weights were adapted.
    fn on_sample(&mut self, _record: &Record, _controller: &ControllerState) {}
}

impl Observer for () {}

/// Number of control intervals in `[0, duration]`, tolerant of round-off in
/// `duration / dt`.
pub fn interval_count(duration: f64, dt: f64) -> usize {
    let ratio = duration / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

/// A fully specified closed-loop experiment.
///
/// `truth` is integrated; `nominal` is what the controller believes.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: PlantModel,
    pub nominal: PlantModel,
    pub controller: ControllerState,
    pub reference: ReferenceSpec,
    pub duration: f64,
    pub dt_ctrl: f64,
    pub substeps: usize,
    /// Starts on the reference (zero tracking error) when `None`.
    pub initial_state: Option<Vec<f64>>,
    pub divergence_limit: f64,
}

impl Simulation {
    pub fn new(
        truth: PlantModel,
        nominal: PlantModel,
        controller: ControllerState,
        reference: ReferenceSpec,
    ) -> Self {
        Simulation {
            truth,
            nominal,
            controller,
            reference,
            duration: 10.0,
            dt_ctrl: 1e-3,
            substeps: 1,
            initial_state: None,
            divergence_limit: DEFAULT_DIVERGENCE_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.truth.order();
        if self.nominal.order() != n {
            return Err(Error::domain(format!(
                "truth plant order {n} differs from nominal plant order {}",
                self.nominal.order()
            )));
        }
        if self.controller.gains().order() != n {
            return Err(Error::domain(format!(
                "controller gain order {} differs from plant order {n}",
                self.controller.gains().order()
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::domain(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.dt_ctrl > 0.0 && self.dt_ctrl.is_finite()) {
            return Err(Error::domain(format!(
                "dt_ctrl must be > 0, got {}",
                self.dt_ctrl
            )));
        }
        if self.substeps == 0 {
            return Err(Error::domain("substeps must be >= 1"));
        }
        if self.divergence_limit.is_nan() || self.divergence_limit <= 0.0 {
            return Err(Error::domain("divergence limit must be > 0"));
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != n {
                return Err(Error::domain(format!(
                    "initial state has {} components, plant order is {n}",
                    x0.len()
                )));
            }
            StateVector::new(x0.clone())?;
        }
        self.reference.validate()
    }

    pub fn run(&self, disturbance: &mut dyn DisturbanceSource) -> Result<Trajectory> {
        self.run_observed(disturbance, &mut ())
    }

    /// Runs the loop. Configuration problems are returned as `Err`; faults
    /// during the run end it early and are recorded in the trajectory.
    pub fn run_observed(
        &self,
        disturbance: &mut dyn DisturbanceSource,
        observer: &mut dyn Observer,
    ) -> Result<Trajectory> {
        self.validate()?;
        let n = self.truth.order();
        let dt = self.dt_ctrl;
        let intervals = interval_count(self.duration, dt);
        let h = dt / self.substeps as f64;

        let mut x = match &self.initial_state {
            Some(x0) => x0.clone(),
            None => reference_at(&self.reference, n, 0.0)?.0.into_values(),
        };
        let mut ctrl = self.controller.clone();
        let mut records = Vec::with_capacity(intervals + 1);
        let mut fault = None;

        for k in 0..=intervals {
            let t = k as f64 * dt;
            let (x_d, xd_n) = reference_at(&self.reference, n, t)?;
            let d_true = disturbance.sample(t, &x);
            let state = StateVector::new(x.clone())?;

            let (u, next, log) = match ctrl.control_step(&self.nominal, &state, &x_d, xd_n, t, dt) {
                Ok(step) => step,
                Err(err) if err.is_fault() => {
                    let err = stamp(err, t, &x);
                    records.push(fault_record(t, &x, x_d.values(), d_true, &err));
                    fault = Some(err);
                    break;
                }
                Err(err) => return Err(err),
            };

            let mut events = Vec::new();
            if log.u_saturated {
                events.push(Event::InputSaturated);
            }
            if log.weights_capped {
                events.push(Event::WeightsCapped);
            }
            let record = Record {
                t,
                x: x.clone(),
                x_d: x_d.values().to_vec(),
                u,
                s: log.s,
                d_hat: log.d_hat,
                d_true,
                w_norm: log.weight_norm,
                events,
            };
            observer.on_sample(&record, &ctrl);
            records.push(record);
            ctrl = next;

            if k == intervals {
                break;
            }

            // zero-order hold: u is constant over every substep of this interval
            let mut stage_fault: Option<Error> = None;
            for j in 0..self.substeps {
                let tj = t + j as f64 * h;
                let deriv = |y: &[f64], tau: f64| -> Vec<f64> {
                    observer.on_stage(tau, u);
                    let mut dy = Vec::with_capacity(n);
                    dy.extend_from_slice(&y[1..]);
                    let d = disturbance.sample(tau, y);
                    match self.truth.highest_derivative(y, u, d, tau) {
                        Ok(acc) => dy.push(acc),
                        Err(err) => {
                            stage_fault.get_or_insert(err);
                            dy.push(f64::NAN);
                        }
                    }
                    dy
                };
                match rk4_step(deriv, &x, tj, h) {
                    Ok(next_x) => x = next_x,
                    Err(err) => {
                        stage_fault.get_or_insert(err);
                        break;
                    }
                }
                if stage_fault.is_some() {
                    break;
                }
                if let Some(i) = x.iter().position(|v| v.abs() > self.divergence_limit) {
                    stage_fault = Some(Error::Divergence {
                        t: tj + h,
                        reason: format!(
                            "|x[{i}]| = {} exceeds the divergence limit {}",
                            x[i].abs(),
                            self.divergence_limit
                        ),
                    });
                    break;
                }
            }
            if let Some(err) = stage_fault {
                let t_next = (k + 1) as f64 * dt;
                let (x_d, _) = reference_at(&self.reference, n, t_next)?;
                let err = stamp(err, t_next, &x);
                records.push(fault_record(t_next, &x, x_d.values(), f64::NAN, &err));
                fault = Some(err);
                break;
            }
        }

        Ok(Trajectory {
            order: n,
            dt,
            records,
            fault,
        })
    }
}

fn stamp(err: Error, t: f64, x: &[f64]) -> Error {
    match err {
        Error::Controllability {
            b,
            b_min,
            x: bx,
            t: bt,
        } => Error::Controllability {
            x: if bx.is_empty() { x.to_vec() } else { bx },
            t: if bt.is_nan() { t } else { bt },
            b,
            b_min,
        },
        Error::Divergence { t: dt, reason } => Error::Divergence {
            t: if dt.is_nan() { t } else { dt },
            reason,
        },
        other => other,
    }
}

fn fault_record(t: f64, x: &[f64], x_d: &[f64], d_true: f64, err: &Error) -> Record {
    Record {
        t,
        x: x.to_vec(),
        x_d: x_d.to_vec(),
        u: f64::NAN,
        s: f64::NAN,
        d_hat: f64::NAN,
        d_true,
        w_norm: f64::NAN,
        events: vec![Event::from_fault(err)],
    }
}

/// Simulates the closed loop starting on the reference. `lambda` comes from
/// the controller's gains.
#[allow(clippy::too_many_arguments)]
pub fn run_closed_loop(
    truth: &PlantModel,
    nominal: &PlantModel,
    controller: &ControllerState,
    reference: &ReferenceSpec,
    disturbance: &DisturbanceSpec,
    duration: f64,
    dt_ctrl: f64,
    substeps: usize,
) -> Result<Trajectory> {
    let mut sim = Simulation::new(
        truth.clone(),
        nominal.clone(),
        controller.clone(),
        reference.clone(),
    );
    sim.duration = duration;
    sim.dt_ctrl = dt_ctrl;
    sim.substeps = substeps;
    let mut signal = DisturbanceSignal::new(disturbance.clone())?;
    sim.run(&mut signal)
}

/// Summary statistics of the output tracking error `x - x_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rms_error: f64,
    /// Integral of `|x - x_d|`, trapezoid rule.
    pub iae: f64,
    /// Mean signed error over the final 10% of samples.
    pub steady_state_error: f64,
    pub max_abs_u: f64,
    /// No fault events and every logged value finite.
    pub bounded: bool,
}

pub fn compute_metrics(traj: &Trajectory) -> Result<Metrics> {
    let valid: Vec<&Record> = traj.records.iter().filter(|r| !r.is_fault()).collect();
    if valid.is_empty() {
        return Err(Error::domain(
            "cannot compute metrics of an empty trajectory",
        ));
    }
    let errors: Vec<f64> = valid.iter().map(|r| r.tracking_error()).collect();
    let count = errors.len();

    let rms_error = (errors.iter().map(|e| e * e).sum::<f64>() / count as f64).sqrt();
    let iae = valid
        .windows(2)
        .zip(errors.windows(2))
        .map(|(r, e)| 0.5 * (e[0].abs() + e[1].abs()) * (r[1].t - r[0].t))
        .sum();
    let window = ((count as f64 * 0.1).round() as usize).clamp(1, count);
    let tail = &errors[count - window..];
    let steady_state_error = tail.iter().sum::<f64>() / window as f64;
    let max_abs_u = valid.iter().map(|r| r.u.abs()).fold(0.0, f64::max);

    let finite = valid.iter().all(|r| {
        r.x.iter().chain(&r.x_d).all(|v| v.is_finite())
            && [r.u, r.s, r.d_hat, r.d_true, r.w_norm]
                .iter()
                .all(|v| v.is_finite())
    });
    let bounded = finite && traj.fault.is_none() && !traj.records.iter().any(Record::is_fault);

    Ok(Metrics {
        rms_error,
        iae,
        steady_state_error,
        max_abs_u,
        bounded,
    })
}

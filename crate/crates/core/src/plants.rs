//! Companion-form plants `x^(n) = f(x, t) + b(x, t) u + d` and bounded
//! disturbance generators.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dynamics::StateVector;
use crate::error::{Error, Result};

/// Evaluator for `f` or `b`: `(state, time) -> value`.
pub type PlantFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// An nth-order plant in companion form.
///
/// Cloning is cheap; evaluators are shared behind `Arc`.
#[derive(Clone)]
pub struct PlantModel {
    name: String,
    order: usize,
    f: PlantFn,
    b: PlantFn,
    b_min: f64,
    params: Vec<(String, f64)>,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("b_min", &self.b_min)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl PlantModel {
    pub fn new(
        name: impl Into<String>,
        order: usize,
        f: PlantFn,
        b: PlantFn,
        b_min: f64,
        params: Vec<(String, f64)>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("plant order must be >= 1"));
        }
        if !(b_min > 0.0 && b_min.is_finite()) {
            return Err(Error::domain(format!("b_min must be > 0, got {b_min}")));
        }
        Ok(PlantModel {
            name: name.into(),
            order,
            f,
            b,
            b_min,
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn f(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }

    pub fn b(&self, x: &[f64], t: f64) -> f64 {
        (self.b)(x, t)
    }

    /// `b(x, t)`, or a controllability fault if `|b| < b_min`.
    pub fn guarded_b(&self, x: &[f64], t: f64) -> Result<f64> {
        let b = self.b(x, t);
        if b.abs() >= self.b_min {
            Ok(b)
        } else {
            Err(Error::Controllability {
                x: x.to_vec(),
                t,
                b,
                b_min: self.b_min,
            })
        }
    }

    /// `x^(n) = f(x, t) + b(x, t) u + d`.
    pub fn eval_dynamics(&self, x: &StateVector, u: f64, d: f64, t: f64) -> Result<f64> {
        self.highest_derivative(x.values(), u, d, t)
    }

    pub(crate) fn highest_derivative(&self, x: &[f64], u: f64, d: f64, t: f64) -> Result<f64> {
        if x.len() != self.order {
            return Err(Error::domain(format!(
                "plant '{}' has order {}, state has {} components",
                self.name,
                self.order,
                x.len()
            )));
        }
        let b = self.guarded_b(x, t)?;
        Ok(self.f(x, t) + b * u + d)
    }
}

/// Damped pendulum: `f = -(g/l) sin(x) - c x'`, `b = 1 / (m l^2)`.
pub fn pendulum_plant(m: f64, l: f64, c: f64, g: f64) -> Result<PlantModel> {
    if !(m > 0.0 && l > 0.0) {
        return Err(Error::domain(format!(
            "pendulum mass and length must be > 0 (m = {m}, l = {l})"
        )));
    }
    if !(c >= 0.0 && g >= 0.0) {
        return Err(Error::domain(format!(
            "pendulum damping and gravity must be >= 0 (c = {c}, g = {g})"
        )));
    }
    let b = 1.0 / (m * l * l);
    PlantModel::new(
        "pendulum",
        2,
        Arc::new(move |x: &[f64], _t| -(g / l) * x[0].sin() - c * x[1]),
        Arc::new(move |_x: &[f64], _t| b),
        0.5 * b,
        params(&[("m", m), ("l", l), ("c", c), ("g", g)]),
    )
}

/// Duffing oscillator: `f = -a x' - b1 x - b2 x^3`, constant input gain.
pub fn duffing_plant(a: f64, b1: f64, b2: f64, gain: f64) -> Result<PlantModel> {
    check_gain(gain)?;
    PlantModel::new(
        "duffing",
        2,
        Arc::new(move |x: &[f64], _t| -a * x[1] - b1 * x[0] - b2 * x[0].powi(3)),
        Arc::new(move |_x: &[f64], _t| gain),
        gain.abs(),
        params(&[("a", a), ("b1", b1), ("b2", b2), ("gain", gain)]),
    )
}

/// Van der Pol oscillator: `f = mu (1 - x^2) x' - x`, constant input gain.
pub fn vanderpol_plant(mu: f64, gain: f64) -> Result<PlantModel> {
    check_gain(gain)?;
    PlantModel::new(
        "vanderpol",
        2,
        Arc::new(move |x: &[f64], _t| mu * (1.0 - x[0] * x[0]) * x[1] - x[0]),
        Arc::new(move |_x: &[f64], _t| gain),
        gain.abs(),
        params(&[("mu", mu), ("gain", gain)]),
    )
}

fn check_gain(gain: f64) -> Result<()> {
    if gain != 0.0 && gain.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "input gain must be nonzero, got {gain}"
        )))
    }
}

fn params(kv: &[(&str, f64)]) -> Vec<(String, f64)> {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceKind {
    None,
    Constant {
        offset: f64,
    },
    /// `amplitude * sin(2 pi frequency t + phase)`, frequency in Hz.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Uniform white noise in `[-amplitude, amplitude]`, drawn once per
    /// `sample_period` from a ChaCha8 stream seeded with `seed`, then passed
    /// through a first-order low-pass with the given cutoff (Hz).
    BandLimitedNoise {
        amplitude: f64,
        cutoff: f64,
        seed: u64,
        sample_period: f64,
    },
}

/// A disturbance signal together with its stated bound `delta`; every sample
/// is clamped to `[-delta, delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub bound: f64,
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::None,
            bound: 0.0,
        }
    }

    pub fn constant(offset: f64) -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::Constant { offset },
            bound: offset.abs(),
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::Sinusoid {
                amplitude,
                frequency,
                phase,
            },
            bound: amplitude.abs(),
        }
    }

    pub fn noise(amplitude: f64, cutoff: f64, seed: u64, sample_period: f64) -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::BandLimitedNoise {
                amplitude,
                cutoff,
                seed,
                sample_period,
            },
            bound: amplitude.abs(),
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound >= 0.0 && self.bound.is_finite()) {
            return Err(Error::domain(format!(
                "disturbance bound must be >= 0, got {}",
                self.bound
            )));
        }
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("disturbance {what} must be finite")))
            }
        };
        match self.kind {
            DisturbanceKind::None => Ok(()),
            DisturbanceKind::Constant { offset } => finite(offset, "offset"),
            DisturbanceKind::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                finite(amplitude, "amplitude")?;
                finite(frequency, "frequency")?;
                finite(phase, "phase")
            }
            DisturbanceKind::BandLimitedNoise {
                amplitude,
                cutoff,
                sample_period,
                ..
            } => {
                finite(amplitude, "amplitude")?;
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::domain("noise cutoff must be > 0"));
                }
                if !(sample_period > 0.0 && sample_period.is_finite()) {
                    return Err(Error::domain("noise sample period must be > 0"));
                }
                Ok(())
            }
        }
    }
}

/// Stateful sampler for a [`DisturbanceSpec`].
///
/// The noise sequence is cached as it is generated, so sampling along a
/// simulation costs O(1) per call. Results depend only on `(spec, t)`.
#[derive(Debug)]
pub struct DisturbanceSignal {
    spec: DisturbanceSpec,
    noise: RefCell<Option<NoiseCache>>,
}

#[derive(Debug)]
struct NoiseCache {
    rng: ChaCha8Rng,
    pole: f64,
    amplitude: f64,
    filtered: Vec<f64>,
}

impl NoiseCache {
    fn new(amplitude: f64, cutoff: f64, seed: u64, sample_period: f64) -> Self {
        NoiseCache {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pole: (-2.0 * PI * cutoff * sample_period).exp(),
            amplitude,
            filtered: Vec::new(),
        }
    }

    fn value(&mut self, index: usize) -> f64 {
        while self.filtered.len() <= index {
            // 53 random bits mapped onto [-1, 1)
            let unit = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let white = self.amplitude * (2.0 * unit - 1.0);
            let prev = self.filtered.last().copied().unwrap_or(0.0);
            self.filtered
                .push(self.pole * prev + (1.0 - self.pole) * white);
        }
        self.filtered[index]
    }
}

impl DisturbanceSignal {
    pub fn new(spec: DisturbanceSpec) -> Result<Self> {
        spec.validate()?;
        Ok(DisturbanceSignal {
            spec,
            noise: RefCell::new(None),
        })
    }

    pub fn spec(&self) -> &DisturbanceSpec {
        &self.spec
    }

    pub fn sample(&self, t: f64) -> f64 {
        let raw = match self.spec.kind {
            DisturbanceKind::None => 0.0,
            DisturbanceKind::Constant { offset } => offset,
            DisturbanceKind::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            DisturbanceKind::BandLimitedNoise {
                amplitude,
                cutoff,
                seed,
                sample_period,
            } => {
                let index = (t.max(0.0) / sample_period).floor() as usize;
                let mut cache = self.noise.borrow_mut();
                cache
                    .get_or_insert_with(|| NoiseCache::new(amplitude, cutoff, seed, sample_period))
                    .value(index)
            }
        };
        raw.clamp(-self.spec.bound, self.spec.bound)
    }
}

/// One-off sample of a disturbance at time `t`.
///
/// For the noise kind this regenerates the sequence up to `t`; use
/// [`DisturbanceSignal`] when sampling along a trajectory.
pub fn disturbance_sample(spec: &DisturbanceSpec, t: f64) -> Result<f64> {
    Ok(DisturbanceSignal::new(spec.clone())?.sample(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn trivial() -> PlantModel {
        PlantModel::new(
            "trivial",
            2,
            Arc::new(|_: &[f64], _| 0.0),
            Arc::new(|_: &[f64], _| 1.0),
            0.5,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn eval_dynamics_examples() {
        assert_eq!(
            trivial()
                .eval_dynamics(&sv(&[0.0, 0.0]), 0.0, 0.0, 0.0)
                .unwrap(),
            0.0
        );

        let p = pendulum_plant(2.0, 0.5, 0.3, 9.81).unwrap();
        let acc = p.eval_dynamics(&sv(&[0.0, 0.0]), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(acc, 1.0 / (2.0 * 0.25));

        let p = pendulum_plant(1.0, 1.0, 0.0, 9.81).unwrap();
        let acc = p
            .eval_dynamics(&sv(&[PI / 2.0, 0.0]), 0.0, 0.0, 0.0)
            .unwrap();
        assert_relative_eq!(acc, -9.81, max_relative = 1e-15);
    }

    #[test]
    fn eval_dynamics_guards_b() {
        let weak = PlantModel::new(
            "weak",
            1,
            Arc::new(|_: &[f64], _| 0.0),
            Arc::new(|x: &[f64], _| x[0]),
            0.1,
            vec![],
        )
        .unwrap();
        assert!(weak.eval_dynamics(&sv(&[1.0]), 1.0, 0.0, 0.0).is_ok());
        match weak.eval_dynamics(&sv(&[0.05]), 1.0, 0.0, 2.5) {
            Err(Error::Controllability { x, t, .. }) => {
                assert_eq!(x, vec![0.05]);
                assert_eq!(t, 2.5);
            }
            other => panic!("expected controllability fault, got {other:?}"),
        }
        assert!(weak.eval_dynamics(&sv(&[1.0, 0.0]), 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pendulum_examples() {
        let p = pendulum_plant(1.3, 0.7, 0.4, 9.81).unwrap();
        assert_eq!(p.order(), 2);
        assert_relative_eq!(p.f(&[0.0, 1.5], 0.0), -0.4 * 1.5);
        assert_eq!(p.b(&[0.1, 0.2], 0.0), p.b(&[-3.0, 7.0], 4.0));
        assert!(p.f(&[PI, 0.0], 0.0).abs() < 1e-13);
        assert_relative_eq!(p.b_min(), 0.5 / (1.3 * 0.49));
        assert_eq!(p.param("g"), Some(9.81));
        assert!(pendulum_plant(0.0, 1.0, 0.0, 9.81).is_err());
        assert!(pendulum_plant(1.0, -1.0, 0.0, 9.81).is_err());
    }

    #[test]
    fn duffing_examples() {
        let p = duffing_plant(0.2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.f(&[0.0, 0.0], 0.0), 0.0);
        assert_eq!(p.f(&[2.0, 0.0], 0.0), -10.0);
        for x in [[0.3, -1.2], [1.7, 0.4]] {
            assert_relative_eq!(p.f(&[-x[0], -x[1]], 0.0), -p.f(&x, 0.0));
        }
        assert!(duffing_plant(0.2, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn vanderpol_examples() {
        let p = vanderpol_plant(1.0, 1.0).unwrap();
        assert_eq!(p.f(&[0.0, 0.0], 0.0), 0.0);
        assert_eq!(p.f(&[1.0, 5.0], 0.0), -1.0);
        let p = vanderpol_plant(2.0, 1.0).unwrap();
        assert_eq!(p.f(&[0.5, 1.0], 0.0), 1.0);
        assert!(vanderpol_plant(1.0, 0.0).is_err());
    }

    #[test]
    fn disturbance_examples() {
        for t in [0.0, 1.0, 17.3] {
            assert_eq!(
                disturbance_sample(&DisturbanceSpec::none(), t).unwrap(),
                0.0
            );
            assert_eq!(
                disturbance_sample(&DisturbanceSpec::constant(0.5), t).unwrap(),
                0.5
            );
        }
        let sine = DisturbanceSpec::sinusoid(1.0, 1.0, 0.0);
        assert_eq!(disturbance_sample(&sine, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn bound_clamps_samples() {
        let spec = DisturbanceSpec::sinusoid(2.0, 0.5, 0.0).with_bound(1.5);
        let signal = DisturbanceSignal::new(spec).unwrap();
        assert_eq!(signal.sample(0.5), 1.5);
        assert!(DisturbanceSignal::new(DisturbanceSpec::none().with_bound(-1.0)).is_err());
    }

    #[test]
    fn noise_is_reproducible_and_held_between_samples() {
        let spec = DisturbanceSpec::noise(0.8, 2.0, 42, 1e-2);
        let a = DisturbanceSignal::new(spec.clone()).unwrap();
        let b = DisturbanceSignal::new(spec.clone()).unwrap();
        let ts: Vec<f64> = (0..500).map(|k| k as f64 * 3.7e-3).collect();
        let sa: Vec<u64> = ts.iter().map(|&t| a.sample(t).to_bits()).collect();
        // sample b in reverse to check independence from query order
        let mut sb: Vec<u64> = ts.iter().rev().map(|&t| b.sample(t).to_bits()).collect();
        sb.reverse();
        assert_eq!(sa, sb);
        assert_eq!(a.sample(0.101), a.sample(0.109));
        assert_eq!(disturbance_sample(&spec, 1.23).unwrap(), a.sample(1.23));

        let other = DisturbanceSignal::new(DisturbanceSpec::noise(0.8, 2.0, 43, 1e-2)).unwrap();
        assert_ne!(other.sample(0.5), a.sample(0.5));
    }

    proptest! {
        #[test]
        fn samples_respect_bound(
            kind in 0u8..4,
            amp in -3.0f64..3.0,
            bound in 0.0f64..2.0,
            t in 0.0f64..100.0,
            seed in any::<u64>(),
        ) {
            let spec = match kind {
                0 => DisturbanceSpec::none(),
                1 => DisturbanceSpec::constant(amp),
                2 => DisturbanceSpec::sinusoid(amp, 0.7, 0.3),
                _ => DisturbanceSpec::noise(amp, 5.0, seed, 0.05),
            }.with_bound(bound);
            let d = disturbance_sample(&spec, t).unwrap();
            prop_assert!(d.abs() <= bound);
        }

        #[test]
        fn dynamics_affine_in_u(
            x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
            u in -10.0f64..10.0, d in -1.0f64..1.0,
        ) {
            let p = pendulum_plant(0.8, 1.2, 0.1, 9.81).unwrap();
            let x = sv(&[x0, x1]);
            let base = p.eval_dynamics(&x, u, d, 0.0).unwrap();
            let bumped = p.eval_dynamics(&x, u + 1.0, d, 0.0).unwrap();
            let slope = p.b(x.values(), 0.0);
            prop_assert!((bumped - base - slope).abs() <= 1e-12 * (1.0 + base.abs()));
        }
    }
}

//! Single-input Gaussian RBF network used as the disturbance compensator.
//!
//! The network maps the filtered tracking error `s` to an estimate `d_hat` of
//! the lumped disturbance. Centers and widths are fixed; only the output
//! weights learn online.

use crate::error::{Error, Result};

/// `exp(-(s - mu)^2 / (2 sigma^2))`.
pub fn gaussian_basis(s: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!(
            "basis width must be > 0, got {sigma}"
        )));
    }
    Ok(basis(s, mu, sigma))
}

#[inline]
fn basis(s: f64, mu: f64, sigma: f64) -> f64 {
    let z = (s - mu) / sigma;
    (-0.5 * z * z).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    centers: Vec<f64>,
    widths: Vec<f64>,
    weights: Vec<f64>,
    learning_rate: f64,
    leakage: f64,
    weight_cap: Option<f64>,
}

/// Result of one adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapted {
    pub network: RbfNetwork,
    /// Some weight was clipped to the configured infinity-norm cap.
    pub capped: bool,
}

impl RbfNetwork {
    pub fn new(
        centers: Vec<f64>,
        widths: Vec<f64>,
        weights: Vec<f64>,
        learning_rate: f64,
    ) -> Result<Self> {
        let n = centers.len();
        if n == 0 {
            return Err(Error::domain("network needs at least one neuron"));
        }
        if widths.len() != n || weights.len() != n {
            return Err(Error::domain(format!(
                "network arrays disagree: {} centers, {} widths, {} weights",
                n,
                widths.len(),
                weights.len()
            )));
        }
        if centers.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::domain("network centers and weights must be finite"));
        }
        if widths.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::domain("network widths must be > 0"));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("network centers must be strictly increasing"));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate eta must be > 0, got {learning_rate}"
            )));
        }
        Ok(RbfNetwork {
            centers,
            widths,
            weights,
            learning_rate,
            leakage: 0.0,
            weight_cap: None,
        })
    }

    /// Sets the sigma-modification coefficient `kappa`.
    pub fn with_leakage(mut self, leakage: f64) -> Result<Self> {
        if !(leakage >= 0.0 && leakage.is_finite()) {
            return Err(Error::domain(format!(
                "leakage kappa must be >= 0, got {leakage}"
            )));
        }
        self.leakage = leakage;
        Ok(self)
    }

    /// Bounds every weight to `[-cap, cap]` after each adaptation step.
    pub fn with_weight_cap(mut self, cap: Option<f64>) -> Result<Self> {
        if let Some(c) = cap {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::domain(format!("weight cap must be > 0, got {c}")));
            }
        }
        self.weight_cap = cap;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.centers.len() {
            return Err(Error::domain(format!(
                "expected {} weights, got {}",
                self.centers.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("weights must be finite"));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn neuron_count(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn weight_cap(&self) -> Option<f64> {
        self.weight_cap
    }

    /// Euclidean norm of the weight vector.
    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn activations(&self, s: f64) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(&mu, &sigma)| basis(s, mu, sigma))
            .collect()
    }

    /// `d_hat = sum_i w_i phi_i(s)`.
    pub fn output(&self, s: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.widths)
            .zip(&self.weights)
            .map(|((&mu, &sigma), &w)| w * basis(s, mu, sigma))
            .sum()
    }

    /// One explicit Euler step of `dw_i/dt = eta * s * phi_i(s) - kappa * w_i`.
    ///
    /// With the plant `x^(n) = f + b u + d` and the compensated law, the
    /// filtered error obeys `s' + lambda s = d - d_hat`, so this sign makes
    /// `V = s^2 / 2 + |w - w*|^2 / (2 eta)` satisfy `V' = -lambda s^2` when
    /// `d = w* . phi(s)` and `kappa = 0`.
    pub fn adapt_weights(&self, s: f64, dt: f64) -> Result<Adapted> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!(
                "adaptation step dt must be > 0, got {dt}"
            )));
        }
        if !s.is_finite() {
            return Err(Error::Divergence {
                t: f64::NAN,
                reason: format!("filtered error is not finite ({s})"),
            });
        }
        let eta = self.learning_rate;
        let kappa = self.leakage;
        let mut capped = false;
        let weights = self
            .centers
            .iter()
            .zip(&self.widths)
            .zip(&self.weights)
            .map(|((&mu, &sigma), &w)| {
                let rate = eta * s * basis(s, mu, sigma) - kappa * w;
                let next = w + dt * rate;
                match self.weight_cap {
                    Some(cap) if next.abs() > cap => {
                        capped = true;
                        cap.copysign(next)
                    }
                    _ => next,
                }
            })
            .collect();
        Ok(Adapted {
            network: RbfNetwork {
                weights,
                ..self.clone()
            },
            capped,
        })
    }
}

/// Evenly spaced centers on `[-s_range, s_range]`, width equal to the spacing,
/// zero weights and no leakage.
pub fn default_network(neuron_count: usize, s_range: f64, eta: f64) -> Result<RbfNetwork> {
    if neuron_count == 0 {
        return Err(Error::domain("neuron_count must be >= 1"));
    }
    if !(s_range > 0.0 && s_range.is_finite()) {
        return Err(Error::domain(format!("s_range must be > 0, got {s_range}")));
    }
    let (centers, spacing) = if neuron_count == 1 {
        (vec![0.0], s_range)
    } else {
        let spacing = 2.0 * s_range / (neuron_count - 1) as f64;
        let centers = (0..neuron_count)
            .map(|i| -s_range + i as f64 * spacing)
            .collect();
        (centers, spacing)
    };
    RbfNetwork::new(
        centers,
        vec![spacing; neuron_count],
        vec![0.0; neuron_count],
        eta,
    )
}

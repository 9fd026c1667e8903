//! State and error algebra, binomial pole placement and the Hurwitz test.

use std::ops::Index;

use crate::error::{Error, Result};

/// Largest `n` accepted by [`binomial_coefficient`]; `C(62, 31)` still fits in a `u64`.
pub const MAX_BINOMIAL_ORDER: u32 = 62;

/// `[x, x', ..., x^(n-1)]` for a scalar output of an nth-order plant.
///
/// Also used for references and tracking errors, which share the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("state vector must have order >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "state component {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(StateVector(values))
    }

    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "state vector must have order >= 1");
        StateVector(vec![0.0; order])
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for StateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        StateVector::new(values)
    }
}

/// `n! / ((n - i)! i!)`, computed exactly with the multiplicative formula.
pub fn binomial_coefficient(n: u32, i: u32) -> Result<u64> {
    if n > MAX_BINOMIAL_ORDER {
        return Err(Error::domain(format!(
            "binomial order n = {n} exceeds the limit of {MAX_BINOMIAL_ORDER}"
        )));
    }
    if i > n {
        return Err(Error::domain(format!(
            "binomial index i = {i} exceeds n = {n}"
        )));
    }
    let k = i.min(n - i) as u128;
    let n = n as u128;
    // Each partial product is itself a binomial coefficient, so the division is exact.
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) / (j + 1);
    }
    Ok(acc as u64)
}

/// Feedback gains `k_i = C(n, i) * lambda^(n - i)`, which place every closed-loop
/// pole of the error dynamics at `-lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    lambda: f64,
    gains: Vec<f64>,
}

impl GainVector {
    /// Arbitrary gains, accepted only if `p^n + k_{n-1} p^{n-1} + ... + k_0` is Hurwitz.
    ///
    /// `lambda` is still carried along because the compensator's filtered error uses it.
    pub fn from_gains(lambda: f64, gains: Vec<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        if gains.is_empty() {
            return Err(Error::domain("gain vector must have order >= 1"));
        }
        let gv = GainVector { lambda, gains };
        if !hurwitz_check(&gv.characteristic_polynomial())? {
            return Err(Error::domain(format!(
                "gains {:?} do not yield a Hurwitz characteristic polynomial",
                gv.gains
            )));
        }
        Ok(gv)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn order(&self) -> usize {
        self.gains.len()
    }

    /// `gains()[i]` multiplies the i-th derivative of the tracking error.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn characteristic_polynomial(&self) -> CharPolynomial {
        let mut coefficients = Vec::with_capacity(self.gains.len() + 1);
        coefficients.push(1.0);
        coefficients.extend(self.gains.iter().rev());
        CharPolynomial { coefficients }
    }

    /// `sum_i k_i * e[i]`.
    pub fn feedback(&self, error: &StateVector) -> Result<f64> {
        if error.order() != self.order() {
            return Err(Error::domain(format!(
                "error order {} does not match gain order {}",
                error.order(),
                self.order()
            )));
        }
        Ok(self
            .gains
            .iter()
            .zip(error.values())
            .map(|(k, e)| k * e)
            .sum())
    }
}

pub fn binomial_gains(n: usize, lambda: f64) -> Result<GainVector> {
    if n == 0 {
        return Err(Error::domain("plant order n must be >= 1"));
    }
    check_lambda(lambda)?;
    let order = u32::try_from(n)
        .ok()
        .filter(|&n| n <= MAX_BINOMIAL_ORDER)
        .ok_or_else(|| Error::domain(format!("plant order n = {n} is too large")))?;
    let gains = (0..order)
        .map(|i| {
            let c = binomial_coefficient(order, i)? as f64;
            Ok(c * lambda.powi((order - i) as i32))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainVector { lambda, gains })
}

/// Monic polynomial with coefficients stored in descending powers:
/// `coefficients[0]` is the leading 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPolynomial {
    coefficients: Vec<f64>,
}

impl CharPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        match coefficients.first() {
            Some(&1.0) => {}
            Some(&lead) => {
                return Err(Error::domain(format!(
                    "polynomial must be monic, leading coefficient is {lead}"
                )))
            }
            None => return Err(Error::domain("polynomial has no coefficients")),
        }
        Ok(CharPolynomial { coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, p: f64) -> f64 {
        self.coefficients.iter().fold(0.0, |acc, c| acc * p + c)
    }
}

/// Routh-Hurwitz test: true iff every root lies strictly in the open left half-plane.
///
/// A zero pivot in the first column means a root on (or symmetric about) the
/// imaginary axis and is reported as not Hurwitz.
pub fn hurwitz_check(poly: &CharPolynomial) -> Result<bool> {
    let coeffs = poly.coefficients();
    if poly.degree() == 0 {
        return Err(Error::domain("Hurwitz test needs degree >= 1"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("polynomial has non-finite coefficients"));
    }

    let width = coeffs.len() / 2 + 1;
    let mut upper: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut lower: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    upper.resize(width, 0.0);
    lower.resize(width, 0.0);

    // leading coefficient is 1, so every first-column entry must be > 0
    for _ in 0..poly.degree() {
        let pivot = lower[0];
        if pivot <= 0.0 {
            return Ok(false);
        }
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (pivot * upper[j + 1] - upper[0] * lower[j + 1]) / pivot;
        }
        upper = std::mem::replace(&mut lower, next);
    }
    Ok(true)
}

/// `x - x_d`, componentwise.
pub fn tracking_error(x: &StateVector, x_d: &StateVector) -> Result<StateVector> {
    if x.order() != x_d.order() {
        return Err(Error::domain(format!(
            "state order {} does not match reference order {}",
            x.order(),
            x_d.order()
        )));
    }
    Ok(StateVector(
        x.values()
            .iter()
            .zip(x_d.values())
            .map(|(a, b)| a - b)
            .collect(),
    ))
}

/// Scalar combined error `s = (d/dt + lambda)^(n-1) e`.
pub fn filtered_error(error: &StateVector, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let top = (error.order() - 1) as u32;
    let mut s = 0.0;
    for (i, e) in error.values().iter().enumerate() {
        let i = i as u32;
        let c = binomial_coefficient(top, i)? as f64;
        s += c * lambda.powi((top - i) as i32) * e;
    }
    Ok(s)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("lambda must be > 0, got {lambda}")))
    }
}

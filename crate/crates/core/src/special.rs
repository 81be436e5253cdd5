//! Hermite polynomials, a small polynomial type and the Gaussian integral
//! constants that appear in the exact statistics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Highest Hermite order supported by [`hermite`].
pub const MAX_HERMITE_ORDER: usize = 12;

/// Probabilists' Hermite polynomial `He_k(x)` (weight `exp(-x²/2)`).
///
/// Evaluated by the recurrence `He_{k+1} = x He_k - k He_{k-1}`.
pub fn hermite(k: usize, x: f64) -> f64 {
    assert!(k <= MAX_HERMITE_ORDER, "Hermite order {k} exceeds {MAX_HERMITE_ORDER}");
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for j in 1..k {
                let next = x * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Coefficients of `He_k` as a [`Polynomial`].
pub fn hermite_polynomial(k: usize) -> Polynomial {
    assert!(k <= MAX_HERMITE_ORDER, "Hermite order {k} exceeds {MAX_HERMITE_ORDER}");
    let mut prev = Polynomial::new(vec![1.0]);
    if k == 0 {
        return prev;
    }
    let mut cur = Polynomial::new(vec![0.0, 1.0]);
    for j in 1..k {
        let next = cur.shift_up().sub(&prev.scale(j as f64));
        prev = cur;
        cur = next;
    }
    cur
}

/// Real polynomial stored by ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    ascending: Vec<f64>,
}

impl Polynomial {
    /// `ascending[j]` is the coefficient of `x^j`.
    pub fn new(ascending: Vec<f64>) -> Self {
        let mut p = Self { ascending };
        p.trim();
        p
    }

    /// From `(c₀, …, c_k)` meaning `c₀ x^k + c₁ x^{k-1} + … + c_k`.
    pub fn from_descending(descending: &[f64]) -> Self {
        Self::new(descending.iter().rev().copied().collect())
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    fn trim(&mut self) {
        while self.ascending.last() == Some(&0.0) {
            self.ascending.pop();
        }
    }

    pub fn ascending(&self) -> &[f64] {
        &self.ascending
    }

    /// Coefficients `(c₀, …, c_k)` from the leading power down.
    pub fn descending(&self) -> Vec<f64> {
        self.ascending.iter().rev().copied().collect()
    }

    /// Coefficient of `x^j` (zero beyond the degree).
    pub fn coeff(&self, j: usize) -> f64 {
        self.ascending.get(j).copied().unwrap_or(0.0)
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.ascending.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.ascending.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.ascending.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.ascending
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| j as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.ascending.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.ascending.len().max(other.ascending.len());
        Polynomial::new((0..len).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    // multiply by x
    fn shift_up(&self) -> Polynomial {
        if self.is_zero() {
            return self.clone();
        }
        let mut v = Vec::with_capacity(self.ascending.len() + 1);
        v.push(0.0);
        v.extend_from_slice(&self.ascending);
        Polynomial::new(v)
    }
}

/// `c_l = ∫₀^∞ x^l exp(-n x²/2) dx = 2^{(l-1)/2} Γ((l+1)/2) / n^{(l+1)/2}`.
pub fn half_gaussian_moment(l: usize, n: f64) -> f64 {
    ln_half_gaussian_moment(l as f64, n).exp()
}

/// Logarithm of [`half_gaussian_moment`], also valid for non-integer `l > -1`.
pub fn ln_half_gaussian_moment(l: f64, n: f64) -> f64 {
    0.5 * (l - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * (l + 1.0))
        - 0.5 * (l + 1.0) * n.ln()
}

/// `∫₀^∞ ∫ exp(-n(a²+b²)/2) b^{n-2} da db`, the mass of the location-scale
/// weight used by the exact statistic.
pub fn null_weight_mass(n: usize) -> f64 {
    let nf = n as f64;
    (2.0 * PI / nf).sqrt() * half_gaussian_moment(n - 2, nf)
}

/// Denominator of the most powerful invariant ratio under the standard
/// normal: `Γ((n-1)/2) / (2 n^{n/2} π^{(n-1)/2})`.
pub fn null_denominator_constant(n: usize) -> f64 {
    assert!(n >= 3, "the denominator constant needs n >= 3");
    let nf = n as f64;
    (ln_gamma(0.5 * (nf - 1.0)) - 2f64.ln() - 0.5 * nf * nf.ln() - 0.5 * (nf - 1.0) * PI.ln())
        .exp()
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

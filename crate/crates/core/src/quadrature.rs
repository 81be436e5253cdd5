//! Fixed-node quadrature rules: Gauss–Legendre, Gauss–Hermite and a
//! tanh-sinh rule for endpoint singularities.
//!
//! Nodes are computed by Newton iteration on the three-term recurrences,
//! which stays accurate to a few ulps for the orders used here (≤ 512).

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..NEWTON_MAX_ITER {
                let (p1, p2) = legendre_pair(n, z);
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= NEWTON_TOL {
                    break;
                }
            }
            let (p1, p2) = legendre_pair(n, z);
            pp = if pp == 0.0 { 1.0 } else { nf * (z * p1 - p2) / (z * z - 1.0) };
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule of the given order, computed once per process.
    pub fn cached(order: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        memoized(&CACHE, order, Self::new)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + width * k as f64;
                self.integrate(lo, lo + width, &mut f)
            })
            .sum()
    }
}

fn memoized<T>(
    cache: &'static OnceLock<Mutex<HashMap<usize, Arc<T>>>>,
    order: usize,
    build: fn(usize) -> T,
) -> Arc<T> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = map.lock().expect("quadrature cache poisoned").get(&order) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build(order));
    map.lock()
        .expect("quadrature cache poisoned")
        .entry(order)
        .or_insert(rule)
        .clone()
}

// Returns (P_n(z), P_{n-1}(z)).
fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// Gauss–Hermite rule for the physicists' weight `exp(-x²)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "Gauss-Hermite order must be positive");
        let n = order;
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut pos = Vec::with_capacity((n + 1) / 2);
        let mut wts = Vec::with_capacity((n + 1) / 2);
        let mut z = 0.0_f64;
        for i in 0..(n + 1) / 2 {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * pos[0],
                3 => 1.91 * z - 0.91 * pos[1],
                _ => 2.0 * z - pos[i - 2],
            };
            let mut pp: f64;
            for _ in 0..NEWTON_MAX_ITER {
                let (p1, p2) = hermite_orthonormal_pair(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, p2) = hermite_orthonormal_pair(n, z, pim4);
            pp = (2.0 * nf).sqrt() * p2;
            pos.push(z);
            wts.push(2.0 / (pp * pp));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for (i, (&x, &w)) in pos.iter().zip(&wts).enumerate() {
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule of the given order, computed once per process.
    pub fn cached(order: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        memoized(&CACHE, order, Self::new)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(x) exp(-x²) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect_standard_normal<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2;
        self.integrate(|x| f(scale * x)) / PI.sqrt()
    }
}

// Orthonormal Hermite recurrence; returns (p_n(z), p_{n-1}(z)).
fn hermite_orthonormal_pair(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Tanh-sinh (double exponential) rule on a finite interval.
///
/// Handles integrable endpoint singularities such as `log t` at `t = 0`.
/// Abscissae are stored as distances from the nearer endpoint so no
/// precision is lost where the nodes cluster.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    // (signed offset in (-1, 1) written as (side, distance to endpoint), weight)
    nodes: Vec<(bool, f64, f64)>,
}

impl TanhSinh {
    /// Step `h` in the transformed variable and truncation `|t| <= t_max`.
    pub fn new(h: f64, t_max: f64) -> Self {
        assert!(h > 0.0 && t_max > 0.0);
        let steps = (t_max / h).ceil() as i64;
        let mut nodes = Vec::with_capacity(2 * steps as usize + 1);
        for k in -steps..=steps {
            let t = k as f64 * h;
            let u = FRAC_PI_2 * t.sinh();
            let cu = u.cosh();
            let w = h * FRAC_PI_2 * t.cosh() / (cu * cu);
            // 1 - tanh|u| without cancellation
            let e = (-2.0 * u.abs()).exp();
            let dist = 2.0 * e / (1.0 + e);
            if w == 0.0 || dist == 0.0 {
                continue;
            }
            nodes.push((t >= 0.0, dist, w));
        }
        Self { nodes }
    }

    /// Rule with step `2^-level`, truncated where the weights underflow.
    pub fn with_level(level: u32) -> Self {
        Self::new(0.5_f64.powi(level as i32), 3.2)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        self.nodes.iter().map(move |&(right, dist, w)| {
            let x = if right { b - half * dist } else { a + half * dist };
            (x, w * half)
        })
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

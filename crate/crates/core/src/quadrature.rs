//! Composite Gauss–Legendre quadrature on equal panels, refined by panel
//! doubling until two successive estimates agree.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Points per panel.
pub const ORDER: usize = 32;

/// Default absolute tolerance between successive panel doublings.
pub const TOLERANCE: f64 = 1e-10;

/// Refinement stops with [`Error::Accuracy`] beyond this many panels.
pub const MAX_PANELS: usize = 1 << 14;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights of the composite rule on `[a, b]` with `panels`
    /// equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let n = self.nodes.len();
        let mut xs = Vec::with_capacity(panels * n);
        let mut ws = Vec::with_capacity(panels * n);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The shared 32-point rule.
pub fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ORDER))
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let v = integrate_many(|t, out| out[0] = f(t), 1, a, b, tol, 1)?;
    Ok(v[0])
}

/// Integrates a vector-valued function component-wise. `f(t, out)` writes
/// `len` values. Starts at `min_panels` panels and doubles until every
/// component changes by less than `tol`.
pub fn integrate_many(
    mut f: impl FnMut(f64, &mut [f64]),
    len: usize,
    a: f64,
    b: f64,
    tol: f64,
    min_panels: usize,
) -> Result<Vec<f64>> {
    if a == b {
        return Ok(vec![0.0; len]);
    }
    let gl = rule();
    let mut buf = vec![0.0; len];
    let mut estimate = |panels: usize| {
        let (xs, ws) = gl.composite(a, b, panels);
        let mut acc = vec![0.0; len];
        for (x, w) in xs.iter().zip(&ws) {
            f(*x, &mut buf);
            for (s, v) in acc.iter_mut().zip(&buf) {
                *s += w * v;
            }
        }
        acc
    };
    let mut panels = min_panels.max(1);
    let mut previous = estimate(panels);
    loop {
        panels *= 2;
        let current = estimate(panels);
        let change = previous
            .iter()
            .zip(&current)
            .map(|(p, c)| (p - c).abs())
            .fold(0.0, f64::max);
        if change < tol {
            return Ok(current);
        }
        if panels >= MAX_PANELS {
            let worst = current.iter().map(|v| v.abs()).fold(0.0, f64::max);
            return Err(Error::Accuracy {
                estimate: worst,
                change,
                panels,
            });
        }
        previous = current;
    }
}

//! Windowed cosine modes of the emitted radiation and assembly of the
//! multimode covariance of any combination of old radiation (B1), new
//! radiation (B2) and the resonator (A).
//!
//! On a window `(t1, t2)` of length `T` the modes are
//! `u_k(t) = (η_k/√T)·cos(ω_k (t − t1))`, `ω_k = πk/T`, `η_0 = 1`,
//! `η_k = √2`, which are orthonormal on the window. Projecting the white-noise
//! part of the output covariance onto them gives exactly the identity within
//! one window and exactly zero between disjoint windows; only the smooth
//! kernels need integrating.

use std::fmt;

use faer::Mat;

use crate::dynamics::{
    cross_weight, noise_kernel, resonator_covariance, signal_kernel, signal_profile, ExpProfile,
    ModelKind, RateParams, SmoothKernel,
};
use crate::error::{Error, Result};
use crate::gaussian::{williamson_spectrum, CovarianceMatrix, Mat2, SymplecticSpectrum, VALIDITY_TOL};
use crate::quadrature::{self, integrate_many, TOLERANCE};

/// Default number of cosine modes above the constant one.
pub const DEFAULT_K_MAX: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeWindow {
    t1: f64,
    t2: f64,
}

impl TimeWindow {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite() && t2 > t1) {
            return Err(Error::Domain(format!("window ({t1}, {t2}) is empty or not finite")));
        }
        Ok(Self { t1, t2 })
    }

    pub fn start(&self) -> f64 {
        self.t1
    }

    pub fn end(&self) -> f64 {
        self.t2
    }

    pub fn duration(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t1 && t <= self.t2
    }
}

/// The cosine modes `k = 0..=k_max` on one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowBasis {
    pub window: TimeWindow,
    pub k_max: usize,
}

impl WindowBasis {
    pub fn new(window: TimeWindow, k_max: usize) -> Self {
        Self { window, k_max }
    }

    pub fn len(&self) -> usize {
        self.k_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `ω_k = πk/T`.
    pub fn frequency(&self, k: usize) -> f64 {
        std::f64::consts::PI * k as f64 / self.window.duration()
    }

    /// `η_k`.
    pub fn normalizer(k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            std::f64::consts::SQRT_2
        }
    }

    /// `u_k(t)`; zero outside the window.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        if !self.window.contains(t) {
            return 0.0;
        }
        let norm = Self::normalizer(k) / self.window.duration().sqrt();
        norm * (self.frequency(k) * (t - self.window.t1)).cos()
    }

    /// Writes `u_0(t) … u_{k_max}(t)` into `out` using the Chebyshev
    /// recurrence for `cos(kθ)`.
    pub fn eval_all(&self, t: f64, out: &mut [f64]) {
        let theta = self.frequency(1) * (t - self.window.t1);
        let norm = 1.0 / self.window.duration().sqrt();
        let two_cos = 2.0 * theta.cos();
        let (mut prev, mut cur) = (theta.cos(), 1.0);
        for (k, slot) in out.iter_mut().enumerate().take(self.len()) {
            *slot = norm * Self::normalizer(k) * cur;
            let next = two_cos * cur - prev;
            prev = cur;
            cur = next;
        }
    }
}

/// Mode overlap of the decay signal `√Γ e^{−γt}` with `u_k`:
///
/// `f_k = √(Γ/T)·γ·e^{−γ t1}·η_k·(1 − e^{−γT} cos ω_k T)/(γ² + ω_k²)`.
pub fn overlap_fk(window: &TimeWindow, k: usize, params: &RateParams) -> f64 {
    let gamma = params.half_rate();
    let t = window.duration();
    let omega = std::f64::consts::PI * k as f64 / t;
    (params.rate() / t).sqrt() * gamma * (-gamma * window.t1).exp() * WindowBasis::normalizer(k)
        * (1.0 - (-gamma * t).exp() * (omega * t).cos())
        / (gamma * gamma + omega * omega)
}

/// `∫ u_k(t)·A e^{λt} dt` over the window, in closed form for any `λ`.
pub fn exp_overlap(window: &TimeWindow, k: usize, profile: &ExpProfile) -> f64 {
    let lambda = profile.exponent;
    let t = window.duration();
    let omega = std::f64::consts::PI * k as f64 / t;
    let norm = WindowBasis::normalizer(k) / t.sqrt();
    let prefactor = profile.amplitude * norm * (lambda * window.t1).exp();
    let denom = lambda * lambda + omega * omega;
    if denom == 0.0 {
        // λ = 0 and k = 0
        return prefactor * t;
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // ∫_0^T e^{λu} cos(πku/T) du = λ((−1)^k e^{λT} − 1)/(λ² + ω²)
    prefactor * lambda * (sign * (lambda * t).exp() - 1.0) / denom
}

/// `Σ_{k ≤ k_max} f_k²`, which converges to `e^{−Γt1} − e^{−Γt2}`.
pub fn parseval_sum(window: &TimeWindow, params: &RateParams, k_max: usize) -> f64 {
    (0..=k_max).map(|k| overlap_fk(window, k, params).powi(2)).sum()
}

/// Numerical projections `∫ u_k(t) φ(t) dt` for all `k` of `basis`.
pub fn project_profile(
    basis: &WindowBasis,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut modes = vec![0.0; basis.len()];
    integrate_many(
        |t, out| {
            basis.eval_all(t, &mut modes);
            let v = f(t);
            for (o, u) in out.iter_mut().zip(&modes) {
                *o = u * v;
            }
        },
        basis.len(),
        basis.window.start(),
        basis.window.end(),
        TOLERANCE,
        min_panels(basis),
    )
}

fn min_panels(basis: &WindowBasis) -> usize {
    // a panel holds at most ~4 periods of the fastest cosine
    basis.k_max / 8 + 1
}

/// Per-quadrature-pair blocks of a projected kernel: `blocks[α][β]` has
/// shape `len(a) × len(b)`.
#[derive(Clone, Debug)]
pub struct ProjectedKernel {
    pub blocks: [[Mat<f64>; 2]; 2],
}

impl ProjectedKernel {
    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.blocks {
            for m in row {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        worst = worst.max(m[(i, j)].abs());
                    }
                }
            }
        }
        worst
    }
}

/// `∫∫ u_j(t) u_k(t′) K(t, t′) dt dt′` with `u_j` from `a` and `u_k` from
/// `b`, by composite Gauss–Legendre quadrature to absolute tolerance
/// [`TOLERANCE`]. Separable kernels reduce to products of one-dimensional
/// integrals.
pub fn project_smooth_kernel(
    kernel: &dyn SmoothKernel,
    a: &WindowBasis,
    b: &WindowBasis,
) -> Result<ProjectedKernel> {
    if let Some(sep) = kernel.separable() {
        let left = project_profile(a, |t| sep.left.eval(t))?;
        let right = project_profile(b, |t| sep.right.eval(t))?;
        return Ok(outer_blocks(&sep.weight, &left, &right));
    }
    project_tensor(kernel, a, b)
}

fn outer_blocks(weight: &Mat2, left: &[f64], right: &[f64]) -> ProjectedKernel {
    let block = |w: f64| Mat::from_fn(left.len(), right.len(), |j, k| w * left[j] * right[k]);
    ProjectedKernel {
        blocks: [
            [block(weight[0][0]), block(weight[0][1])],
            [block(weight[1][0]), block(weight[1][1])],
        ],
    }
}

fn project_tensor(
    kernel: &dyn SmoothKernel,
    a: &WindowBasis,
    b: &WindowBasis,
) -> Result<ProjectedKernel> {
    let gl = quadrature::rule();
    let estimate = |pa: usize, pb: usize| -> [[Mat<f64>; 2]; 2] {
        let (xa, wa) = gl.composite(a.window.start(), a.window.end(), pa);
        let (xb, wb) = gl.composite(b.window.start(), b.window.end(), pb);
        let weighted_modes = |basis: &WindowBasis, xs: &[f64], ws: &[f64]| {
            let mut m = Mat::zeros(basis.len(), xs.len());
            let mut buf = vec![0.0; basis.len()];
            for (i, (x, w)) in xs.iter().zip(ws).enumerate() {
                basis.eval_all(*x, &mut buf);
                for (k, u) in buf.iter().enumerate() {
                    m[(k, i)] = w * u;
                }
            }
            m
        };
        let ua = weighted_modes(a, &xa, &wa);
        let ub = weighted_modes(b, &xb, &wb);
        let mut values: [[Mat<f64>; 2]; 2] =
            std::array::from_fn(|_| std::array::from_fn(|_| Mat::zeros(xa.len(), xb.len())));
        for (i, x) in xa.iter().enumerate() {
            for (j, y) in xb.iter().enumerate() {
                let k = kernel.eval(*x, *y);
                for al in 0..2 {
                    for be in 0..2 {
                        values[al][be][(i, j)] = k[al][be];
                    }
                }
            }
        }
        values.map(|row| row.map(|v| &ua * &v * ub.transpose()))
    };
    let (mut pa, mut pb) = (min_panels(a), min_panels(b));
    let mut previous = estimate(pa, pb);
    loop {
        pa *= 2;
        pb *= 2;
        let current = estimate(pa, pb);
        let mut change = 0.0_f64;
        for al in 0..2 {
            for be in 0..2 {
                let (p, c) = (&previous[al][be], &current[al][be]);
                for j in 0..c.ncols() {
                    for i in 0..c.nrows() {
                        change = change.max((p[(i, j)] - c[(i, j)]).abs());
                    }
                }
            }
        }
        if change < TOLERANCE {
            return Ok(ProjectedKernel { blocks: current });
        }
        if pa.max(pb) >= 256 {
            let result = ProjectedKernel { blocks: current };
            return Err(Error::Accuracy {
                estimate: result.max_abs(),
                change,
                panels: pa.max(pb),
            });
        }
        previous = current;
    }
}

/// One of the three subsystems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subsystem {
    /// Radiation collected during `(0, t0)`.
    B1,
    /// Radiation collected during `(t0, t)`.
    B2,
    /// The resonator at time `t`.
    A,
}

/// A nonempty subset of `{B1, B2, A}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Selection {
    pub b1: bool,
    pub b2: bool,
    pub a: bool,
}

impl Selection {
    pub const A: Self = Self::of(false, false, true);
    pub const B1: Self = Self::of(true, false, false);
    pub const B2: Self = Self::of(false, true, false);
    pub const B1B2: Self = Self::of(true, true, false);
    pub const B2A: Self = Self::of(false, true, true);
    pub const B1B2A: Self = Self::of(true, true, true);

    pub const fn of(b1: bool, b2: bool, a: bool) -> Self {
        Self { b1, b2, a }
    }

    pub fn contains(&self, part: Subsystem) -> bool {
        match part {
            Subsystem::B1 => self.b1,
            Subsystem::B2 => self.b2,
            Subsystem::A => self.a,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.b1 || self.b2 || self.a)
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, label) in [(self.b1, "B1"), (self.b2, "B2"), (self.a, "A")] {
            if on {
                f.write_str(label)?;
            }
        }
        Ok(())
    }
}

/// Which subsystems to assemble, and the split and readout times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsystemSpec {
    pub selection: Selection,
    t0: f64,
    t: f64,
}

impl SubsystemSpec {
    pub fn new(selection: Selection, t0: f64, t: f64) -> Result<Self> {
        if selection.is_empty() {
            return Err(Error::Domain("empty subsystem selection".into()));
        }
        if !(t0 > 0.0 && t > t0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < t0 < t, got t0 = {t0}, t = {t}"
            )));
        }
        Ok(Self { selection, t0, t })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Windows of the selected radiation subsystems, B1 before B2.
    pub fn windows(&self) -> Vec<TimeWindow> {
        let mut out = Vec::with_capacity(2);
        if self.selection.b1 {
            out.push(TimeWindow { t1: 0.0, t2: self.t0 });
        }
        if self.selection.b2 {
            out.push(TimeWindow {
                t1: self.t0,
                t2: self.t,
            });
        }
        out
    }
}

/// How the one-dimensional mode projections are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProjectionMethod {
    #[default]
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub k_max: usize,
    pub method: ProjectionMethod,
    pub validity_tol: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            method: ProjectionMethod::ClosedForm,
            validity_tol: VALIDITY_TOL,
        }
    }
}

/// An assembled covariance together with its (already checked) spectrum.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub covariance: CovarianceMatrix,
    pub spectrum: SymplecticSpectrum,
}

/// Projections of the signal envelope onto every mode of `basis`.
fn signal_projection(
    model: ModelKind,
    params: &RateParams,
    basis: &WindowBasis,
    method: ProjectionMethod,
) -> Result<Vec<f64>> {
    let profile = signal_profile(model, params);
    match (method, model) {
        (ProjectionMethod::ClosedForm, ModelKind::Decay) => Ok((0..basis.len())
            .map(|k| overlap_fk(&basis.window, k, params))
            .collect()),
        (ProjectionMethod::ClosedForm, ModelKind::Amplifier) => Ok((0..basis.len())
            .map(|k| exp_overlap(&basis.window, k, &profile))
            .collect()),
        (ProjectionMethod::Quadrature, _) => project_profile(basis, |t| profile.eval(t)),
    }
}

/// Adds `weight_αβ·left_j·right_k` into the `(α,β)` entries of the block
/// whose first mode rows start at `row0` and columns at `col0`.
fn add_separable(
    out: &mut Mat<f64>,
    row0: usize,
    col0: usize,
    weight: &Mat2,
    left: &[f64],
    right: &[f64],
) {
    for (j, l) in left.iter().enumerate() {
        for (k, r) in right.iter().enumerate() {
            let f = l * r;
            for al in 0..2 {
                for be in 0..2 {
                    out[(2 * (row0 + j) + al, 2 * (col0 + k) + be)] += weight[al][be] * f;
                }
            }
        }
    }
}

/// Builds the covariance over the selected modes without checking it.
///
/// Mode order: the `k_max + 1` modes of B1, then those of B2, then A.
pub fn assemble_unchecked(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    spec: &SubsystemSpec,
    options: &AssemblyOptions,
) -> Result<CovarianceMatrix> {
    let bases: Vec<WindowBasis> = spec
        .windows()
        .into_iter()
        .map(|w| WindowBasis::new(w, options.k_max))
        .collect();
    let projections = bases
        .iter()
        .map(|b| signal_projection(model, params, b, options.method))
        .collect::<Result<Vec<_>>>()?;
    let n_radiation: usize = bases.iter().map(WindowBasis::len).sum();
    let n_modes = n_radiation + usize::from(spec.selection.a);
    let dim = 2 * n_modes;
    let mut out = Mat::<f64>::zeros(dim, dim);

    // δ(t − t′)·I: identity within a window, zero across windows
    for i in 0..2 * n_radiation {
        out[(i, i)] = 1.0;
    }

    let signal = signal_kernel(model, sigma0, params)?;
    let noise = noise_kernel(model, params);
    // both kernels are built on the signal envelope, so they share projections
    debug_assert_eq!(signal.left, noise.left);
    let smooth = crate::dynamics::add(&signal.weight, &noise.weight);
    let offsets: Vec<usize> = bases
        .iter()
        .scan(0, |acc, b| {
            let start = *acc;
            *acc += b.len();
            Some(start)
        })
        .collect();
    for (pa, oa) in projections.iter().zip(&offsets) {
        for (pb, ob) in projections.iter().zip(&offsets) {
            add_separable(&mut out, *oa, *ob, &smooth, pa, pb);
        }
    }

    if spec.selection.a {
        let a = n_radiation;
        let resonator = resonator_covariance(model, sigma0, params, spec.t())?;
        for al in 0..2 {
            for be in 0..2 {
                out[(2 * a + al, 2 * a + be)] = resonator.block(0, 0)[al][be];
            }
        }
        let (weight, amplitude) = cross_weight(model, sigma0, params, spec.t())?;
        // projections already carry the √Γ of the emission envelope
        let cross = crate::dynamics::scale(&weight, amplitude);
        for (p, o) in projections.iter().zip(&offsets) {
            for (j, v) in p.iter().enumerate() {
                for al in 0..2 {
                    for be in 0..2 {
                        let x = cross[al][be] * v;
                        out[(2 * (o + j) + al, 2 * a + be)] = x;
                        out[(2 * a + be, 2 * (o + j) + al)] = x;
                    }
                }
            }
        }
    }
    CovarianceMatrix::new(out)
}

/// Assembles and diagonalizes, failing if the result violates the
/// uncertainty bound by more than `options.validity_tol`.
pub fn assemble_checked(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    spec: &SubsystemSpec,
    options: &AssemblyOptions,
) -> Result<Assembled> {
    let covariance = assemble_unchecked(model, sigma0, params, spec, options)?;
    let spectrum = williamson_spectrum(&covariance)?;
    if spectrum.min() < 1.0 - options.validity_tol {
        return Err(Error::Inconsistent {
            context: format!(
                "{} ({model}, t0 = {}, t = {})",
                spec.selection,
                spec.t0(),
                spec.t()
            ),
            min_eigenvalue: spectrum.min(),
        });
    }
    Ok(Assembled {
        covariance,
        spectrum,
    })
}

/// Full covariance of the selected subsystems with `k_max` modes per window.
pub fn assemble_covariance(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    spec: &SubsystemSpec,
    k_max: usize,
) -> Result<CovarianceMatrix> {
    let options = AssemblyOptions {
        k_max,
        ..AssemblyOptions::default()
    };
    assemble_checked(model, sigma0, params, spec, &options).map(|a| a.covariance)
}

//! Closed-form rotating-frame covariance kernels of the two Markovian models.
//!
//! Decay: `ȧ = −γa − √Γ b_in`, `b_out = √Γ a + b_in`.
//! Amplifier: `ȧ = +γa + √Γ b_in†`, `b_out = b_in + √Γ a†`.
//! Here `γ = Γ/2` and all operators are in the rotating frame. The bath input
//! is vacuum white noise, so every output covariance splits into a
//! `δ(t − t′)·I` part, handled analytically during projection, plus smooth
//! kernels that are sums of exponentials in `t` and `t′`.
//!
//! The smooth part of the output covariance is written as
//! `g_α(t) g_β(t′) W_αβ + N_αβ(t, t′)` where `g` is [`signal_mode`], `W` is
//! [`signal_weight`] and `N` is [`output_noise_kernel`]. For the decay model
//! the vacuum share of the initial state cancels the noise exactly, so
//! `W = σ0 − I` and `N = 0`. For the amplifier `W = σ0` and `N` is the
//! amplified vacuum noise `Γ e^{γ(t+t′)}·I`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gaussian::{CovarianceMatrix, Mat2, IDENTITY2, ZERO2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Passive leakage of the resonator into the bath.
    Decay,
    /// Pair production by parametric resonance.
    Amplifier,
}

impl ModelKind {
    /// Per-quadrature sign with which the resonator enters the output:
    /// the amplifier couples `a†`, flipping `X2`.
    pub fn quadrature_signs(self) -> [f64; 2] {
        match self {
            ModelKind::Decay => [1.0, 1.0],
            ModelKind::Amplifier => [1.0, -1.0],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Decay => "decay",
            ModelKind::Amplifier => "amplifier",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "decay" => Ok(ModelKind::Decay),
            "amplifier" => Ok(ModelKind::Amplifier),
            other => Err(Error::Domain(format!(
                "unknown model `{other}` (expected `decay` or `amplifier`)"
            ))),
        }
    }
}

/// Squeezed thermal state `(2N_th + 1)·diag(e^{2r}, e^{−2r})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialState {
    r: f64,
    n_th: f64,
}

impl InitialState {
    pub fn new(r: f64, n_th: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("squeezing r = {r} is not finite")));
        }
        if !(n_th >= 0.0 && n_th.is_finite()) {
            return Err(Error::Domain(format!(
                "thermal population {n_th} must be finite and non-negative"
            )));
        }
        Ok(Self { r, n_th })
    }

    pub fn vacuum() -> Self {
        Self { r: 0.0, n_th: 0.0 }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_th(&self) -> f64 {
        self.n_th
    }

    pub fn is_pure(&self) -> bool {
        self.n_th == 0.0
    }
}

/// Decay (or gain) rate `Γ` and its half `γ = Γ/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    rate: f64,
    half_rate: f64,
}

impl RateParams {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("rate Γ = {rate} must be positive")));
        }
        Ok(Self {
            rate,
            half_rate: rate / 2.0,
        })
    }

    /// `Γ`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `γ = Γ/2`.
    pub fn half_rate(&self) -> f64 {
        self.half_rate
    }
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            rate: 1.0,
            half_rate: 0.5,
        }
    }
}

/// Scalar profile `amplitude · e^{exponent·t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpProfile {
    pub amplitude: f64,
    pub exponent: f64,
}

impl ExpProfile {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.exponent * t).exp()
    }
}

/// Kernel of the form `weight_αβ · left(t) · right(t′)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparableKernel {
    pub weight: Mat2,
    pub left: ExpProfile,
    pub right: ExpProfile,
}

/// A smooth 2×2 covariance kernel on a product of time intervals.
pub trait SmoothKernel: Sync {
    fn eval(&self, t: f64, t_prime: f64) -> Mat2;

    /// Rank-one factorization, when the kernel has one.
    fn separable(&self) -> Option<SeparableKernel> {
        None
    }
}

impl SmoothKernel for SeparableKernel {
    fn eval(&self, t: f64, t_prime: f64) -> Mat2 {
        let f = self.left.eval(t) * self.right.eval(t_prime);
        scale(&self.weight, f)
    }

    fn separable(&self) -> Option<SeparableKernel> {
        Some(*self)
    }
}

pub(crate) fn scale(m: &Mat2, f: f64) -> Mat2 {
    [[m[0][0] * f, m[0][1] * f], [m[1][0] * f, m[1][1] * f]]
}

pub(crate) fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub(crate) fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    add(a, &scale(b, -1.0))
}

/// `diag(l)·m·diag(r)`.
pub(crate) fn sign_flip(m: &Mat2, l: [f64; 2], r: [f64; 2]) -> Mat2 {
    [
        [l[0] * m[0][0] * r[0], l[0] * m[0][1] * r[1]],
        [l[1] * m[1][0] * r[0], l[1] * m[1][1] * r[1]],
    ]
}

/// `(2N_th + 1)·diag(e^{2r}, e^{−2r})`.
pub fn initial_covariance(state: &InitialState) -> CovarianceMatrix {
    let thermal = 2.0 * state.n_th + 1.0;
    CovarianceMatrix::single_mode([
        [thermal * (2.0 * state.r).exp(), 0.0],
        [0.0, thermal * (-2.0 * state.r).exp()],
    ])
}

fn single_mode_block(sigma0: &CovarianceMatrix) -> Result<Mat2> {
    if sigma0.n_modes() != 1 {
        return Err(Error::Dimension(format!(
            "resonator covariance must be single-mode, got {} modes",
            sigma0.n_modes()
        )));
    }
    Ok(sigma0.block(0, 0))
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time {t} must be finite and non-negative")));
    }
    Ok(())
}

/// Resonator covariance at time `t`.
///
/// Decay: `(σ0 − I)e^{−Γt} + I`. Amplifier: `(σ0 + I)e^{Γt} − I`.
pub fn resonator_covariance(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    t: f64,
) -> Result<CovarianceMatrix> {
    check_time(t)?;
    let s0 = single_mode_block(sigma0)?;
    let block = match model {
        ModelKind::Decay => add(
            &scale(&sub(&s0, &IDENTITY2), (-params.rate * t).exp()),
            &IDENTITY2,
        ),
        ModelKind::Amplifier => sub(
            &scale(&add(&s0, &IDENTITY2), (params.rate * t).exp()),
            &IDENTITY2,
        ),
    };
    Ok(CovarianceMatrix::single_mode(block))
}

/// The scalar envelope of [`signal_mode`]: `√Γ e^{∓γt}`.
pub fn signal_profile(model: ModelKind, params: &RateParams) -> ExpProfile {
    let exponent = match model {
        ModelKind::Decay => -params.half_rate,
        ModelKind::Amplifier => params.half_rate,
    };
    ExpProfile {
        amplitude: params.rate.sqrt(),
        exponent,
    }
}

/// Amplitudes `(g₁(t), g₂(t))` with which `X_α(0)` enters `Z_α(t)`.
pub fn signal_mode(model: ModelKind, params: &RateParams, t: f64) -> [f64; 2] {
    let g = signal_profile(model, params).eval(t);
    let signs = model.quadrature_signs();
    [signs[0] * g, signs[1] * g]
}

/// The matrix that multiplies `g_α(t) g_β(t′)` in the output covariance.
pub fn signal_weight(model: ModelKind, sigma0: &CovarianceMatrix) -> Result<Mat2> {
    let s0 = single_mode_block(sigma0)?;
    Ok(match model {
        ModelKind::Decay => sub(&s0, &IDENTITY2),
        ModelKind::Amplifier => s0,
    })
}

/// The signal part `g_α(t) g_β(t′) W_αβ` as a separable kernel.
pub fn signal_kernel(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
) -> Result<SeparableKernel> {
    let signs = model.quadrature_signs();
    let profile = signal_profile(model, params);
    Ok(SeparableKernel {
        weight: sign_flip(&signal_weight(model, sigma0)?, signs, signs),
        left: profile,
        right: profile,
    })
}

/// Smooth output-noise kernel from the vacuum input (the `δ(t − t′)·I` part
/// excluded). Zero for the decay model; `Γ e^{γ(t+t′)}·I` for the amplifier.
pub fn output_noise_kernel(model: ModelKind, params: &RateParams, t: f64, t_prime: f64) -> Mat2 {
    match model {
        ModelKind::Decay => ZERO2,
        ModelKind::Amplifier => {
            scale(&IDENTITY2, params.rate * (params.half_rate * (t + t_prime)).exp())
        }
    }
}

/// [`output_noise_kernel`] as a separable kernel.
pub fn noise_kernel(model: ModelKind, params: &RateParams) -> SeparableKernel {
    let profile = signal_profile(model, params);
    let weight = match model {
        ModelKind::Decay => ZERO2,
        ModelKind::Amplifier => IDENTITY2,
    };
    SeparableKernel {
        weight,
        left: profile,
        right: profile,
    }
}

/// Symmetrized covariance `½⟨{Z_α(s), X_β(t)}⟩` between the output at
/// emission time `s` and the resonator at readout time `t > s`.
///
/// Decay: `√Γ e^{−γ(s+t)} (σ0 − I)`. Amplifier:
/// `√Γ e^{γ(s+t)} diag(1, −1)(σ0 + I)`; the vacuum noise no longer cancels.
pub fn cross_kernel_output_resonator(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    s: f64,
    t: f64,
) -> Result<Mat2> {
    check_time(s)?;
    check_time(t)?;
    if s >= t {
        return Err(Error::Ordering {
            emission: s,
            readout: t,
        });
    }
    let (weight, amplitude) = cross_weight(model, sigma0, params, t)?;
    Ok(scale(&weight, amplitude * signal_profile(model, params).eval(s)))
}

/// The cross kernel factorizes as `weight · amplitude · profile(s)`; returns
/// `(weight, amplitude)` for readout time `t`.
pub(crate) fn cross_weight(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    params: &RateParams,
    t: f64,
) -> Result<(Mat2, f64)> {
    let s0 = single_mode_block(sigma0)?;
    Ok(match model {
        ModelKind::Decay => (sub(&s0, &IDENTITY2), (-params.half_rate * t).exp()),
        ModelKind::Amplifier => (
            sign_flip(&add(&s0, &IDENTITY2), model.quadrature_signs(), [1.0, 1.0]),
            (params.half_rate * t).exp(),
        ),
    })
}

/// Independent evaluation of the smooth kernels straight from the solved
/// equations of motion, integrating the noise convolutions numerically
/// instead of in closed form.
pub mod by_quadrature {
    use super::*;
    use crate::quadrature::{integrate, TOLERANCE};

    /// Noise impulse response: the output at `t` contains
    /// `ξ(t) + Σ_α ∫_0^t h(t − u) ξ(u) du`. Returns `h`'s prefactor and rate.
    fn output_response(model: ModelKind, params: &RateParams) -> (f64, f64) {
        match model {
            ModelKind::Decay => (-params.rate, -params.half_rate),
            ModelKind::Amplifier => (params.rate, params.half_rate),
        }
    }

    /// Scalar noise kernel `⟨N(t)N(t′)⟩ − δ` from the vacuum input, plus the
    /// share of the initial vacuum that [`signal_weight`] moved out.
    pub fn output_noise_kernel(
        model: ModelKind,
        params: &RateParams,
        t: f64,
        t_prime: f64,
    ) -> Result<Mat2> {
        check_time(t)?;
        check_time(t_prime)?;
        let (c, k) = output_response(model, params);
        let (lo, hi) = if t <= t_prime { (t, t_prime) } else { (t_prime, t) };
        // ξ(lo) meets the memory integral of the later output
        let direct = c * (k * (hi - lo)).exp();
        let memory = integrate(
            |u| c * c * (k * (t - u)).exp() * (k * (t_prime - u)).exp(),
            0.0,
            lo,
            TOLERANCE,
        )?;
        let initial_vacuum = match model {
            ModelKind::Decay => {
                let g = signal_profile(model, params);
                g.eval(t) * g.eval(t_prime)
            }
            ModelKind::Amplifier => 0.0,
        };
        Ok(scale(&IDENTITY2, direct + memory + initial_vacuum))
    }

    pub fn cross_kernel_output_resonator(
        model: ModelKind,
        sigma0: &CovarianceMatrix,
        params: &RateParams,
        s: f64,
        t: f64,
    ) -> Result<Mat2> {
        check_time(s)?;
        check_time(t)?;
        if s >= t {
            return Err(Error::Ordering {
                emission: s,
                readout: t,
            });
        }
        let s0 = single_mode_block(sigma0)?;
        let signs = model.quadrature_signs();
        let (c, k) = output_response(model, params);
        let root = params.rate.sqrt();
        // resonator noise response: X(t) ∋ sign·(c/√Γ) ∫_0^t e^{k(t−u)} ξ(u) du
        let resonator = c / root;
        let direct = resonator * (k * (t - s)).exp();
        let memory = integrate(
            |u| c * (k * (s - u)).exp() * resonator * (k * (t - u)).exp(),
            0.0,
            s,
            TOLERANCE,
        )?;
        let noise = direct + memory;
        let signal = root * (k * (s + t)).exp();
        let mut out = ZERO2;
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = signs[a] * signal * s0[a][b];
            }
            out[a][a] += signs[a] * noise;
        }
        Ok(out)
    }
}

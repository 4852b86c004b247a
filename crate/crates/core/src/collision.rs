//! Collision-model oracle. The bath is cut into bins of width `dt`; each step
//! the resonator meets one fresh vacuum bin through an exact two-mode Gaussian
//! map, and the bin is then frozen as an output sample taken at the bin
//! centre. Everything is tracked at the level of covariance matrices, so every
//! intermediate state is exactly physical and the only error is the bath
//! sampling itself, which is first order in `dt`.

use faer::Mat;

use crate::dynamics::{ModelKind, RateParams};
use crate::error::{Error, Result};
use crate::gaussian::{CovarianceMatrix, Mat2};
use crate::modes::WindowBasis;

/// Largest step count accepted by the full joint simulation, whose memory
/// grows as `n_steps²`.
pub const DEFAULT_MAX_STEPS: usize = 1500;

/// Relative tolerance on window boundaries landing on bin edges.
const ALIGNMENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionConfig {
    dt: f64,
    n_steps: usize,
    theta: f64,
    detuning: Option<f64>,
    max_steps: usize,
}

impl CollisionConfig {
    /// `n_steps` bins of width `dt`, with interaction angle `θ = √(Γ·dt)`.
    pub fn new(dt: f64, n_steps: usize, params: &RateParams) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("bin width must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("collision run needs at least one step".into()));
        }
        Ok(Self {
            dt,
            n_steps,
            theta: (params.rate() * dt).sqrt(),
            detuning: None,
            max_steps: DEFAULT_MAX_STEPS,
        })
    }

    /// Enough steps of width `dt` to reach `horizon`, which must be a whole
    /// number of bins.
    pub fn covering(dt: f64, horizon: f64, params: &RateParams) -> Result<Self> {
        let n = bin_edge(horizon, dt).ok_or(Error::Alignment {
            t1: 0.0,
            t2: horizon,
            dt,
        })?;
        Self::new(dt, n, params)
    }

    /// Adds a free rotation at angular frequency `omega` to the resonator.
    /// Results are reported back in the rotating frame.
    pub fn with_detuning(mut self, omega: f64) -> Self {
        self.detuning = Some(omega);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn detuning(&self) -> Option<f64> {
        self.detuning
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Centre of bin `j` (1-based).
    pub fn sample_time(&self, j: usize) -> f64 {
        (j as f64 - 0.5) * self.dt
    }
}

/// `round(t/dt)` when `t` sits on a bin edge.
fn bin_edge(t: f64, dt: f64) -> Option<usize> {
    let x = t / dt;
    let n = x.round();
    ((x - n).abs() <= ALIGNMENT_TOL * x.abs().max(1.0) && n >= 0.0).then_some(n as usize)
}

fn rotation(phi: f64) -> Mat2 {
    let (s, c) = phi.sin_cos();
    [[c, -s], [s, c]]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// `a · p · bᵀ`
fn sandwich(a: &Mat2, p: &Mat2, b: &Mat2) -> Mat2 {
    mul(&mul(a, p), &transpose(b))
}

fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

/// One collision as 2×2 blocks: `A' = aa·A + ab·b`, `b' = ba·A + bb·b`.
#[derive(Clone, Copy, Debug)]
struct Collision {
    aa: Mat2,
    ab: Mat2,
    ba: Mat2,
    bb: Mat2,
}

impl Collision {
    fn new(model: ModelKind, theta: f64) -> Self {
        match model {
            // passive beam splitter
            ModelKind::Decay => {
                let (s, c) = theta.sin_cos();
                Self {
                    aa: [[c, 0.0], [0.0, c]],
                    ab: [[-s, 0.0], [0.0, -s]],
                    ba: [[s, 0.0], [0.0, s]],
                    bb: [[c, 0.0], [0.0, c]],
                }
            }
            // two-mode squeezer, coupling b to the conjugate of A
            ModelKind::Amplifier => {
                let (s, c) = (theta.sinh(), theta.cosh());
                Self {
                    aa: [[c, 0.0], [0.0, c]],
                    ab: [[s, 0.0], [0.0, -s]],
                    ba: [[s, 0.0], [0.0, -s]],
                    bb: [[c, 0.0], [0.0, c]],
                }
            }
        }
    }

    /// The 4×4 map on `(A₁, A₂, b₁, b₂)`.
    fn matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = self.aa[i][j];
                m[i][j + 2] = self.ab[i][j];
                m[i + 2][j] = self.ba[i][j];
                m[i + 2][j + 2] = self.bb[i][j];
            }
        }
        m
    }
}

/// Rotation that takes a lab-frame bin emitted when the resonator phase was
/// `phase` back to the rotating frame. The amplifier couples to the
/// conjugate amplitude, so its bins turn the other way.
fn bin_derotation(model: ModelKind, phase: f64) -> Mat2 {
    match model {
        ModelKind::Decay => rotation(-phase),
        ModelKind::Amplifier => rotation(phase),
    }
}

fn single_mode(sigma0: &CovarianceMatrix) -> Result<Mat2> {
    if sigma0.n_modes() != 1 {
        return Err(Error::Dimension(format!(
            "resonator state must be single-mode, got {} modes",
            sigma0.n_modes()
        )));
    }
    Ok(sigma0.block(0, 0))
}

/// Applies the 4×4 map `t` by congruence to modes `m1`, `m2` of `mat`.
fn apply_two_mode(mat: &mut Mat<f64>, m1: usize, m2: usize, t: &[[f64; 4]; 4]) {
    let idx = [2 * m1, 2 * m1 + 1, 2 * m2, 2 * m2 + 1];
    let n = mat.nrows();
    let mut buf = [0.0; 4];
    for c in 0..n {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = (0..4).map(|k| t[i][k] * mat[(idx[k], c)]).sum();
        }
        for (i, b) in buf.iter().enumerate() {
            mat[(idx[i], c)] = *b;
        }
    }
    for r in 0..n {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = (0..4).map(|k| t[i][k] * mat[(r, idx[k])]).sum();
        }
        for (i, b) in buf.iter().enumerate() {
            mat[(r, idx[i])] = *b;
        }
    }
}

/// Applies the 2×2 map `t` by congruence to mode `m` of `mat`.
fn apply_one_mode(mat: &mut Mat<f64>, m: usize, t: &Mat2) {
    let (i0, i1) = (2 * m, 2 * m + 1);
    for c in 0..mat.ncols() {
        let (x, y) = (mat[(i0, c)], mat[(i1, c)]);
        mat[(i0, c)] = t[0][0] * x + t[0][1] * y;
        mat[(i1, c)] = t[1][0] * x + t[1][1] * y;
    }
    for r in 0..mat.nrows() {
        let (x, y) = (mat[(r, i0)], mat[(r, i1)]);
        mat[(r, i0)] = t[0][0] * x + t[0][1] * y;
        mat[(r, i1)] = t[1][0] * x + t[1][1] * y;
    }
}

/// Full joint covariance over `(A, bin₁, …, bin_n)` after `n_steps`
/// collisions, in the rotating frame.
pub fn simulate_collisions(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    config: &CollisionConfig,
) -> Result<CovarianceMatrix> {
    simulate_collisions_observed(model, sigma0, config, |_, _| {})
}

/// As [`simulate_collisions`], calling `observe(step, joint)` after every
/// step with the lab-frame joint covariance (identical to the rotating-frame
/// one when there is no detuning).
pub fn simulate_collisions_observed(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    config: &CollisionConfig,
    mut observe: impl FnMut(usize, &Mat<f64>),
) -> Result<CovarianceMatrix> {
    let p0 = single_mode(sigma0)?;
    let n = config.n_steps;
    if n > config.max_steps {
        return Err(Error::MemoryGuard {
            requested: n,
            limit: config.max_steps,
        });
    }
    let mut joint = Mat::<f64>::identity(2 * (n + 1), 2 * (n + 1));
    for i in 0..2 {
        for j in 0..2 {
            joint[(i, j)] = p0[i][j];
        }
    }
    let step = Collision::new(model, config.theta).matrix();
    let phi = config.detuning.map(|w| w * config.dt);
    for j in 1..=n {
        if let Some(phi) = phi {
            apply_one_mode(&mut joint, 0, &rotation(phi));
        }
        apply_two_mode(&mut joint, 0, j, &step);
        observe(j, &joint);
    }
    if let Some(phi) = phi {
        apply_one_mode(&mut joint, 0, &rotation(-phi * n as f64));
        for j in 1..=n {
            apply_one_mode(&mut joint, j, &bin_derotation(model, phi * j as f64));
        }
    }
    CovarianceMatrix::new(joint)
}

/// Bin range `[first, last)` (0-based) covered by a window.
fn window_bins(basis: &WindowBasis, dt: f64, n_steps: usize) -> Result<(usize, usize)> {
    let w = &basis.window;
    let misaligned = || Error::Alignment {
        t1: w.start(),
        t2: w.end(),
        dt,
    };
    let first = bin_edge(w.start(), dt).ok_or_else(misaligned)?;
    let last = bin_edge(w.end(), dt).ok_or_else(misaligned)?;
    if last > n_steps {
        return Err(Error::Domain(format!(
            "window ends at {} past the simulated horizon {}",
            w.end(),
            n_steps as f64 * dt
        )));
    }
    if basis.len() > last - first {
        return Err(Error::Domain(format!(
            "{} cosine modes cannot be resolved by {} bins",
            basis.len(),
            last - first
        )));
    }
    Ok((first, last))
}

/// Discrete windowed cosine weights `u_k(t_j)·√dt` for every bin of a window.
fn bin_weights(basis: &WindowBasis, dt: f64, first: usize, last: usize) -> Vec<Vec<f64>> {
    let root = dt.sqrt();
    (first..last)
        .map(|i| {
            let mut w = vec![0.0; basis.len()];
            basis.eval_all((i as f64 + 0.5) * dt, &mut w);
            w.iter_mut().for_each(|x| *x *= root);
            w
        })
        .collect()
}

/// Maps a joint `(A, bins…)` covariance from [`simulate_collisions`] onto
/// the cosine modes of each window, giving `(window modes…, A)`.
pub fn windowed_transform_bins(
    joint: &CovarianceMatrix,
    dt: f64,
    windows: &[WindowBasis],
) -> Result<CovarianceMatrix> {
    let n_steps = joint.n_modes() - 1;
    let out_modes: usize = windows.iter().map(WindowBasis::len).sum::<usize>() + 1;
    let mut w = Mat::<f64>::zeros(2 * out_modes, joint.dim());
    let mut row = 0;
    for basis in windows {
        let (first, last) = window_bins(basis, dt, n_steps)?;
        for (offset, weights) in bin_weights(basis, dt, first, last).iter().enumerate() {
            let bin = first + offset + 1;
            for (k, wk) in weights.iter().enumerate() {
                w[(2 * (row + k), 2 * bin)] = *wk;
                w[(2 * (row + k) + 1, 2 * bin + 1)] = *wk;
            }
        }
        row += basis.len();
    }
    w[(2 * row, 0)] = 1.0;
    w[(2 * row + 1, 1)] = 1.0;
    let out = &w * joint.as_mat() * w.transpose();
    CovarianceMatrix::new(out)
}

/// Runs the collision model while folding each frozen bin straight into the
/// cosine modes of the windows, so memory is quadratic in the mode count
/// rather than in the step count. Returns `(window modes…, A)` with A read
/// out after the last step.
pub fn simulate_windowed(
    model: ModelKind,
    sigma0: &CovarianceMatrix,
    config: &CollisionConfig,
    windows: &[WindowBasis],
) -> Result<CovarianceMatrix> {
    let mut p = single_mode(sigma0)?;
    let dt = config.dt;
    let n = config.n_steps;

    // per bin: list of (first output mode, weights)
    let mut schedule: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); n];
    let mut offset = 0;
    for basis in windows {
        let (first, last) = window_bins(basis, dt, n)?;
        for (i, weights) in bin_weights(basis, dt, first, last).into_iter().enumerate() {
            schedule[first + i].push((offset, weights));
        }
        offset += basis.len();
    }
    let modes = offset;
    let d = 2 * modes;
    // q[r] = Cov(Z_r, A); r[(i, j)] = Cov(Z_i, Z_j). The modes start empty
    // and pick up their vacuum share bin by bin.
    let mut q = vec![[0.0f64; 2]; d];
    let mut r = vec![0.0f64; d * d];

    let base = Collision::new(model, config.theta);
    let phi = config.detuning.map(|w| w * dt);
    let mut w = vec![0.0f64; modes];
    let mut active = Vec::with_capacity(d);
    for (j, slots) in schedule.iter().enumerate() {
        let step = j + 1;
        if let Some(phi) = phi {
            let rot = rotation(phi);
            p = sandwich(&rot, &p, &rot);
            for row in q.iter_mut() {
                let v = *row;
                row[0] = rot[0][0] * v[0] + rot[0][1] * v[1];
                row[1] = rot[1][0] * v[0] + rot[1][1] * v[1];
            }
        }
        let mut c = base;
        if let Some(phi) = phi {
            let back = bin_derotation(model, phi * step as f64);
            c.ba = mul(&back, &c.ba);
            c.bb = mul(&back, &c.bb);
        }

        // Cov(b', A'), Cov(b', b') and Cov(Z, b') before the update
        let cross = add(&sandwich(&c.ba, &p, &c.aa), &mul(&c.bb, &transpose(&c.ab)));
        let g = add(&sandwich(&c.ba, &p, &c.ba), &mul(&c.bb, &transpose(&c.bb)));
        let h: Vec<[f64; 2]> = q
            .iter()
            .map(|v| {
                [
                    v[0] * c.ba[0][0] + v[1] * c.ba[0][1],
                    v[0] * c.ba[1][0] + v[1] * c.ba[1][1],
                ]
            })
            .collect();

        w.iter_mut().for_each(|x| *x = 0.0);
        active.clear();
        for (start, weights) in slots {
            for (k, wk) in weights.iter().enumerate() {
                w[start + k] = *wk;
                active.push(2 * (start + k));
                active.push(2 * (start + k) + 1);
            }
        }

        // R += H·Wᵀ + W·Hᵀ + W·G·Wᵀ, where W maps b' onto the active modes
        for &col in &active {
            let (mc, beta) = (col / 2, col % 2);
            let wc = w[mc];
            for row in 0..d {
                r[row * d + col] += h[row][beta] * wc;
            }
        }
        for &row in &active {
            let (mr, alpha) = (row / 2, row % 2);
            let wr = w[mr];
            for col in 0..d {
                r[row * d + col] += wr * h[col][alpha];
            }
            for &col in &active {
                let (mc, beta) = (col / 2, col % 2);
                r[row * d + col] += wr * w[mc] * g[alpha][beta];
            }
        }

        for (row, v) in q.iter_mut().enumerate() {
            let old = *v;
            for beta in 0..2 {
                v[beta] = old[0] * c.aa[beta][0] + old[1] * c.aa[beta][1];
            }
            let wr = w[row / 2];
            if wr != 0.0 {
                let alpha = row % 2;
                v[0] += wr * cross[alpha][0];
                v[1] += wr * cross[alpha][1];
            }
        }
        p = add(&sandwich(&c.aa, &p, &c.aa), &mul(&c.ab, &transpose(&c.ab)));
    }
    if let Some(phi) = phi {
        let back = rotation(-phi * n as f64);
        p = sandwich(&back, &p, &back);
        for row in q.iter_mut() {
            let v = *row;
            row[0] = back[0][0] * v[0] + back[0][1] * v[1];
            row[1] = back[1][0] * v[0] + back[1][1] * v[1];
        }
    }

    let dim = d + 2;
    let out = Mat::from_fn(dim, dim, |i, j| match (i < d, j < d) {
        (true, true) => r[i * d + j],
        (true, false) => q[i][j - d],
        (false, true) => q[j][i - d],
        (false, false) => p[i - d][j - d],
    });
    CovarianceMatrix::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `max |a − b| / max(1, scale)`
    pub max_deviation: f64,
    /// Row and column of the worst entry.
    pub index: (usize, usize),
}

/// Largest entrywise deviation between two covariances, relative to
/// `max(1, scale)`.
pub fn compare_covariances(
    analytic: &CovarianceMatrix,
    oracle: &CovarianceMatrix,
    scale: f64,
) -> Result<ComparisonReport> {
    if analytic.dim() != oracle.dim() {
        return Err(Error::Dimension(format!(
            "cannot compare {0}x{0} with {1}x{1}",
            analytic.dim(),
            oracle.dim()
        )));
    }
    let norm = scale.max(1.0);
    let mut report = ComparisonReport {
        max_deviation: 0.0,
        index: (0, 0),
    };
    for i in 0..analytic.dim() {
        for j in 0..analytic.dim() {
            let dev = (analytic.get(i, j) - oracle.get(i, j)).abs() / norm;
            if dev > report.max_deviation {
                report = ComparisonReport {
                    max_deviation: dev,
                    index: (i, j),
                };
            }
        }
    }
    Ok(report)
}

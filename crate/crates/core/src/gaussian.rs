//! Symplectic linear algebra over Gaussian covariance matrices.
//!
//! Covariances hold the symmetrized quadrature second moments
//! `½⟨{X_a, X_b}⟩` with the vacuum normalized to the identity. Quadratures are
//! interleaved: mode `m` occupies rows and columns `2m` (X1) and `2m + 1` (X2).
//! The symplectic eigenvalues of a physical state are all `≥ 1`; a pure mode
//! has eigenvalue exactly 1.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Default slack below 1 tolerated on symplectic eigenvalues before a state
/// is declared unphysical.
pub const VALIDITY_TOL: f64 = 1e-6;

/// Relative asymmetry accepted by [`CovarianceMatrix::is_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative mismatch allowed between the two singular values of `R·Ω·R`
/// that make up one symplectic eigenvalue.
pub const PAIRING_TOL: f64 = 1e-8;

/// Below this mean occupation a mode contributes exactly zero entropy.
const OCCUPATION_FLOOR: f64 = 1e-12;

/// A 2×2 block, row-major.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
pub const ZERO2: Mat2 = [[0.0, 0.0], [0.0, 0.0]];

/// Covariance matrix of an `M`-mode Gaussian state, stored as a dense
/// `2M × 2M` matrix.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    n_modes: usize,
    entries: Mat<f64>,
}

impl CovarianceMatrix {
    /// Wraps a dense matrix. Only the shape is checked here; symmetry and
    /// physicality are reported by [`validate_covariance`].
    pub fn new(entries: Mat<f64>) -> Result<Self> {
        let (rows, cols) = (entries.nrows(), entries.ncols());
        if rows != cols {
            return Err(Error::Dimension(format!("matrix is {rows}×{cols}, not square")));
        }
        if rows == 0 || rows % 2 != 0 {
            return Err(Error::Dimension(format!(
                "dimension {rows} is not a positive even number"
            )));
        }
        Ok(Self {
            n_modes: rows / 2,
            entries,
        })
    }

    pub fn from_fn(n_modes: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(Mat::from_fn(2 * n_modes, 2 * n_modes, f))
    }

    pub fn from_row_major(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {dim}×{dim} matrix",
                values.len()
            )));
        }
        Self::new(Mat::from_fn(dim, dim, |i, j| values[i * dim + j]))
    }

    /// The `n_modes`-mode vacuum.
    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            entries: Mat::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        Self::new(Mat::from_fn(dim, dim, |i, j| if i == j { values[i] } else { 0.0 }))
    }

    pub fn single_mode(block: Mat2) -> Self {
        Self {
            n_modes: 1,
            entries: Mat::from_fn(2, 2, |i, j| block[i][j]),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// The 2×2 block coupling modes `m` and `n`.
    pub fn block(&self, m: usize, n: usize) -> Mat2 {
        let e = &self.entries;
        [
            [e[(2 * m, 2 * n)], e[(2 * m, 2 * n + 1)]],
            [e[(2 * m + 1, 2 * n)], e[(2 * m + 1, 2 * n + 1)]],
        ]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.entries
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        let mut max = 0.0_f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                max = max.max(self.entries[(i, j)].abs());
            }
        }
        max
    }

    /// `max |σ_ij − σ_ji|` relative to the largest entry magnitude.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self) -> bool {
        self.relative_asymmetry() <= SYMMETRY_TOL
    }

    /// Determinant of a single-mode covariance.
    pub fn det2(&self) -> Option<f64> {
        (self.n_modes == 1).then(|| {
            let b = self.block(0, 0);
            b[0][0] * b[1][1] - b[0][1] * b[1][0]
        })
    }

    /// `S·σ·Sᵀ`.
    pub fn congruence(&self, transform: MatRef<'_, f64>) -> Result<Self> {
        if transform.nrows() != self.dim() || transform.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "transform is {}×{}, covariance is {}×{}",
                transform.nrows(),
                transform.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        let product = transform * self.entries.as_ref() * transform.transpose();
        Self::new(product)
    }
}

/// The canonical symplectic form `Ω = ⊕ [[0, 1], [−1, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix(&self) -> Mat<f64> {
        let dim = 2 * self.n_modes;
        Mat::from_fn(dim, dim, |i, j| {
            if i / 2 != j / 2 {
                0.0
            } else if i % 2 == 0 && j == i + 1 {
                1.0
            } else if i % 2 == 1 && j + 1 == i {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// `Ω·A` without forming `Ω`: rows `2m` and `2m + 1` become `A[2m+1]`
    /// and `−A[2m]`.
    pub fn apply_left(&self, a: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
            if i % 2 == 0 {
                a[(i + 1, j)]
            } else {
                -a[(i - 1, j)]
            }
        })
    }
}

/// Symplectic eigenvalues sorted in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticSpectrum {
    values: Vec<f64>,
}

impl SymplecticSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(1.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// Number of eigenvalues strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&s| s > threshold).count()
    }

    /// Values clipped up to exactly 1 when they lie within `tol` below it.
    pub fn clipped(&self, tol: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&s| {
                if s < 1.0 - tol || !s.is_finite() {
                    Err(Error::Unphysical { value: s })
                } else {
                    Ok(s.max(1.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityReport {
    pub is_symmetric: bool,
    pub min_symplectic_eigenvalue: f64,
    pub is_physical: bool,
}

/// Checks symmetry and the uncertainty bound `s_ℓ ≥ 1 − tol`.
///
/// A matrix that is not positive definite cannot be a covariance; it is
/// reported with `min_symplectic_eigenvalue = 0`.
pub fn validate_covariance(sigma: &CovarianceMatrix, tol: f64) -> Result<ValidityReport> {
    let is_symmetric = sigma.is_symmetric();
    let min = if is_symmetric {
        match williamson_spectrum(sigma) {
            Ok(spectrum) => spectrum.min(),
            Err(Error::NotPositiveDefinite { .. }) => 0.0,
            Err(e) => return Err(e),
        }
    } else {
        f64::NAN
    };
    Ok(ValidityReport {
        is_symmetric,
        min_symplectic_eigenvalue: min,
        is_physical: is_symmetric && min >= 1.0 - tol,
    })
}

fn symmetric_part(a: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn ensure_symmetric(sigma: &CovarianceMatrix) -> Result<()> {
    let asym = sigma.relative_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// The symmetric positive-definite square root `R` with `R·R = σ`.
pub fn symmetric_sqrt(sigma: &CovarianceMatrix) -> Result<Mat<f64>> {
    ensure_symmetric(sigma)?;
    let sym = symmetric_part(sigma.as_mat());
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let lambda = eig.S().column_vector();
    let v = eig.U();
    // ascending order: the first eigenvalue is the smallest
    if lambda[0] <= 0.0 || !lambda[0].is_finite() {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: lambda[0],
        });
    }
    let n = sym.nrows();
    let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * lambda[j].sqrt());
    let root = &scaled * v.transpose();
    Ok(symmetric_part(root.as_ref()))
}

/// Applies the local squeezer `diag(1/λ_m, λ_m)` to every mode so that the
/// two diagonal entries of each mode become equal. The transform is
/// symplectic, so the spectrum is unchanged, but squeezed inputs with entries
/// like `e^{±10}` lose their artificial ill-conditioning.
fn balance_modes(sigma: &CovarianceMatrix) -> CovarianceMatrix {
    let e = sigma.as_mat();
    let scale: Vec<f64> = (0..sigma.dim())
        .map(|i| {
            let m = i / 2;
            let (x1, x2) = (e[(2 * m, 2 * m)], e[(2 * m + 1, 2 * m + 1)]);
            let lambda = if x1 > 0.0 && x2 > 0.0 {
                (x1 / x2).powf(0.25)
            } else {
                1.0
            };
            if i % 2 == 0 {
                1.0 / lambda
            } else {
                lambda
            }
        })
        .collect();
    let dim = sigma.dim();
    CovarianceMatrix {
        n_modes: sigma.n_modes(),
        entries: Mat::from_fn(dim, dim, |i, j| e[(i, j)] * scale[i] * scale[j]),
    }
}

/// Symplectic eigenvalues via the singular values of `K = R·Ω·R`,
/// `R = √σ`. `K` is antisymmetric and similar to `Ω·σ`, so its singular
/// values come in equal pairs `s_ℓ, s_ℓ`.
pub fn williamson_spectrum(sigma: &CovarianceMatrix) -> Result<SymplecticSpectrum> {
    ensure_symmetric(sigma)?;
    let root = symmetric_sqrt(&balance_modes(sigma))?;
    let omega = SymplecticForm::new(sigma.n_modes());
    let k = root.as_ref() * omega.apply_left(root.as_ref());
    let singular = k
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let mut values = Vec::with_capacity(sigma.n_modes());
    for pair in singular.chunks_exact(2) {
        let (first, second) = (pair[0], pair[1]);
        if (first - second).abs() > PAIRING_TOL * first.max(f64::MIN_POSITIVE) {
            return Err(Error::Degenerate { first, second });
        }
        values.push(0.5 * (first + second));
    }
    Ok(SymplecticSpectrum::new(values))
}

/// Von Neumann entropy (nats) of one mode with symplectic eigenvalue
/// `s ≥ 1`: `(n+1)·ln(n+1) − n·ln n` with `n = (s − 1)/2`.
pub fn mode_entropy(s: f64) -> f64 {
    let n = 0.5 * (s - 1.0);
    if n < OCCUPATION_FLOOR {
        return 0.0;
    }
    (n + 1.0) * n.ln_1p() - n * n.ln()
}

/// Sum of [`mode_entropy`] over a spectrum, after clipping values within
/// `validity_tol` below 1 up to 1.
pub fn entropy_from_spectrum(spectrum: &SymplecticSpectrum, validity_tol: f64) -> Result<f64> {
    let clipped = spectrum.clipped(validity_tol)?;
    Ok(clipped.values().iter().map(|&s| mode_entropy(s)).sum())
}

/// Convenience: Williamson spectrum followed by the entropy sum.
pub fn entropy(sigma: &CovarianceMatrix, validity_tol: f64) -> Result<f64> {
    entropy_from_spectrum(&williamson_spectrum(sigma)?, validity_tol)
}

/// Reduced state on `modes`, in the order given.
pub fn extract_subsystem(sigma: &CovarianceMatrix, modes: &[usize]) -> Result<CovarianceMatrix> {
    if modes.is_empty() {
        return Err(Error::Dimension("empty mode selection".into()));
    }
    let mut seen = vec![false; sigma.n_modes()];
    for &m in modes {
        if m >= sigma.n_modes() {
            return Err(Error::Index {
                index: m,
                reason: "out of range",
            });
        }
        if std::mem::replace(&mut seen[m], true) {
            return Err(Error::Index {
                index: m,
                reason: "selected twice",
            });
        }
    }
    let src = sigma.as_mat();
    let dim = 2 * modes.len();
    CovarianceMatrix::new(Mat::from_fn(dim, dim, |i, j| {
        src[(2 * modes[i / 2] + i % 2, 2 * modes[j / 2] + j % 2)]
    }))
}

/// Elementary symplectic transformations on `n_modes` modes, for building
/// test states and checking invariance.
pub mod symplectic {
    use faer::Mat;

    fn embed(n_modes: usize, modes: &[usize], local: &[f64]) -> Mat<f64> {
        let k = 2 * modes.len();
        debug_assert_eq!(local.len(), k * k);
        let mut s = Mat::identity(2 * n_modes, 2 * n_modes);
        let index = |l: usize| 2 * modes[l / 2] + l % 2;
        for a in 0..k {
            for b in 0..k {
                s[(index(a), index(b))] = local[a * k + b];
            }
        }
        s
    }

    /// `diag(e^{−r}, e^{r})` on one mode.
    pub fn squeezer(n_modes: usize, mode: usize, r: f64) -> Mat<f64> {
        embed(n_modes, &[mode], &[(-r).exp(), 0.0, 0.0, r.exp()])
    }

    /// Phase-space rotation by `phi` on one mode.
    pub fn rotation(n_modes: usize, mode: usize, phi: f64) -> Mat<f64> {
        let (s, c) = phi.sin_cos();
        embed(n_modes, &[mode], &[c, s, -s, c])
    }

    /// Beam splitter with mixing angle `theta` between modes `i` and `j`.
    pub fn beam_splitter(n_modes: usize, i: usize, j: usize, theta: f64) -> Mat<f64> {
        let (s, c) = theta.sin_cos();
        #[rustfmt::skip]
        let local = [
            c, 0.0, -s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, s, 0.0, c,
        ];
        embed(n_modes, &[i, j], &local)
    }

    /// Two-mode squeezer `a → ch·a + sh·b†`, `b → ch·b + sh·a†`.
    pub fn two_mode_squeezer(n_modes: usize, i: usize, j: usize, r: f64) -> Mat<f64> {
        let (ch, sh) = (r.cosh(), r.sinh());
        #[rustfmt::skip]
        let local = [
            ch, 0.0, sh, 0.0,
            0.0, ch, 0.0, -sh,
            sh, 0.0, ch, 0.0,
            0.0, -sh, 0.0, ch,
        ];
        embed(n_modes, &[i, j], &local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn vacuum_is_physical() {
        let report = validate_covariance(&CovarianceMatrix::identity(1), VALIDITY_TOL).unwrap();
        assert!(report.is_symmetric && report.is_physical);
        assert!(close(report.min_symplectic_eigenvalue, 1.0, 1e-14));
    }

    #[test]
    fn sub_vacuum_noise_is_unphysical() {
        let sigma = CovarianceMatrix::diagonal(&[0.5, 0.5]).unwrap();
        let report = validate_covariance(&sigma, VALIDITY_TOL).unwrap();
        assert!(!report.is_physical);
        assert!(close(report.min_symplectic_eigenvalue, 0.5, 1e-14));
    }

    #[test]
    fn strongly_squeezed_vacuum_is_pure() {
        let sigma = CovarianceMatrix::diagonal(&[10f64.exp(), (-10f64).exp()]).unwrap();
        let report = validate_covariance(&sigma, VALIDITY_TOL).unwrap();
        assert!(report.is_physical);
        assert!(close(report.min_symplectic_eigenvalue, 1.0, 1e-12));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            CovarianceMatrix::new(Mat::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            CovarianceMatrix::new(Mat::identity(3, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            CovarianceMatrix::from_row_major(2, &[1.0, 0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn asymmetric_input_is_flagged() {
        let sigma = CovarianceMatrix::from_row_major(2, &[2.0, 0.5, 0.0, 2.0]).unwrap();
        let report = validate_covariance(&sigma, VALIDITY_TOL).unwrap();
        assert!(!report.is_symmetric && !report.is_physical);
        assert!(matches!(williamson_spectrum(&sigma), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn indefinite_matrix_is_unphysical() {
        let sigma = CovarianceMatrix::diagonal(&[1.0, -1.0]).unwrap();
        assert!(matches!(
            symmetric_sqrt(&sigma),
            Err(Error::NotPositiveDefinite { eigenvalue }) if eigenvalue == -1.0
        ));
        let report = validate_covariance(&sigma, VALIDITY_TOL).unwrap();
        assert!(!report.is_physical);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let root = symmetric_sqrt(&CovarianceMatrix::diagonal(&[4.0, 9.0]).unwrap()).unwrap();
        assert!(close(root[(0, 0)], 2.0, 1e-14));
        assert!(close(root[(1, 1)], 3.0, 1e-14));
        assert!(root[(0, 1)].abs() < 1e-14);
        let id = symmetric_sqrt(&CovarianceMatrix::identity(2)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((id[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectrum_anchors() {
        for m in 1..4 {
            let spec = williamson_spectrum(&CovarianceMatrix::identity(m)).unwrap();
            assert_eq!(spec.n_modes(), m);
            assert!(spec.values().iter().all(|&s| close(s, 1.0, 1e-12)));
        }
        let r = 1.7_f64;
        let squeezed =
            CovarianceMatrix::diagonal(&[(2.0 * r).exp(), (-2.0 * r).exp()]).unwrap();
        assert!(close(williamson_spectrum(&squeezed).unwrap().values()[0], 1.0, 1e-12));
        let thermal = CovarianceMatrix::diagonal(&[3.0, 3.0]).unwrap();
        assert!(close(williamson_spectrum(&thermal).unwrap().values()[0], 3.0, 1e-12));
    }

    #[test]
    fn entropy_anchors() {
        let ln2 = std::f64::consts::LN_2;
        let e = |v: &[f64]| {
            entropy_from_spectrum(&SymplecticSpectrum::new(v.to_vec()), VALIDITY_TOL).unwrap()
        };
        assert_eq!(e(&[1.0]), 0.0);
        assert!((e(&[3.0]) - 2.0 * ln2).abs() < 1e-12);
        assert!((e(&[3.0, 3.0]) - 4.0 * ln2).abs() < 1e-12);
        // clipping just below 1
        assert_eq!(e(&[1.0 - 0.5 * VALIDITY_TOL]), 0.0);
        assert!(matches!(
            entropy_from_spectrum(&SymplecticSpectrum::new(vec![0.9]), VALIDITY_TOL),
            Err(Error::Unphysical { .. })
        ));
    }

    #[test]
    fn subsystem_extraction() {
        let sigma = CovarianceMatrix::from_fn(3, |i, j| if i == j { 2.0 + i as f64 } else { 0.1 })
            .unwrap();
        let all = extract_subsystem(&sigma, &[0, 1, 2]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(all.get(i, j), sigma.get(i, j));
            }
        }
        let swapped = extract_subsystem(&sigma, &[2, 0]).unwrap();
        assert_eq!(swapped.block(0, 0), sigma.block(2, 2));
        assert_eq!(swapped.block(0, 1), sigma.block(2, 0));
        let one = extract_subsystem(&CovarianceMatrix::identity(2), &[0]).unwrap();
        assert_eq!(one.block(0, 0), IDENTITY2);
        assert!(matches!(
            extract_subsystem(&sigma, &[0, 0]),
            Err(Error::Index { index: 0, .. })
        ));
        assert!(matches!(
            extract_subsystem(&sigma, &[3]),
            Err(Error::Index { index: 3, .. })
        ));
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        let omega = SymplecticForm::new(3).matrix();
        let sq = &omega * &omega;
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(omega[(i, j)], -omega[(j, i)]);
                assert_eq!(sq[(i, j)], if i == j { -1.0 } else { 0.0 });
            }
        }
        let applied = SymplecticForm::new(3).apply_left(Mat::<f64>::identity(6, 6).as_ref());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(applied[(i, j)], omega[(i, j)]);
            }
        }
    }
}

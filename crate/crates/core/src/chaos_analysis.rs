//! Exact second-chaos functionals of the quadratic estimator error, as
//! finite-grid trace formulas. No Monte Carlo here.
//!
//! The centered quadratic functional `F = dB' H dB - tr(HC)` built from a
//! symmetric kernel matrix `H` and the increment covariance `C` lives in
//! the second Wiener chaos. With `M = HC`, everything about its law is a
//! trace: `E F^2 = 2 tr(M^2)`, the fourth cumulant is `48 tr(M^4)`, and
//! the fourth-moment normality criterion reduces to the dimensionless
//! ratio `tr(M^4) / tr(M^2)^2`, which for a standardized F is
//! proportional (by a fixed universal constant) to the variance of the
//! Malliavin-derivative norm. Tests compare only ratios of gaps, which
//! are constant-free.
//!
//! Quadrature convention, owned here on behalf of the estimator as well:
//! cell increments already carry the measure of their cell, so the kernel
//! matrix holds plain midpoint kernel values and no cell-area weight.
//! The only place an area factor appears is the outer Riemann sum of
//! [`mean_denominator`].
//!
//! `C = cov_t (x) cov_s` is never materialized: rows of `H` are reshaped
//! to the cell grid and contracted with the two axis factors separately.
//! The dense `(n^2) x (n^2)` trace work grows like the cube of the cell
//! count; [`MAX_CHAOS_CELLS`] marks where it leaves the seconds range,
//! and callers that enforce a budget should refuse beyond it.

use crate::fbs_sim::{GridSpec, HurstPair, IncrementCovariance};
use crate::ou_sheet::DriftParam;
use crate::specfun::{self, BesselConfig};
use ndarray::Array2;
use thiserror::Error;

/// Advisory cap on cells per axis: past this the dense trace
/// computations take more than a few seconds.
pub const MAX_CHAOS_CELLS: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum ChaosError {
    #[error("theta = 0 is not meaningful for chaos diagnostics")]
    ZeroTheta,
    #[error("covariance factor shaped {got:?} does not match the kernel grid's {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("scaling laws need both Hurst indices in (1/2, 5/8), got ({alpha}, {beta})")]
    OutOfRegime { alpha: f64, beta: f64 },
    #[error("scaling normalization needs horizons > 1, got ({0}, {1})")]
    HorizonTooSmall(f64, f64),
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("kernel-covariance product has zero variance")]
    ZeroVariance,
}

/// Symmetrized kernel matrix over flattened cell pairs: entry `[c, c']`
/// is `(f(m_c; m_c') + f(m_c'; m_c)) / 2` with `f` the solution kernel
/// and `m_c` the midpoint of cell `c`. Nonzero only where one midpoint
/// dominates the other componentwise; diagonal entries are exactly 1.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    values: Array2<f64>,
    grid: GridSpec,
}

impl KernelMatrix {
    /// Wraps raw values without recomputing them; callers own the
    /// symmetrization and indexing conventions. Intended for probing
    /// the trace diagnostics with hand-built or degenerate kernels.
    pub fn from_values(values: Array2<f64>, grid: GridSpec) -> Self {
        KernelMatrix { values, grid }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

/// Distributional summary of the quadratic functional on one grid.
/// `scaled_sigma2` is populated by [`scaled_variance`], which needs the
/// Hurst pair and an epsilon that the trace computation itself does not.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosDiagnostics {
    pub sigma2: f64,
    pub kappa4: f64,
    pub normality_gap: f64,
    pub scaled_sigma2: Option<f64>,
    pub horizon: (f64, f64),
}

fn check_theta(theta: &DriftParam) -> Result<(), ChaosError> {
    if theta.theta() == 0.0 {
        return Err(ChaosError::ZeroTheta);
    }
    Ok(())
}

fn check_cov(cov: &IncrementCovariance, grid: &GridSpec) -> Result<(), ChaosError> {
    let (nt, ns) = (grid.cells_t(), grid.cells_s());
    if cov.cov_t.dim() != (nt, nt) {
        return Err(ChaosError::DimensionMismatch { expected: (nt, nt), got: cov.cov_t.dim() });
    }
    if cov.cov_s.dim() != (ns, ns) {
        return Err(ChaosError::DimensionMismatch { expected: (ns, ns), got: cov.cov_s.dim() });
    }
    Ok(())
}

fn check_scaling_inputs(hurst: &HurstPair, horizon: (f64, f64), epsilon: f64) -> Result<(), ChaosError> {
    if !hurst.theorem_regime() {
        return Err(ChaosError::OutOfRegime { alpha: hurst.alpha(), beta: hurst.beta() });
    }
    if !(horizon.0 > 1.0 && horizon.1 > 1.0) {
        return Err(ChaosError::HorizonTooSmall(horizon.0, horizon.1));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(ChaosError::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Kernel values between cell midpoints depend only on the index gaps;
/// entry `[dt][ds]` is `J0(2 sqrt(theta * dt * h_t * ds * h_s))`.
fn gap_table(grid: &GridSpec, theta: &DriftParam) -> Array2<f64> {
    let cfg = BesselConfig::default();
    Array2::from_shape_fn((grid.cells_t(), grid.cells_s()), |(dt, ds)| {
        let arg = 2.0 * (theta.theta() * dt as f64 * grid.h_t() * ds as f64 * grid.h_s()).sqrt();
        specfun::j0(arg, &cfg).expect("kernel argument is finite and nonnegative")
    })
}

/// Builds the symmetrized midpoint kernel matrix for the given grid and
/// drift. Cells flatten row-major, `(i, j) -> i * cells_s + j`, the same
/// convention as `SheetIncrements::flattened`.
pub fn kernel_matrix(grid: &GridSpec, theta: &DriftParam) -> Result<KernelMatrix, ChaosError> {
    check_theta(theta)?;
    let (nt, ns) = (grid.cells_t(), grid.cells_s());
    let tab = gap_table(grid, theta);
    let n = nt * ns;
    let mut h = Array2::<f64>::zeros((n, n));
    for i in 0..nt {
        for j in 0..ns {
            let c1 = i * ns + j;
            for k in 0..nt {
                for l in 0..ns {
                    let c2 = k * ns + l;
                    let mut v = 0.0;
                    if k <= i && l <= j {
                        v += 0.5 * tab[[i - k, j - l]];
                    }
                    if i <= k && j <= l {
                        v += 0.5 * tab[[k - i, l - j]];
                    }
                    h[[c1, c2]] = v;
                }
            }
        }
    }
    Ok(KernelMatrix { values: h, grid: *grid })
}

/// `M = H (cov_t (x) cov_s)` without forming the Kronecker product: row
/// `r` reshaped to the cell grid maps to `cov_t * H_r * cov_s` (the
/// factors are symmetric, so no transposes appear).
fn kron_right_multiply(h: &Array2<f64>, grid: &GridSpec, cov: &IncrementCovariance) -> Array2<f64> {
    let (nt, ns) = (grid.cells_t(), grid.cells_s());
    let n = nt * ns;
    let mut out = Array2::<f64>::zeros((n, n));
    for r in 0..n {
        let hr = h.row(r).into_shape_with_order((nt, ns)).expect("row reshapes to cell grid");
        let mr = cov.cov_t.dot(&hr).dot(&cov.cov_s);
        out.row_mut(r).assign(&mr.into_shape_with_order(n).expect("cell grid reshapes to row"));
    }
    out
}

/// `tr(A^2)` for square `A`, as the elementwise sum of `A` against its
/// transpose.
fn trace_of_square(a: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            acc += a[[r, c]] * a[[c, r]];
        }
    }
    acc
}

/// Variance `E F^2 = 2 tr((HC)^2)` of the centered quadratic functional.
pub fn variance_f(h: &KernelMatrix, cov: &IncrementCovariance) -> Result<f64, ChaosError> {
    check_cov(cov, &h.grid)?;
    let m = kron_right_multiply(&h.values, &h.grid, cov);
    Ok(2.0 * trace_of_square(&m))
}

/// Full trace diagnostics: `sigma2 = 2 tr(M^2)`, `kappa4 = 48 tr(M^4)`,
/// `normality_gap = tr(M^4) / tr(M^2)^2`, with `M = HC`. The gap lies in
/// `(0, 1]`: 1 for a rank-one `M` (a centered chi-square, maximally
/// non-normal), `1/n` for `n` equal eigenvalues (the CLT direction).
pub fn normality_gap(h: &KernelMatrix, cov: &IncrementCovariance) -> Result<ChaosDiagnostics, ChaosError> {
    check_cov(cov, &h.grid)?;
    let m = kron_right_multiply(&h.values, &h.grid, cov);
    let tr2 = trace_of_square(&m);
    if !(tr2 > 0.0) {
        return Err(ChaosError::ZeroVariance);
    }
    let m2 = m.dot(&m);
    let tr4 = trace_of_square(&m2);
    Ok(ChaosDiagnostics {
        sigma2: 2.0 * tr2,
        kappa4: 48.0 * tr4,
        normality_gap: tr4 / (tr2 * tr2),
        scaled_sigma2: None,
        horizon: (h.grid.horizon_t(), h.grid.horizon_s()),
    })
}

/// Applies the horizon normalization to an exact variance: returns
/// `sigma2 * T^{-(4a - 1/2) - 2e} * S^{-(4b - 1/2) - 2e}`, the square of
/// the `T^{-2a + 1/4 - e} S^{-2b + 1/4 - e}` rescaling of F. At `e = 0`
/// this stays bounded as horizons grow; for `e > 0` it tends to 0.
pub fn scaled_variance(
    diag: &ChaosDiagnostics,
    hurst: &HurstPair,
    epsilon: f64,
) -> Result<f64, ChaosError> {
    check_scaling_inputs(hurst, diag.horizon, epsilon)?;
    let (t, s) = diag.horizon;
    let et = -(4.0 * hurst.alpha() - 0.5) - 2.0 * epsilon;
    let es = -(4.0 * hurst.beta() - 0.5) - 2.0 * epsilon;
    Ok(diag.sigma2 * t.powf(et) * s.powf(es))
}

/// Expected denominator of the estimator: the midpoint-rule sum of
/// `E X(m_c)^2` over cells times the cell area, with each node variance
/// an exact quadratic form of the (unsymmetrized) kernel slice for that
/// node against the increment covariance.
pub fn mean_denominator(
    grid: &GridSpec,
    theta: &DriftParam,
    cov: &IncrementCovariance,
) -> Result<f64, ChaosError> {
    check_theta(theta)?;
    check_cov(cov, grid)?;
    let (nt, ns) = (grid.cells_t(), grid.cells_s());
    let tab = gap_table(grid, theta);
    let mut acc = 0.0;
    let mut slice = Array2::<f64>::zeros((nt, ns));
    for i in 0..nt {
        for j in 0..ns {
            slice.fill(0.0);
            for k in 0..=i {
                for l in 0..=j {
                    slice[[k, l]] = tab[[i - k, j - l]];
                }
            }
            let cs = cov.cov_t.dot(&slice).dot(&cov.cov_s);
            let node_var: f64 = slice.iter().zip(cs.iter()).map(|(a, b)| a * b).sum();
            debug_assert!(node_var >= -1e-10, "node variance must be nonnegative");
            acc += node_var;
        }
    }
    Ok(grid.h_t() * grid.h_s() * acc)
}

/// [`mean_denominator`] divided by `T^{2a + 1/2 - e} S^{2b + 1/2 - e}`,
/// the growth rate against which the denominator diverges.
pub fn mean_denominator_normalized(
    grid: &GridSpec,
    theta: &DriftParam,
    cov: &IncrementCovariance,
    hurst: &HurstPair,
    epsilon: f64,
) -> Result<f64, ChaosError> {
    check_scaling_inputs(hurst, (grid.horizon_t(), grid.horizon_s()), epsilon)?;
    let raw = mean_denominator(grid, theta, cov)?;
    let et = 2.0 * hurst.alpha() + 0.5 - epsilon;
    let es = 2.0 * hurst.beta() + 0.5 - epsilon;
    Ok(raw / (grid.horizon_t().powf(et) * grid.horizon_s().powf(es)))
}

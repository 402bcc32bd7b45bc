//! Exact finite-grid simulation of the fractional Brownian sheet.
//!
//! The sheet's covariance factorizes into two one-dimensional fractional
//! Brownian covariances, so the covariance of the rectangular cell
//! increments is a Kronecker product `cov_t (x) cov_s` of two small dense
//! matrices. Sampling reduces to `L_t * G * L_s^T` with `G` a matrix of
//! independent standard normals and `L_t`, `L_s` Cholesky factors; this is
//! exact in distribution, not an approximation.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FbsError {
    #[error("Hurst parameter {name} = {value} outside the open interval (1/2, 1)")]
    HurstOutOfRange { name: &'static str, value: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("covariance arguments must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("Hurst exponent {0} outside the open interval (0, 1)")]
    ExponentOutOfRange(f64),
    #[error("increment covariance factorization failed on the {axis} axis even after diagonal jitter")]
    FactorizationFailure { axis: &'static str },
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("node index ({0}, {1}) outside the grid")]
    NodeOutOfRange(usize, usize),
}

/// The Hurst exponent pair `(alpha, beta)` of the sheet.
///
/// Simulation requires both in `(1/2, 1)`. The asymptotic statements about
/// the drift estimator additionally require both in `(1/2, 5/8)`, exposed
/// here as [`HurstPair::theorem_regime`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstPair {
    alpha: f64,
    beta: f64,
}

impl HurstPair {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, FbsError> {
        if !(alpha > 0.5 && alpha < 1.0) || !alpha.is_finite() {
            return Err(FbsError::HurstOutOfRange { name: "alpha", value: alpha });
        }
        if !(beta > 0.5 && beta < 1.0) || !beta.is_finite() {
            return Err(FbsError::HurstOutOfRange { name: "beta", value: beta });
        }
        Ok(HurstPair { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True iff both exponents lie in `(1/2, 5/8)`, the regime in which the
    /// variance-scaling, finiteness, and consistency statements hold.
    pub fn theorem_regime(&self) -> bool {
        self.alpha < 0.625 && self.beta < 0.625
    }

    /// `c(alpha) = alpha * (2 alpha - 1)`, the weight constant of the
    /// inner-product representation; positive throughout the valid range.
    pub fn c_alpha(&self) -> f64 {
        self.alpha * (2.0 * self.alpha - 1.0)
    }

    pub fn c_beta(&self) -> f64 {
        self.beta * (2.0 * self.beta - 1.0)
    }
}

/// Uniform rectangular grid on `[0, T] x [0, S]`.
///
/// Nodes are `(i * h_t, j * h_s)` for `0 <= i <= cells_t`,
/// `0 <= j <= cells_s`; cells are indexed by their lower-left node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    horizon_t: f64,
    horizon_s: f64,
    cells_t: usize,
    cells_s: usize,
}

impl GridSpec {
    pub fn new(horizon_t: f64, horizon_s: f64, cells_t: usize, cells_s: usize) -> Result<Self, FbsError> {
        if !(horizon_t > 0.0 && horizon_t.is_finite()) {
            return Err(FbsError::InvalidGrid(format!("horizon_t must be positive, got {horizon_t}")));
        }
        if !(horizon_s > 0.0 && horizon_s.is_finite()) {
            return Err(FbsError::InvalidGrid(format!("horizon_s must be positive, got {horizon_s}")));
        }
        if cells_t == 0 || cells_s == 0 {
            return Err(FbsError::InvalidGrid("cell counts must be at least 1".into()));
        }
        Ok(GridSpec { horizon_t, horizon_s, cells_t, cells_s })
    }

    pub fn horizon_t(&self) -> f64 {
        self.horizon_t
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn cells_t(&self) -> usize {
        self.cells_t
    }

    pub fn cells_s(&self) -> usize {
        self.cells_s
    }

    pub fn h_t(&self) -> f64 {
        self.horizon_t / self.cells_t as f64
    }

    pub fn h_s(&self) -> f64 {
        self.horizon_s / self.cells_s as f64
    }

    pub fn node_t(&self, i: usize) -> f64 {
        i as f64 * self.h_t()
    }

    pub fn node_s(&self, j: usize) -> f64 {
        j as f64 * self.h_s()
    }

    /// Midpoint of cell `k` along the t axis.
    pub fn mid_t(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h_t()
    }

    pub fn mid_s(&self, l: usize) -> f64 {
        (l as f64 + 0.5) * self.h_s()
    }

    pub fn n_cells(&self) -> usize {
        self.cells_t * self.cells_s
    }
}

/// Rectangular increment of the sheet over each grid cell:
/// `d[i][j] = B(t_{i+1}, s_{j+1}) - B(t_i, s_{j+1}) - B(t_{i+1}, s_j) + B(t_i, s_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetIncrements {
    values: Array2<f64>,
}

impl SheetIncrements {
    pub fn new(values: Array2<f64>) -> Self {
        SheetIncrements { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Row-major flattening: cell `(i, j)` maps to index `i * cells_s + j`.
    /// Every flattened-vector convention in this crate uses this order.
    pub fn flattened(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// Sheet values at the grid nodes; first row and column identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPath {
    values: Array2<f64>,
}

impl SheetPath {
    pub fn new(values: Array2<f64>) -> Self {
        SheetPath { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// One-dimensional increment covariances whose Kronecker product
/// `cov_t (x) cov_s` is the full covariance of the flattened increments.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCovariance {
    pub cov_t: Array2<f64>,
    pub cov_s: Array2<f64>,
}

/// Fractional Brownian covariance
/// `R(t, u) = (t^{2h} + u^{2h} - |t - u|^{2h}) / 2`.
pub fn cov_r(t: f64, u: f64, h: f64) -> Result<f64, FbsError> {
    if t < 0.0 || !t.is_finite() {
        return Err(FbsError::NegativeArgument(t));
    }
    if u < 0.0 || !u.is_finite() {
        return Err(FbsError::NegativeArgument(u));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(FbsError::ExponentOutOfRange(h));
    }
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(e) + u.powf(e) - (t - u).abs().powf(e)))
}

fn one_axis_cov(n: usize, h_step: f64, hurst: f64) -> Array2<f64> {
    // increments of fBm are stationary, so the entry depends on |i - k| only
    let two_h = 2.0 * hurst;
    let g = |d: f64| -> f64 { d.abs().powf(two_h) };
    let mut row = vec![0.0; n];
    for (d, r) in row.iter_mut().enumerate() {
        let d = d as f64;
        *r = 0.5 * h_step.powf(two_h) * (g(d + 1.0) - 2.0 * g(d) + g(d - 1.0));
    }
    Array2::from_shape_fn((n, n), |(i, k)| row[i.abs_diff(k)])
}

/// Exact covariance of the rectangular increments for the given grid, as
/// the two one-dimensional factors.
///
/// `cov_t[i][k]` is the second-order difference of `R^alpha` over the cell
/// pair `(i, k)`; for `alpha > 1/2` this equals the weighted double
/// integral `c(alpha) * integral over cell_i x cell_k of |a - m|^{2 alpha - 2}`.
pub fn increment_cov(grid: &GridSpec, hurst: &HurstPair) -> IncrementCovariance {
    IncrementCovariance {
        cov_t: one_axis_cov(grid.cells_t, grid.h_t(), hurst.alpha),
        cov_s: one_axis_cov(grid.cells_s, grid.h_s(), hurst.beta),
    }
}

/// Lower Cholesky factor, or None if a pivot fails.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

// Jitter policy: one retry with 1e-12 * trace / n on the diagonal, then a
// loud failure. The covariances here are strictly positive definite in
// exact arithmetic, so the retry only papers over round-off.
fn cholesky_with_jitter(a: &Array2<f64>, axis: &'static str) -> Result<Array2<f64>, FbsError> {
    if let Some(l) = cholesky(a) {
        return Ok(l);
    }
    let n = a.nrows();
    let trace: f64 = (0..n).map(|i| a[[i, i]]).sum();
    let mut jittered = a.clone();
    let bump = 1e-12 * trace / n as f64;
    for i in 0..n {
        jittered[[i, i]] += bump;
    }
    cholesky(&jittered).ok_or(FbsError::FactorizationFailure { axis })
}

/// Reusable sampler: factorizes the two covariance axes once, then draws
/// any number of replications.
///
/// RNG contract: replication `r` of seed `s` uses ChaCha12 keyed by `s`
/// with stream index `r`. The normal matrix `G` is filled row by row.
/// Identical `(seed, replication)` reproduces identical paths on every
/// platform.
#[derive(Debug, Clone)]
pub struct SheetSampler {
    grid: GridSpec,
    l_t: Array2<f64>,
    l_s_t: Array2<f64>,
}

impl SheetSampler {
    pub fn new(grid: &GridSpec, hurst: &HurstPair) -> Result<Self, FbsError> {
        let cov = increment_cov(grid, hurst);
        let l_t = cholesky_with_jitter(&cov.cov_t, "t")?;
        let l_s = cholesky_with_jitter(&cov.cov_s, "s")?;
        Ok(SheetSampler { grid: *grid, l_t, l_s_t: l_s.reversed_axes() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sample(&self, seed: u64, replication: u64) -> (SheetIncrements, SheetPath) {
        let (nt, ns) = (self.grid.cells_t, self.grid.cells_s);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(replication);
        let mut g = Array2::<f64>::zeros((nt, ns));
        for v in g.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let incr = self.l_t.dot(&g).dot(&self.l_s_t);
        let path = cumulate_increments(&incr);
        (SheetIncrements { values: incr }, SheetPath { values: path })
    }
}

fn cumulate_increments(incr: &Array2<f64>) -> Array2<f64> {
    let (nt, ns) = incr.dim();
    let mut path = Array2::<f64>::zeros((nt + 1, ns + 1));
    for i in 0..nt {
        for j in 0..ns {
            path[[i + 1, j + 1]] =
                incr[[i, j]] + path[[i, j + 1]] + path[[i + 1, j]] - path[[i, j]];
        }
    }
    path
}

/// Draw one sheet realization (replication stream 0).
///
/// For batches, build a [`SheetSampler`] once and call
/// [`SheetSampler::sample`] with distinct replication indices.
pub fn sample_sheet(
    grid: &GridSpec,
    hurst: &HurstPair,
    seed: u64,
) -> Result<(SheetIncrements, SheetPath), FbsError> {
    Ok(SheetSampler::new(grid, hurst)?.sample(seed, 0))
}

/// Unbiased sample covariance of the node values at each requested pair,
/// with a Monte Carlo standard error from the spread of the centered
/// products.
pub fn empirical_cov(
    samples: &[SheetPath],
    pairs: &[((usize, usize), (usize, usize))],
) -> Result<Vec<(f64, f64)>, FbsError> {
    let n = samples.len();
    if n < 2 {
        return Err(FbsError::InsufficientSamples(n));
    }
    let shape = samples[0].values.dim();
    let mut out = Vec::with_capacity(pairs.len());
    for &(p, q) in pairs {
        for node in [p, q] {
            if node.0 >= shape.0 || node.1 >= shape.1 {
                return Err(FbsError::NodeOutOfRange(node.0, node.1));
            }
        }
        let xs: Vec<f64> = samples.iter().map(|s| s.values[[p.0, p.1]]).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.values[[q.0, q.1]]).collect();
        let xbar = xs.iter().sum::<f64>() / n as f64;
        let ybar = ys.iter().sum::<f64>() / n as f64;
        let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).collect();
        let est = prods.iter().sum::<f64>() / (n - 1) as f64;
        let pbar = prods.iter().sum::<f64>() / n as f64;
        let var_p = prods.iter().map(|z| (z - pbar) * (z - pbar)).sum::<f64>() / (n - 1) as f64;
        let se = (var_p / n as f64).sqrt();
        out.push((est, se));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(a: f64, b: f64) -> HurstPair {
        HurstPair::new(a, b).unwrap()
    }

    // plain Jacobi rotations; plenty for the n <= 64 matrices used here
    fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += m[[i, j]] * m[[i, j]];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[[p, q]].abs() < 1e-30 {
                        continue;
                    }
                    let theta = 0.5 * (m[[q, q]] - m[[p, p]]) / m[[p, q]];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[[k, p]];
                        let mkq = m[[k, q]];
                        m[[k, p]] = c * mkp - s * mkq;
                        m[[k, q]] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[[p, k]];
                        let mqk = m[[q, k]];
                        m[[p, k]] = c * mpk - s * mqk;
                        m[[q, k]] = s * mpk + c * mqk;
                    }
                }
            }
        }
        (0..n).map(|i| m[[i, i]]).collect()
    }

    #[test]
    fn hurst_validation() {
        assert!(HurstPair::new(0.5, 0.55).is_err());
        assert!(HurstPair::new(0.55, 1.0).is_err());
        assert!(HurstPair::new(0.55, 0.55).is_ok());
        assert!(HurstPair::new(0.99, 0.51).is_ok());
    }

    #[test]
    fn theorem_regime_boundaries() {
        assert!(hp(0.55, 0.55).theorem_regime());
        assert!(!hp(0.55, 0.7).theorem_regime());
        assert!(!hp(0.625, 0.55).theorem_regime());
        assert!(hp(0.62, 0.6).theorem_regime());
    }

    #[test]
    fn weight_constants() {
        let h = hp(0.55, 0.6);
        assert!((h.c_alpha() - 0.55 * 0.1).abs() < 1e-15);
        assert!((h.c_beta() - 0.6 * 0.2).abs() < 1e-15);
        assert!(h.c_alpha() > 0.0 && h.c_beta() > 0.0);
    }

    #[test]
    fn grid_accessors() {
        let g = GridSpec::new(2.0, 3.0, 4, 6).unwrap();
        assert_eq!(g.h_t(), 0.5);
        assert_eq!(g.h_s(), 0.5);
        assert_eq!(g.node_t(2), 1.0);
        assert_eq!(g.mid_s(0), 0.25);
        assert_eq!(g.n_cells(), 24);
        assert!(GridSpec::new(0.0, 1.0, 2, 2).is_err());
        assert!(GridSpec::new(1.0, 1.0, 0, 2).is_err());
    }

    #[test]
    fn cov_r_collapses_on_diagonal() {
        let t = 1.7;
        let a = 0.55;
        assert_eq!(cov_r(t, t, a).unwrap(), t.powf(2.0 * a));
        assert_eq!(cov_r(t, 0.0, a).unwrap(), 0.0);
    }

    #[test]
    fn cov_r_frozen_value() {
        // (2^{1.1}) / 2 evaluated independently to 17 digits
        let got = cov_r(2.0, 1.0, 0.55).unwrap();
        assert!((got - 1.0717734625362932).abs() < 1e-15);
    }

    #[test]
    fn cov_r_rejects_bad_input() {
        assert!(matches!(cov_r(-1.0, 1.0, 0.55), Err(FbsError::NegativeArgument(_))));
        assert!(matches!(cov_r(1.0, 1.0, 1.5), Err(FbsError::ExponentOutOfRange(_))));
    }

    #[test]
    fn increment_cov_matches_second_differences() {
        let grid = GridSpec::new(2.0, 2.0, 4, 4).unwrap();
        let h = hp(0.55, 0.6);
        let cov = increment_cov(&grid, &h);
        for i in 0..4 {
            for k in 0..4 {
                let direct = cov_r(grid.node_t(i + 1), grid.node_t(k + 1), h.alpha()).unwrap()
                    - cov_r(grid.node_t(i), grid.node_t(k + 1), h.alpha()).unwrap()
                    - cov_r(grid.node_t(i + 1), grid.node_t(k), h.alpha()).unwrap()
                    + cov_r(grid.node_t(i), grid.node_t(k), h.alpha()).unwrap();
                assert!((cov.cov_t[[i, k]] - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn increment_cov_positive_off_diagonals() {
        let grid = GridSpec::new(2.0, 2.0, 6, 6).unwrap();
        let cov = increment_cov(&grid, &hp(0.55, 0.62));
        for i in 0..6 {
            for k in 0..6 {
                assert!(cov.cov_t[[i, k]] >= 0.0);
                assert!(cov.cov_s[[i, k]] >= 0.0);
            }
        }
    }

    #[test]
    fn increment_cov_row_sums_telescope() {
        let grid = GridSpec::new(2.0, 2.0, 5, 5).unwrap();
        let h = hp(0.57, 0.57);
        let cov = increment_cov(&grid, &h);
        let t_end = grid.horizon_t();
        for i in 0..5 {
            let row_sum: f64 = (0..5).map(|k| cov.cov_t[[i, k]]).sum();
            let want = cov_r(grid.node_t(i + 1), t_end, h.alpha()).unwrap()
                - cov_r(grid.node_t(i), t_end, h.alpha()).unwrap();
            assert!((row_sum - want).abs() < 1e-12);
        }
        let total: f64 = cov.cov_t.iter().sum();
        assert!((total - t_end.powf(2.0 * h.alpha())).abs() < 1e-12);
    }

    #[test]
    fn increment_cov_is_psd() {
        let grid = GridSpec::new(4.0, 4.0, 16, 16).unwrap();
        let cov = increment_cov(&grid, &hp(0.55, 0.62));
        for m in [&cov.cov_t, &cov.cov_s] {
            let eig = symmetric_eigenvalues(m);
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= -1e-10 * max, "min eigenvalue {min}, max {max}");
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let grid = GridSpec::new(2.0, 2.0, 6, 6).unwrap();
        let cov = increment_cov(&grid, &hp(0.55, 0.55));
        let l = cholesky_with_jitter(&cov.cov_t, "t").unwrap();
        let back = l.dot(&l.t());
        for (a, b) in back.iter().zip(cov.cov_t.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_jitter_recovers_rank_deficient() {
        // all-ones matrix is PSD with rank one; the plain factorization hits
        // a zero pivot and the jitter retry must succeed
        let a = Array2::from_elem((3, 3), 1.0);
        assert!(cholesky(&a).is_none());
        assert!(cholesky_with_jitter(&a, "t").is_ok());
    }

    #[test]
    fn sampling_is_deterministic_per_seed_and_stream() {
        let grid = GridSpec::new(2.0, 2.0, 4, 4).unwrap();
        let h = hp(0.55, 0.55);
        let s1 = SheetSampler::new(&grid, &h).unwrap();
        let (i1, p1) = s1.sample(42, 3);
        let (i2, p2) = s1.sample(42, 3);
        assert_eq!(i1, i2);
        assert_eq!(p1, p2);
        let (i3, _) = s1.sample(42, 4);
        assert_ne!(i1, i3);
        let (i4, _) = s1.sample(43, 3);
        assert_ne!(i1, i4);
        let (i5, _) = sample_sheet(&grid, &h, 42).unwrap();
        assert_eq!(i5, s1.sample(42, 0).0);
    }

    #[test]
    fn path_boundary_is_zero_and_cumulation_inverts() {
        let grid = GridSpec::new(2.0, 3.0, 4, 5).unwrap();
        let (incr, path) = sample_sheet(&grid, &hp(0.6, 0.55), 7).unwrap();
        let v = path.values();
        for i in 0..=4 {
            assert_eq!(v[[i, 0]], 0.0);
        }
        for j in 0..=5 {
            assert_eq!(v[[0, j]], 0.0);
        }
        for i in 0..4 {
            for j in 0..5 {
                let d = v[[i + 1, j + 1]] - v[[i, j + 1]] - v[[i + 1, j]] + v[[i, j]];
                assert!((d - incr.values()[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_cov_degenerate_cases() {
        let grid = GridSpec::new(1.0, 1.0, 2, 2).unwrap();
        let (_, path) = sample_sheet(&grid, &hp(0.55, 0.55), 1).unwrap();
        let err = empirical_cov(&[path.clone()], &[((1, 1), (1, 1))]);
        assert_eq!(err, Err(FbsError::InsufficientSamples(1)));

        // identical repeated paths: the centered values vanish up to the
        // rounding of the mean, leaving a product at the 1e-32 scale, and
        // the spread of the identical products is exactly zero
        let reps = vec![path.clone(), path.clone(), path];
        let got = empirical_cov(&reps, &[((1, 1), (2, 2))]).unwrap();
        assert!(got[0].0.abs() < 1e-30);
        assert_eq!(got[0].1, 0.0);
    }

    #[test]
    fn empirical_cov_boundary_pair_is_zero() {
        let grid = GridSpec::new(1.0, 1.0, 2, 2).unwrap();
        let sampler = SheetSampler::new(&grid, &hp(0.55, 0.55)).unwrap();
        let paths: Vec<SheetPath> = (0..50).map(|r| sampler.sample(5, r).1).collect();
        let got = empirical_cov(&paths, &[((0, 1), (2, 2))]).unwrap();
        assert_eq!(got[0], (0.0, 0.0));
    }

    #[test]
    fn empirical_cov_rejects_out_of_range_nodes() {
        let grid = GridSpec::new(1.0, 1.0, 2, 2).unwrap();
        let sampler = SheetSampler::new(&grid, &hp(0.55, 0.55)).unwrap();
        let paths: Vec<SheetPath> = (0..3).map(|r| sampler.sample(5, r).1).collect();
        assert!(matches!(
            empirical_cov(&paths, &[((0, 1), (3, 2))]),
            Err(FbsError::NodeOutOfRange(3, 2))
        ));
    }

    proptest! {
        #[test]
        fn self_similarity_scales_cov_entrywise(
            lambda in 0.3f64..4.0,
            alpha in 0.51f64..0.99,
            n in 2usize..10,
        ) {
            let g1 = GridSpec::new(2.0, 2.0, n, n).unwrap();
            let g2 = GridSpec::new(2.0 * lambda, 2.0, n, n).unwrap();
            let h = hp(alpha, 0.55);
            let c1 = increment_cov(&g1, &h);
            let c2 = increment_cov(&g2, &h);
            let factor = lambda.powf(2.0 * alpha);
            for (a, b) in c1.cov_t.iter().zip(c2.cov_t.iter()) {
                prop_assert!((b - a * factor).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
            }
        }

        #[test]
        fn increment_cov_symmetric(alpha in 0.51f64..0.99, n in 2usize..8) {
            let g = GridSpec::new(1.5, 1.5, n, n).unwrap();
            let c = increment_cov(&g, &hp(alpha, 0.6));
            for i in 0..n {
                for k in 0..n {
                    prop_assert!((c.cov_t[[i, k]] - c.cov_t[[k, i]]).abs() < 1e-15);
                }
            }
        }
    }
}

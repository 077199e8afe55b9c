//! MMSE soft interference cancellation with AP selection.
//!
//! Symbols are modelled as `x_k = sqrt(rho_k) a_k` with `a_k` on the
//! unit-energy constellation, so means and variances in an
//! [`InterferenceProfile`] are in transmit-power units.
//!
//! For UE `k` with serving antennas `S = supp(D_k)` the soft-IC filter is
//!
//! ```text
//! w_k = rho_k [ D (rho_k g_k g_k^H + G_i Delta_i G_i^H) D
//!             + D (sigma2 I + sum_m (|xbar_m|^2 + var_m) C_m) D ]^{-1} D g_k
//! ```
//!
//! evaluated on the `|S| x |S|` submatrix and zero padded, which is the
//! same vector as the masked `NL`-dimensional expression.

use std::cell::Cell;

use num_complex::Complex64;

use crate::estimation::ChannelEstimate;
use crate::linalg::{cholesky, hermitian_solve, is_hermitian, CMatrix, CVector, ZERO};
use crate::selection::SelectionMask;
use crate::soft::{Constellation, SoftSymbolStats};
use crate::{Error, Result};

thread_local! {
    static FILTER_BUILDS: Cell<u64> = const { Cell::new(0) };
}

/// Number of per-UE receive filters built on this thread so far.
pub fn filter_construction_count() -> u64 {
    FILTER_BUILDS.with(|c| c.get())
}

fn count_filter_builds(n: usize) {
    FILTER_BUILDS.with(|c| c.set(c.get() + n as u64));
}

/// Everything the central processor knows when detecting one symbol vector.
#[derive(Debug, Clone, Copy)]
pub struct Receiver<'a> {
    pub est: &'a ChannelEstimate,
    pub mask: &'a SelectionMask,
    /// Data transmit powers `rho_k`.
    pub rho: &'a [f64],
    /// Receiver noise power.
    pub sigma2: f64,
}

impl<'a> Receiver<'a> {
    pub fn new(est: &'a ChannelEstimate, mask: &'a SelectionMask, rho: &'a [f64], sigma2: f64) -> Result<Self> {
        let k = est.num_ues();
        if mask.num_ues() != k || rho.len() != k {
            return Err(Error::Dimension(format!(
                "estimate has {k} UEs, mask {} and power vector {}",
                mask.num_ues(),
                rho.len()
            )));
        }
        if mask.num_aps() != est.num_aps() || mask.antennas_per_ap() != est.antennas_per_ap {
            return Err(Error::Dimension("mask and estimate disagree on the antenna layout".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("noise power must be positive, got {sigma2}")));
        }
        Ok(Self { est, mask, rho, sigma2 })
    }

    pub fn num_ues(&self) -> usize {
        self.est.num_ues()
    }

    pub fn num_antennas(&self) -> usize {
        self.est.num_antennas()
    }

    /// `g_hat_m` restricted to the rows in `rows`.
    fn estimate_rows(&self, m: usize, rows: &[usize]) -> CVector {
        CVector::from_iterator(rows.len(), rows.iter().map(|&r| self.est.g_hat[(r, m)]))
    }

    /// `sum_m weights[m] C_m` restricted to `rows` (a union of whole AP blocks).
    fn error_sum_rows(&self, rows: &[usize], weights: &[f64]) -> CMatrix {
        let n = self.est.antennas_per_ap;
        let mut out = CMatrix::zeros(rows.len(), rows.len());
        if self.est.is_perfect() {
            return out;
        }
        for (i, chunk) in rows.chunks(n).enumerate() {
            let l = chunk[0] / n;
            out.view_mut((i * n, i * n), (n, n)).copy_from(&self.est.weighted_error_block(l, weights));
        }
        out
    }
}

/// Prior statistics of the transmitted symbols driving one filter build.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    /// `xbar_m`, power-scaled symbol means.
    pub mean: Vec<Complex64>,
    /// `var_m`, power-scaled symbol variances.
    pub variance: Vec<f64>,
}

impl InterferenceProfile {
    /// First IDD iteration: zero means and variances equal to the powers.
    pub fn uninformed(rho: &[f64]) -> Self {
        Self { mean: vec![ZERO; rho.len()], variance: rho.to_vec() }
    }

    pub fn from_stats(stats: &SoftSymbolStats, rho: &[f64]) -> Self {
        let mean = stats.mean.iter().zip(rho).map(|(m, p)| m * p.sqrt()).collect();
        let variance = stats.variance.iter().zip(rho).map(|(v, p)| v * p).collect();
        Self { mean, variance }
    }

    /// Genie priors: point masses on the transmitted (power-scaled) symbols.
    pub fn exact(symbols: &[Complex64]) -> Self {
        Self { mean: symbols.to_vec(), variance: vec![0.0; symbols.len()] }
    }

    /// `|xbar_m|^2 + var_m`, the weights of the estimation-error covariances.
    pub fn error_weights(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.variance).map(|(m, v)| m.norm_sqr() + v).collect()
    }

    pub fn is_uninformed(&self, rho: &[f64]) -> bool {
        self.mean.iter().all(|m| m.norm_sqr() == 0.0) && self.variance.iter().zip(rho).all(|(v, p)| v == p)
    }
}

/// Soft-IC filter `w_k` for one UE, zero padded to `NL` entries.
pub fn mmse_soft_ic_filter(rx: &Receiver, k: usize, prof: &InterferenceProfile) -> Result<CVector> {
    let rows = rx.mask.serving_antennas(k);
    let k_count = rx.num_ues();
    let mut a = CMatrix::identity(rows.len(), rows.len()) * Complex64::new(rx.sigma2, 0.0);
    a += rx.error_sum_rows(&rows, &prof.error_weights());
    for m in 0..k_count {
        let weight = if m == k { rx.rho[k] } else { prof.variance[m] };
        if weight == 0.0 {
            continue;
        }
        let g = rx.estimate_rows(m, &rows);
        a.ger(Complex64::new(weight, 0.0), &g, &g.conjugate(), Complex64::new(1.0, 0.0));
    }
    debug_assert!(is_hermitian(&a, 1e-9 * a.norm().max(1.0)));
    let target = rx.estimate_rows(k, &rows);
    let x = hermitian_solve(a, &target, "soft-IC filter covariance")?;
    count_filter_builds(1);
    let mut w = CVector::from_element(rx.num_antennas(), ZERO);
    for (i, &r) in rows.iter().enumerate() {
        w[r] = x[i] * rx.rho[k];
    }
    Ok(w)
}

/// All `K` soft-IC filters for one symbol interval plus their effective
/// gains `mu_k = w_k^H D_k g_hat_k`.
///
/// UEs with the same serving set share one Cholesky factorization of the
/// covariance without the desired-user term; each filter then follows from
/// a rank-one (Sherman-Morrison) correction.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub filters: Vec<CVector>,
    pub gains: Vec<f64>,
}

impl FilterBank {
    pub fn build(rx: &Receiver, prof: &InterferenceProfile) -> Result<Self> {
        let k_count = rx.num_ues();
        let mut filters = vec![CVector::zeros(0); k_count];
        let mut gains = vec![0.0; k_count];
        let mut pending: Vec<usize> = (0..k_count).collect();
        let weights = prof.error_weights();
        while let Some(&first) = pending.first() {
            let rows = rx.mask.serving_antennas(first);
            let (group, rest): (Vec<usize>, Vec<usize>) =
                pending.iter().partition(|&&k| rx.mask.serving_antennas(k) == rows);
            pending = rest;

            // Ghat_S diag(var) Ghat_S^H via one product of scaled columns.
            let mut scaled = CMatrix::zeros(rows.len(), k_count);
            for m in 0..k_count {
                let s = Complex64::new(prof.variance[m].max(0.0).sqrt(), 0.0);
                for (i, &r) in rows.iter().enumerate() {
                    scaled[(i, m)] = rx.est.g_hat[(r, m)] * s;
                }
            }
            let mut b = &scaled * scaled.adjoint();
            for i in 0..rows.len() {
                b[(i, i)] += rx.sigma2;
            }
            b += rx.error_sum_rows(&rows, &weights);
            let chol = cholesky(b.clone()).ok_or(Error::NotPositiveDefinite("soft-IC filter covariance"))?;
            for k in group {
                let g = rx.estimate_rows(k, &rows);
                let x = chol.solve(&g);
                let q = g.dotc(&x).re;
                let extra = rx.rho[k] - prof.variance[k];
                let denom = 1.0 + extra * q;
                let x = if denom > 1e-12 {
                    x / Complex64::new(denom, 0.0)
                } else {
                    // rank-one update not safely invertible; solve directly
                    let mut a = b.clone();
                    a.ger(Complex64::new(extra, 0.0), &g, &g.conjugate(), Complex64::new(1.0, 0.0));
                    hermitian_solve(a, &g, "soft-IC filter covariance")?
                };
                let mut w = CVector::from_element(rx.num_antennas(), ZERO);
                for (i, &r) in rows.iter().enumerate() {
                    w[r] = x[i] * rx.rho[k];
                }
                gains[k] = rx.rho[k] * g.dotc(&x).re;
                filters[k] = w;
            }
        }
        count_filter_builds(k_count);
        Ok(Self { filters, gains })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

/// `w_k^H D_k g_hat_m`.
pub fn filter_response(rx: &Receiver, w: &CVector, m: usize) -> Complex64 {
    w.dotc(&rx.est.g_hat.column(m).into_owned())
}

/// Decision statistic after cancelling the other UEs' means:
/// `w_k^H y - w_k^H D_k G_i xbar_i`.
///
/// `w` must vanish outside UE `k`'s serving antennas, so `w^H D_k = w^H`.
pub fn soft_ic_detect(rx: &Receiver, k: usize, y: &CVector, w: &CVector, means: &[Complex64]) -> Complex64 {
    let mut s = w.dotc(y);
    for (m, &xbar) in means.iter().enumerate() {
        if m != k && xbar.norm_sqr() > 0.0 {
            s -= filter_response(rx, w, m) * xbar;
        }
    }
    s
}

/// Output of one symbol-vector detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Post-IC estimates of the power-scaled symbols.
    pub s_tilde: Vec<Complex64>,
    /// Gain-normalized filter outputs on the unit-energy constellation.
    pub u: Vec<Complex64>,
    /// Sliced constellation indices.
    pub hard: Vec<usize>,
}

/// Scales an estimate of `x_k` back onto the unit-energy constellation.
pub fn normalize(s_tilde: Complex64, gain: f64, rho: f64) -> Complex64 {
    let g = gain * rho.sqrt();
    if g > 0.0 {
        s_tilde / g
    } else {
        ZERO
    }
}

/// Parallel soft-IC detection of all UEs with a prebuilt filter bank.
pub fn soft_ic_detect_all(
    rx: &Receiver,
    bank: &FilterBank,
    y: &CVector,
    prof: &InterferenceProfile,
    c: &Constellation,
) -> DetectionResult {
    let k_count = rx.num_ues();
    let mut out = DetectionResult { s_tilde: Vec::with_capacity(k_count), u: Vec::with_capacity(k_count), hard: Vec::with_capacity(k_count) };
    for k in 0..k_count {
        let s = soft_ic_detect(rx, k, y, &bank.filters[k], &prof.mean);
        let u = normalize(s, bank.gains[k], rx.rho[k]);
        out.s_tilde.push(s);
        out.u.push(u);
        out.hard.push(c.nearest(u));
    }
    out
}

/// Linear MMSE detection (no priors), evaluated directly as
/// `rho_k g_k^H D (R_y)^{-1} D y` with the full received covariance `R_y`.
pub fn linear_mmse_detect(rx: &Receiver, y: &CVector) -> Result<Vec<Complex64>> {
    let k_count = rx.num_ues();
    let mut out = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let rows = rx.mask.serving_antennas(k);
        let mut r = rx.error_sum_rows(&rows, rx.rho);
        for i in 0..rows.len() {
            r[(i, i)] += rx.sigma2;
        }
        for m in 0..k_count {
            let g = rx.estimate_rows(m, &rows);
            r += &g * g.adjoint() * Complex64::new(rx.rho[m], 0.0);
        }
        let y_s = CVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
        let z = hermitian_solve(r, &y_s, "received covariance")?;
        out.push(rx.estimate_rows(k, &rows).dotc(&z) * rx.rho[k]);
    }
    Ok(out)
}

/// Genie detector with perfect interference cancellation:
/// `rho_k g_k^H D (rho_k D g_k g_k^H D + D(sigma2 I + sum |x_m|^2 C_m) D)^{-1} (y - D G_i x_i)`.
pub fn perfect_ic_detect(rx: &Receiver, k: usize, y: &CVector, symbols: &[Complex64]) -> Result<Complex64> {
    let rows = rx.mask.serving_antennas(k);
    let weights: Vec<f64> = symbols.iter().map(|s| s.norm_sqr()).collect();
    let g = rx.estimate_rows(k, &rows);
    let mut m = rx.error_sum_rows(&rows, &weights);
    for i in 0..rows.len() {
        m[(i, i)] += rx.sigma2;
    }
    m += &g * g.adjoint() * Complex64::new(rx.rho[k], 0.0);
    let mut resid = CVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    for (j, &x) in symbols.iter().enumerate() {
        if j != k {
            resid -= rx.estimate_rows(j, &rows) * x;
        }
    }
    let z = hermitian_solve(m, &resid, "perfect-IC covariance")?;
    Ok(g.dotc(&z) * rx.rho[k])
}

/// Conditional MSE `E{|s_tilde_k - x_k|^2 | G_hat}` of an arbitrary filter `w`
/// under the given priors; the soft-IC filter is its minimizer.
pub fn soft_ic_mse(rx: &Receiver, k: usize, prof: &InterferenceProfile, w: &CVector) -> f64 {
    let rows = rx.mask.serving_antennas(k);
    let w_s = CVector::from_iterator(rows.len(), rows.iter().map(|&i| w[i]));
    let mut a = rx.error_sum_rows(&rows, &prof.error_weights());
    for i in 0..rows.len() {
        a[(i, i)] += rx.sigma2;
    }
    for m in 0..rx.num_ues() {
        let weight = if m == k { rx.rho[k] } else { prof.variance[m] };
        let g = rx.estimate_rows(m, &rows);
        a += &g * g.adjoint() * Complex64::new(weight, 0.0);
    }
    let quad = w_s.dotc(&(&a * &w_s)).re;
    let cross = w_s.dotc(&rx.estimate_rows(k, &rows)) * rx.rho[k];
    quad - 2.0 * cross.re + rx.rho[k]
}

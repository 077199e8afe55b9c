//! Pilot assignment, uplink pilot reception and per-AP MMSE channel
//! estimation with the matching estimation-error covariances.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::geometry::{ChannelRealization, SpatialCorrelation};
use crate::linalg::{cholesky, complex_normal_vector, CMatrix, CVector};
use crate::{Error, Result};

/// Pilot book: UE `k` transmits pilot `assignment[k]` (0-based) with power
/// `pilot_powers[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub pilot_len: usize,
    pub assignment: Vec<usize>,
    pub pilot_powers: Vec<f64>,
}

impl PilotBook {
    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    /// UEs sharing UE `k`'s pilot, `k` included, in ascending order.
    pub fn sharing_set(&self, k: usize) -> Vec<usize> {
        let t = self.assignment[k];
        self.users_of_pilot(t).collect()
    }

    pub fn users_of_pilot(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, &p)| p == t).map(|(j, _)| j)
    }
}

/// Random permutation of the UEs followed by round-robin over the pilots.
pub fn assign_pilots<R: Rng + ?Sized>(num_ues: usize, pilot_len: usize, power: f64, rng: &mut R) -> Result<PilotBook> {
    let mut order: Vec<usize> = (0..num_ues).collect();
    order.shuffle(rng);
    assign_pilots_in_order(&order, pilot_len, &vec![power; num_ues])
}

/// Round-robin assignment where the `i`-th UE of `order` gets pilot `i mod tau_p`.
pub fn assign_pilots_in_order(order: &[usize], pilot_len: usize, powers: &[f64]) -> Result<PilotBook> {
    if pilot_len == 0 {
        return Err(Error::Config("pilot length must be at least 1".into()));
    }
    if order.len() != powers.len() {
        return Err(Error::Dimension("one pilot power per UE".into()));
    }
    if let Some(p) = powers.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Config(format!("pilot power must be positive, got {p}")));
    }
    let mut assignment = vec![usize::MAX; order.len()];
    for (i, &k) in order.iter().enumerate() {
        if k >= order.len() || assignment[k] != usize::MAX {
            return Err(Error::Config("pilot order must be a permutation of the UEs".into()));
        }
        assignment[k] = i % pilot_len;
    }
    Ok(PilotBook { pilot_len, assignment, pilot_powers: powers.to_vec() })
}

/// Despread pilot observations `r_{t,l}` and their covariances `Psi_{t,l}`,
/// indexed `[t * L + l]`.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub received: Vec<CVector>,
    pub covariance: Vec<CMatrix>,
}

impl PilotObservation {
    pub fn received(&self, t: usize, l: usize) -> &CVector {
        &self.received[t * self.num_aps + l]
    }

    pub fn covariance(&self, t: usize, l: usize) -> &CMatrix {
        &self.covariance[t * self.num_aps + l]
    }
}

/// Uplink pilot phase after correlating with each normalized pilot:
/// `r_{t,l} = sum_{j uses t} sqrt(eta_j tau_p) g_{jl} + n`, `n ~ CN(0, sigma2 I)`.
pub fn receive_pilots<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    corr: &SpatialCorrelation,
    book: &PilotBook,
    sigma2: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    let (n, l_count) = (channel.antennas_per_ap, channel.num_aps());
    if book.num_ues() != channel.num_ues() || corr.num_ues() != channel.num_ues() {
        return Err(Error::Dimension("pilot book, correlation and channel disagree on K".into()));
    }
    let tau = book.pilot_len as f64;
    let noise_std = Complex64::new(sigma2.max(0.0).sqrt(), 0.0);
    let mut received = Vec::with_capacity(book.pilot_len * l_count);
    let mut covariance = Vec::with_capacity(book.pilot_len * l_count);
    for t in 0..book.pilot_len {
        for l in 0..l_count {
            let mut r = complex_normal_vector(n, rng) * noise_std;
            let mut psi = CMatrix::identity(n, n) * Complex64::new(sigma2, 0.0);
            for j in book.users_of_pilot(t) {
                let gain = book.pilot_powers[j] * tau;
                r += channel.g.view((l * n, j), (n, 1)) * Complex64::new(gain.sqrt(), 0.0);
                psi += corr.block(j, l) * Complex64::new(gain, 0.0);
            }
            received.push(r);
            covariance.push(psi);
        }
    }
    Ok(PilotObservation { num_aps: l_count, antennas_per_ap: n, received, covariance })
}

/// What the receiver knows about the channel: stacked estimates `g_hat`
/// (`NL x K`) and per-(UE, AP) error covariances `C_{kl}` (`N x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub g_hat: CMatrix,
    pub antennas_per_ap: usize,
    /// `err_cov[k * L + l]`.
    pub err_cov: Vec<CMatrix>,
}

impl ChannelEstimate {
    /// Genie knowledge: the estimate is the channel and every `C_{kl}` is zero.
    pub fn perfect(channel: &ChannelRealization) -> Self {
        let n = channel.antennas_per_ap;
        let count = channel.num_aps() * channel.num_ues();
        Self { g_hat: channel.g.clone(), antennas_per_ap: n, err_cov: vec![CMatrix::zeros(n, n); count] }
    }

    pub fn num_antennas(&self) -> usize {
        self.g_hat.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.g_hat.ncols()
    }

    pub fn num_aps(&self) -> usize {
        self.g_hat.nrows() / self.antennas_per_ap
    }

    pub fn error_block(&self, k: usize, l: usize) -> &CMatrix {
        &self.err_cov[k * self.num_aps() + l]
    }

    /// Block-diagonal `C_k = diag(C_{k1}, ..., C_{kL})`.
    pub fn error_covariance(&self, k: usize) -> CMatrix {
        let n = self.antennas_per_ap;
        let mut c = CMatrix::zeros(self.num_antennas(), self.num_antennas());
        for l in 0..self.num_aps() {
            c.view_mut((l * n, l * n), (n, n)).copy_from(self.error_block(k, l));
        }
        c
    }

    /// `sum_k weights[k] C_k` restricted to the diagonal blocks of AP `l`.
    pub fn weighted_error_block(&self, l: usize, weights: &[f64]) -> CMatrix {
        let n = self.antennas_per_ap;
        let mut acc = CMatrix::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                acc += self.error_block(k, l) * Complex64::new(w, 0.0);
            }
        }
        acc
    }

    pub fn is_perfect(&self) -> bool {
        self.err_cov.iter().all(|c| c.iter().all(|v| v.norm_sqr() == 0.0))
    }
}

/// Per-AP MMSE estimate `g_hat_{kl} = sqrt(eta_k tau_p) Omega_{kl} Psi^{-1} r`
/// and error covariance `C_{kl} = Omega_{kl} - eta_k tau_p Omega_{kl} Psi^{-1} Omega_{kl}`.
pub fn mmse_estimate(obs: &PilotObservation, corr: &SpatialCorrelation, book: &PilotBook) -> Result<ChannelEstimate> {
    let (n, l_count, k_count) = (obs.antennas_per_ap, obs.num_aps, book.num_ues());
    let tau = book.pilot_len as f64;
    let mut g_hat = CMatrix::zeros(n * l_count, k_count);
    let mut err_cov = Vec::with_capacity(k_count * l_count);
    for k in 0..k_count {
        let t = book.assignment[k];
        let gain = book.pilot_powers[k] * tau;
        for l in 0..l_count {
            let omega = corr.block(k, l);
            let chol = cholesky(obs.covariance(t, l).clone()).ok_or(Error::NotPositiveDefinite("pilot covariance"))?;
            // Psi^{-1} Omega; Omega and Psi are Hermitian so Omega Psi^{-1} = (Psi^{-1} Omega)^H.
            let psi_inv_omega = chol.solve(omega);
            let omega_psi_inv = psi_inv_omega.adjoint();
            let est = &omega_psi_inv * obs.received(t, l) * Complex64::new(gain.sqrt(), 0.0);
            g_hat.view_mut((l * n, k), (n, 1)).copy_from(&est);
            let c = omega - omega * &psi_inv_omega * Complex64::new(gain, 0.0);
            err_cov.push((&c + c.adjoint()) * Complex64::new(0.5, 0.0));
        }
    }
    Ok(ChannelEstimate { g_hat, antennas_per_ap: n, err_cov })
}

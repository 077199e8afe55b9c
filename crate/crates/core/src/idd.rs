//! Iterative detection and decoding.
//!
//! The detector output for UE `k` is modelled as `s_tilde = omega a + z`
//! with `a` on the unit-energy constellation, `omega = sqrt(rho_k) w^H D g_hat_k`
//! and `z ~ CN(0, kappa2)`. Extrinsic bit LLRs go to one LDPC decoder per
//! UE, and the decoder extrinsics come back as the next iteration's priors.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detect::{soft_ic_detect, FilterBank, InterferenceProfile, Receiver};
use crate::ldpc::{DecoderState, LdpcCode};
use crate::linalg::{CMatrix, CVector};
use crate::list::{list_detect, SacConfig};
use crate::soft::{clamp_llr, log_add, softplus, Constellation, SoftSymbolStats};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Linear MMSE without interference cancellation.
    Mmse,
    /// Parallel MMSE soft-IC.
    SoftIc,
    /// List soft-IC with the shadow-area constraint.
    List,
    /// Soft-IC with point-mass priors on the transmitted symbols.
    Genie,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Mmse, DetectorKind::SoftIc, DetectorKind::List];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Mmse => "mmse",
            DetectorKind::SoftIc => "softic",
            DetectorKind::List => "list",
            DetectorKind::Genie => "genie",
        }
    }

    /// Whether the filters depend on decoder feedback.
    pub fn uses_priors(self) -> bool {
        matches!(self, DetectorKind::SoftIc | DetectorKind::List)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mmse" => Ok(DetectorKind::Mmse),
            "softic" | "soft-ic" => Ok(DetectorKind::SoftIc),
            "list" => Ok(DetectorKind::List),
            "genie" => Ok(DetectorKind::Genie),
            other => Err(Error::Config(format!("unknown detector {other:?} (expected mmse, softic, list or genie)"))),
        }
    }
}

/// AWGN surrogate of one filter output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveAwgn {
    pub omega: Complex64,
    pub kappa2: f64,
}

/// Per-AP blocks of `sigma2 I + sum_m rho_m C_m`, which do not depend on
/// the priors and are shared by every filter of a coherence block.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    blocks: Vec<CMatrix>,
}

impl NoiseModel {
    pub fn new(rx: &Receiver) -> Self {
        let n = rx.est.antennas_per_ap;
        let blocks = (0..rx.est.num_aps())
            .map(|l| {
                let mut b = if rx.est.is_perfect() { CMatrix::zeros(n, n) } else { rx.est.weighted_error_block(l, rx.rho) };
                for i in 0..n {
                    b[(i, i)] += rx.sigma2;
                }
                b
            })
            .collect();
        Self { blocks }
    }

    /// `omega` and `kappa2` for filter `w` of UE `k`. With `residual` given,
    /// `sum_{m != k} var_m |w^H g_hat_m|^2` is added to `kappa2`.
    pub fn effective_channel(
        &self,
        rx: &Receiver,
        k: usize,
        w: &CVector,
        residual: Option<&InterferenceProfile>,
    ) -> Result<EffectiveAwgn> {
        let n = rx.est.antennas_per_ap;
        let omega = w.dotc(&rx.est.g_hat.column(k)) * rx.rho[k].sqrt();
        let mut kappa2 = 0.0;
        for (l, block) in self.blocks.iter().enumerate() {
            if !rx.mask.serves(l, k) {
                continue;
            }
            let wl = w.rows(l * n, n);
            kappa2 += wl.dotc(&(block * wl)).re;
        }
        if let Some(prof) = residual {
            for m in (0..rx.num_ues()).filter(|&m| m != k) {
                kappa2 += prof.variance[m] * w.dotc(&rx.est.g_hat.column(m)).norm_sqr();
            }
        }
        if !(kappa2 > 0.0) {
            return Err(Error::NonPositiveNoise(kappa2));
        }
        Ok(EffectiveAwgn { omega, kappa2 })
    }
}

/// One-off version of [`NoiseModel::effective_channel`] without the residual term.
pub fn effective_channel(rx: &Receiver, k: usize, w: &CVector) -> Result<EffectiveAwgn> {
    NoiseModel::new(rx).effective_channel(rx, k, w, None)
}

/// Extrinsic LLRs of the bits of one symbol:
/// `log sum_{b_l = 0} f(u|s) P(s) - log sum_{b_l = 1} f(u|s) P(s) - prior_l`
/// with `f(u|s) ~ exp(-|u - omega s|^2 / kappa2)`.
pub fn extrinsic_llr(u: Complex64, eff: &EffectiveAwgn, prior: &[f64], c: &Constellation) -> Vec<f64> {
    let bits = c.bits_per_symbol();
    assert_eq!(prior.len(), bits, "one prior LLR per bit");
    let prior: Vec<f64> = prior.iter().map(|&v| clamp_llr(v)).collect();
    let inv = 1.0 / eff.kappa2;
    let metric: Vec<f64> = (0..c.size())
        .map(|i| {
            let d = (u - eff.omega * c.point(i)).norm_sqr();
            let log_p: f64 = (0..bits).map(|l| -softplus(-c.bit_sign(i, l) * prior[l])).sum();
            let m = -d * inv + log_p;
            if m.is_nan() {
                f64::NEG_INFINITY
            } else {
                m
            }
        })
        .collect();
    (0..bits)
        .map(|l| {
            let (mut num, mut den) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (i, &m) in metric.iter().enumerate() {
                if c.bit(i, l) == 0 {
                    num = log_add(num, m);
                } else {
                    den = log_add(den, m);
                }
            }
            num - den - prior[l]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IddConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Adds residual multi-user interference to `kappa2`.
    pub residual_mui: bool,
    pub sac: SacConfig,
}

impl Default for IddConfig {
    fn default() -> Self {
        Self { outer_iters: 3, inner_iters: 10, residual_mui: false, sac: SacConfig::default() }
    }
}

/// Data phase of one coherence block: every UE sends one codeword.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub rx: Receiver<'a>,
    /// `y_t` for each symbol interval.
    pub received: &'a [CVector],
    /// Power-scaled transmitted symbols per interval (used by the genie).
    pub symbols: &'a [Vec<Complex64>],
    /// Message bits per UE, for error counting.
    pub messages: &'a [Vec<u8>],
    pub code: &'a LdpcCode,
    pub constellation: &'a Constellation,
}

impl Frame<'_> {
    fn validate(&self) -> Result<()> {
        let k = self.rx.num_ues();
        let bps = self.constellation.bits_per_symbol();
        if self.code.length() % bps != 0 {
            return Err(Error::Dimension(format!(
                "codeword length {} is not a multiple of {bps} bits per symbol",
                self.code.length()
            )));
        }
        let t = self.code.length() / bps;
        if self.received.len() != t || self.symbols.len() != t {
            return Err(Error::Dimension(format!(
                "frame needs {t} symbol intervals, got {} received and {} transmitted",
                self.received.len(),
                self.symbols.len()
            )));
        }
        if self.messages.len() != k || self.messages.iter().any(|m| m.len() != self.code.message_len()) {
            return Err(Error::Dimension("one message of the code's length per UE".into()));
        }
        Ok(())
    }
}

/// Loop state between outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct IddState {
    pub iter: usize,
    /// `Lambda_E` per UE and coded bit.
    pub llr_extrinsic_det: Vec<Vec<f64>>,
    /// `Lambda_c` per UE and coded bit (decoder extrinsic fed back).
    pub llr_prior_from_dec: Vec<Vec<f64>>,
    /// Message-bit errors after each completed iteration.
    pub history: Vec<u64>,
}

impl IddState {
    pub fn new(num_ues: usize, code_len: usize) -> Self {
        Self {
            iter: 0,
            llr_extrinsic_det: vec![vec![0.0; code_len]; num_ues],
            llr_prior_from_dec: vec![vec![0.0; code_len]; num_ues],
            history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IddOutcome {
    /// Message-bit errors summed over UEs, one entry per outer iteration.
    /// After an early exit the last value is repeated.
    pub errors_per_iter: Vec<u64>,
    /// Decoded message bits per UE after the last iteration run.
    pub decoded: Vec<Vec<u8>>,
    pub iterations_run: usize,
}

/// Prior-independent quantities of one frame, shared by all detectors.
#[derive(Debug, Clone)]
pub struct IddSession<'a> {
    frame: Frame<'a>,
    base_bank: FilterBank,
    base_eff: Vec<EffectiveAwgn>,
    noise: NoiseModel,
}

impl<'a> IddSession<'a> {
    pub fn new(frame: Frame<'a>) -> Result<Self> {
        frame.validate()?;
        let rx = frame.rx;
        let noise = NoiseModel::new(&rx);
        let base_bank = FilterBank::build(&rx, &InterferenceProfile::uninformed(rx.rho))?;
        let base_eff = (0..rx.num_ues())
            .map(|k| noise.effective_channel(&rx, k, &base_bank.filters[k], None))
            .collect::<Result<_>>()?;
        Ok(Self { frame, base_bank, base_eff, noise })
    }

    pub fn run(&self, kind: DetectorKind, cfg: &IddConfig) -> Result<IddOutcome> {
        if cfg.outer_iters == 0 {
            return Err(Error::Config("at least one IDD iteration is required".into()));
        }
        let f = &self.frame;
        let rx = &f.rx;
        let c = f.constellation;
        let k_count = rx.num_ues();
        let bps = c.bits_per_symbol();
        let n = f.code.length();
        let uninformed = InterferenceProfile::uninformed(rx.rho);
        let mut state = IddState::new(k_count, n);
        let mut decoder = DecoderState::new(f.code);
        let mut decoded = vec![Vec::new(); k_count];

        while state.iter < cfg.outer_iters {
            let informed = state.iter > 0 && kind.uses_priors();
            for (t, y) in f.received.iter().enumerate() {
                let bit_range = t * bps..(t + 1) * bps;
                let prof = match kind {
                    DetectorKind::Genie => InterferenceProfile::exact(&f.symbols[t]),
                    _ if informed => {
                        let stats = SoftSymbolStats::from_llrs(
                            state.llr_prior_from_dec.iter().map(|l| &l[bit_range.clone()]),
                            c,
                        );
                        InterferenceProfile::from_stats(&stats, rx.rho)
                    }
                    _ => uninformed.clone(),
                };
                let fresh;
                let bank = if kind == DetectorKind::Genie || informed {
                    fresh = FilterBank::build(rx, &prof)?;
                    &fresh
                } else {
                    &self.base_bank
                };
                let s_tilde: Vec<Complex64> = match kind {
                    DetectorKind::Mmse => bank.filters.iter().map(|w| w.dotc(y)).collect(),
                    DetectorKind::SoftIc | DetectorKind::Genie => {
                        (0..k_count).map(|k| soft_ic_detect(rx, k, y, &bank.filters[k], &prof.mean)).collect()
                    }
                    DetectorKind::List => list_detect(rx, bank, y, &prof, &cfg.sac, c).result.s_tilde,
                };
                for k in 0..k_count {
                    let eff = if std::ptr::eq(bank, &self.base_bank) && !cfg.residual_mui {
                        self.base_eff[k]
                    } else {
                        self.noise.effective_channel(rx, k, &bank.filters[k], cfg.residual_mui.then_some(&prof))?
                    };
                    let llr = extrinsic_llr(s_tilde[k], &eff, &state.llr_prior_from_dec[k][bit_range.clone()], c);
                    state.llr_extrinsic_det[k][bit_range.clone()].copy_from_slice(&llr);
                }
            }

            let mut errors = 0u64;
            let mut all_converged = true;
            for k in 0..k_count {
                let out = decoder.decode(&state.llr_extrinsic_det[k], cfg.inner_iters);
                all_converged &= out.converged;
                let msg = f.code.message_bits(&out.bits);
                errors += msg.iter().zip(&f.messages[k]).filter(|(a, b)| a != b).count() as u64;
                decoded[k] = msg;
                state.llr_prior_from_dec[k] = out.extrinsic;
            }
            state.history.push(errors);
            state.iter += 1;
            if all_converged {
                break;
            }
        }

        let iterations_run = state.iter;
        let mut errors_per_iter = state.history;
        let last = *errors_per_iter.last().expect("at least one iteration ran");
        errors_per_iter.resize(cfg.outer_iters, last);
        Ok(IddOutcome { errors_per_iter, decoded, iterations_run })
    }
}

/// Detection and decoding of one frame with a single detector.
pub fn idd_loop(frame: Frame, kind: DetectorKind, cfg: &IddConfig) -> Result<IddOutcome> {
    IddSession::new(frame)?.run(kind, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::ChannelEstimate;
    use crate::geometry::ChannelRealization;
    use crate::linalg::complex_normal;
    use crate::selection::SelectionMask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(u: Complex64, eff: &EffectiveAwgn, prior: &[f64], c: &Constellation) -> Vec<f64> {
        // direct probabilities, no log-domain tricks
        let p_bit = |v: f64, b: u8| {
            let p0 = 1.0 / (1.0 + (-v).exp());
            if b == 0 {
                p0
            } else {
                1.0 - p0
            }
        };
        (0..2)
            .map(|l| {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..4 {
                    let lik = (-(u - eff.omega * c.point(i)).norm_sqr() / eff.kappa2).exp();
                    let pr = p_bit(prior[0], c.bit(i, 0)) * p_bit(prior[1], c.bit(i, 1));
                    if c.bit(i, l) == 0 {
                        num += lik * pr;
                    } else {
                        den += lik * pr;
                    }
                }
                (num / den).ln() - prior[l]
            })
            .collect()
    }

    #[test]
    fn llrs_match_brute_force() {
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let u = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let eff = EffectiveAwgn {
                omega: Complex64::new(rng.random_range(0.2..1.5), rng.random_range(-0.5..0.5)),
                kappa2: rng.random_range(0.3..3.0),
            };
            let prior = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let got = extrinsic_llr(u, &eff, &prior, &c);
            let want = brute_force(u, &eff, &prior, &c);
            for l in 0..2 {
                assert!((got[l] - want[l]).abs() < 1e-9, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn gray_qpsk_closed_form() {
        let c = Constellation::qpsk();
        let eff = EffectiveAwgn { omega: Complex64::new(0.8, 0.3), kappa2: 0.7 };
        let u = Complex64::new(0.4, -0.9);
        let got = extrinsic_llr(u, &eff, &[0.0, 0.0], &c);
        let b1 = 2.0 * 2f64.sqrt() * (eff.omega.conj() * u).re / eff.kappa2;
        let b2 = 2.0 * 2f64.sqrt() * (eff.omega.conj() * u).im / eff.kappa2;
        assert!((got[0] - b1).abs() < 1e-12);
        assert!((got[1] - b2).abs() < 1e-12);
    }

    #[test]
    fn extrinsic_discipline_and_scale_invariance() {
        let c = Constellation::qpsk();
        let u = Complex64::new(0.3, 0.2);
        let wide = EffectiveAwgn { omega: Complex64::new(1.0, 0.0), kappa2: 1e300 };
        for v in extrinsic_llr(u, &wide, &[3.0, -7.0], &c) {
            assert!(v.abs() < 1e-10);
        }
        let eff = EffectiveAwgn { omega: Complex64::new(0.9, -0.2), kappa2: 0.4 };
        let s = Complex64::new(-1.7, 0.6);
        let scaled = EffectiveAwgn { omega: eff.omega * s, kappa2: eff.kappa2 * s.norm_sqr() };
        let a = extrinsic_llr(u, &eff, &[1.0, 2.0], &c);
        let b = extrinsic_llr(u * s, &scaled, &[1.0, 2.0], &c);
        for l in 0..2 {
            assert!((a[l] - b[l]).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_point_saturates() {
        let c = Constellation::qpsk();
        let eff = EffectiveAwgn { omega: Complex64::new(1.3, 0.0), kappa2: 1e-12 };
        let llr = extrinsic_llr(c.point(2) * eff.omega, &eff, &[0.0, 0.0], &c);
        // point 2 carries bits (1, 0)
        assert!(llr[0] < -1e9 && llr[1] > 1e9);
    }

    fn toy_rx_parts(seed: u64) -> (ChannelEstimate, SelectionMask, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(6, 3, |_, _| complex_normal(&mut rng));
        (ChannelEstimate::perfect(&ChannelRealization { g, antennas_per_ap: 1 }), SelectionMask::all(6, 3, 1), vec![1.0; 3])
    }

    #[test]
    fn perfect_csi_kappa_is_filtered_noise() {
        let (est, mask, rho) = toy_rx_parts(1);
        let rx = Receiver::new(&est, &mask, &rho, 0.3).unwrap();
        let bank = FilterBank::build(&rx, &InterferenceProfile::uninformed(&rho)).unwrap();
        for k in 0..3 {
            let eff = effective_channel(&rx, k, &bank.filters[k]).unwrap();
            assert!((eff.kappa2 - 0.3 * bank.filters[k].norm_squared()).abs() < 1e-12);
            assert!((eff.omega.re - bank.gains[k]).abs() < 1e-12 && eff.omega.im.abs() < 1e-12);
            let w2 = &bank.filters[k] * Complex64::new(0.0, 2.0);
            let eff2 = effective_channel(&rx, k, &w2).unwrap();
            assert!((eff2.omega - eff.omega * Complex64::new(0.0, -2.0)).norm() < 1e-12);
            assert!((eff2.kappa2 - 4.0 * eff.kappa2).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_mui_only_adds() {
        let (est, mask, rho) = toy_rx_parts(2);
        let rx = Receiver::new(&est, &mask, &rho, 0.3).unwrap();
        let prof = InterferenceProfile::uninformed(&rho);
        let bank = FilterBank::build(&rx, &prof).unwrap();
        let noise = NoiseModel::new(&rx);
        let plain = noise.effective_channel(&rx, 0, &bank.filters[0], None).unwrap();
        let with = noise.effective_channel(&rx, 0, &bank.filters[0], Some(&prof)).unwrap();
        assert!(with.kappa2 > plain.kappa2);
    }

    #[test]
    fn detector_names_round_trip() {
        for kind in [DetectorKind::Mmse, DetectorKind::SoftIc, DetectorKind::List, DetectorKind::Genie] {
            assert_eq!(kind.as_str().parse::<DetectorKind>().unwrap(), kind);
        }
        assert!("zf".parse::<DetectorKind>().is_err());
    }
}

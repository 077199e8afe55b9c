//! Monte-Carlo driver: per-trial pipeline, SNR calibration, sweeps and
//! BER bookkeeping.

mod config;
mod output;
pub mod validate;

use std::ops::AddAssign;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::Receiver;
use crate::estimation::{assign_pilots, mmse_estimate, receive_pilots, ChannelEstimate, PilotBook};
use crate::geometry::{
    draw_channel, large_scale_fading, place_network_with, ChannelRealization, LargeScaleCoefficients,
    NetworkGeometry, SpatialCorrelation,
};
use crate::idd::{DetectorKind, Frame, IddSession};
use crate::ldpc::LdpcCode;
use crate::linalg::{complex_normal_vector, CMatrix, CVector};
use crate::selection::{build_selection, ApMode, SelectionMask};
use crate::soft::Constellation;
use crate::{Error, Result};

pub use config::{SimConfig, SnrMode};
pub use output::{dump_scenario, plot_script, read_csv, write_csv, write_plot_script};

const GEOMETRY_STREAM: u64 = 0;
const CHANNEL_STREAM: u64 = 1;
const PILOT_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn db_to_snr(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// `sigma2 = tr(G diag(rho) G^H) / (snr N L K)` on the unmasked channel.
pub fn snr_to_noise(g: &CMatrix, rho: &[f64], snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) || !snr_linear.is_finite() {
        return Err(Error::Config(format!("SNR must be positive and finite, got {snr_linear}")));
    }
    if rho.len() != g.ncols() {
        return Err(Error::Dimension("one data power per channel column".into()));
    }
    let energy: f64 = g.column_iter().zip(rho).map(|(col, p)| p * col.norm_squared()).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(energy / (snr_linear * (g.nrows() * g.ncols()) as f64))
}

/// Expected-energy variant: `N sum_{l,k} beta_lk rho_k` replaces the trace.
pub fn snr_to_noise_large_scale(beta: &nalgebra::DMatrix<f64>, antennas_per_ap: usize, rho: &[f64], snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) || !snr_linear.is_finite() {
        return Err(Error::Config(format!("SNR must be positive and finite, got {snr_linear}")));
    }
    let energy: f64 = beta.column_iter().zip(rho).map(|(col, p)| p * antennas_per_ap as f64 * col.sum()).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(energy / (snr_linear * (beta.nrows() * antennas_per_ap * beta.ncols()) as f64))
}

/// Everything drawn for one coherence block before the data phase.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: NetworkGeometry,
    pub large_scale: LargeScaleCoefficients,
    pub channel: ChannelRealization,
    pub pilots: Option<PilotBook>,
    pub estimate: ChannelEstimate,
    pub rho: Vec<f64>,
    pub sigma2: f64,
}

impl Scenario {
    pub fn mask(&self, cfg: &SimConfig, mode: ApMode) -> SelectionMask {
        build_selection(&self.large_scale.beta, &cfg.selection(mode), cfg.antennas_per_ap)
    }
}

pub fn draw_scenario(cfg: &SimConfig, snr_db: f64, seed: u64) -> Result<Scenario> {
    let mut geo_rng = stream(if cfg.fixed_geometry { cfg.seed } else { seed }, GEOMETRY_STREAM);
    let geometry = place_network_with(&mut geo_rng, &cfg.geometry())?;
    let large_scale = large_scale_fading(&geometry, cfg.shadow_std_db, &mut geo_rng);
    let corr = SpatialCorrelation::from_large_scale(&large_scale, cfg.antennas_per_ap, cfg.correlation());
    let channel = draw_channel(&corr, &mut stream(seed, CHANNEL_STREAM));
    let rho = cfg.data_powers();
    let snr = db_to_snr(snr_db);
    let sigma2 = match cfg.snr_mode {
        SnrMode::Instantaneous => snr_to_noise(&channel.g, &rho, snr)?,
        SnrMode::LargeScale => snr_to_noise_large_scale(&large_scale.beta, cfg.antennas_per_ap, &rho, snr)?,
    };
    let (pilots, estimate) = if cfg.perfect_csi {
        (None, ChannelEstimate::perfect(&channel))
    } else {
        let mut rng = stream(seed, PILOT_STREAM);
        let book = assign_pilots(cfg.num_ues, cfg.pilot_len, cfg.pilot_power_w, &mut rng)?;
        let obs = receive_pilots(&channel, &corr, &book, sigma2, &mut rng)?;
        let est = mmse_estimate(&obs, &corr, &book)?;
        (Some(book), est)
    };
    Ok(Scenario { geometry, large_scale, channel, pilots, estimate, rho, sigma2 })
}

/// Coded data phase: one codeword per UE, QPSK, AWGN.
#[derive(Debug, Clone)]
pub struct DataBlock {
    pub messages: Vec<Vec<u8>>,
    /// Power-scaled symbols `x_t`, one vector per symbol interval.
    pub symbols: Vec<Vec<Complex64>>,
    pub received: Vec<CVector>,
}

pub fn transmit_data(scn: &Scenario, code: &LdpcCode, c: &Constellation, seed: u64) -> Result<DataBlock> {
    let mut rng = stream(seed, DATA_STREAM);
    let k_count = scn.rho.len();
    let bps = c.bits_per_symbol();
    let t_count = code.length() / bps;
    let mut messages = Vec::with_capacity(k_count);
    let mut points = Vec::with_capacity(k_count);
    for _ in 0..k_count {
        let msg: Vec<u8> = (0..code.message_len()).map(|_| rng.random_range(0..2u8)).collect();
        points.push(c.modulate(&code.encode(&msg)?));
        messages.push(msg);
    }
    let amp: Vec<f64> = scn.rho.iter().map(|p| p.sqrt()).collect();
    let noise_std = Complex64::new(scn.sigma2.sqrt(), 0.0);
    let mut symbols = Vec::with_capacity(t_count);
    let mut received = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let x: Vec<Complex64> = (0..k_count).map(|k| points[k][t] * amp[k]).collect();
        let y = &scn.channel.g * CVector::from_column_slice(&x) + complex_normal_vector(scn.channel.num_antennas(), &mut rng) * noise_std;
        symbols.push(x);
        received.push(y);
    }
    Ok(DataBlock { messages, symbols, received })
}

/// Message-bit error counts of one trial, indexed by
/// `(mode, detector, iteration)` in config order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialCounts {
    pub errors: Vec<u64>,
}

impl TrialCounts {
    pub fn zeros(cfg: &SimConfig) -> Self {
        Self { errors: vec![0; cfg.ap_modes.len() * cfg.detectors.len() * cfg.idd_iters] }
    }

    pub fn index(cfg: &SimConfig, mode: usize, det: usize, iter: usize) -> usize {
        (mode * cfg.detectors.len() + det) * cfg.idd_iters + iter
    }
}

impl AddAssign<&TrialCounts> for TrialCounts {
    fn add_assign(&mut self, rhs: &TrialCounts) {
        self.errors.iter_mut().zip(&rhs.errors).for_each(|(a, b)| *a += b);
    }
}

/// One coherence block at one SNR, shared by every AP mode and detector.
pub fn run_trial(cfg: &SimConfig, code: &LdpcCode, snr_db: f64, seed: u64) -> Result<TrialCounts> {
    let c = Constellation::qpsk();
    let scn = draw_scenario(cfg, snr_db, seed)?;
    let data = transmit_data(&scn, code, &c, seed)?;
    let idd = cfg.idd();
    let mut counts = TrialCounts::zeros(cfg);
    for (mi, &mode) in cfg.ap_modes.iter().enumerate() {
        let mask = scn.mask(cfg, mode);
        let rx = Receiver::new(&scn.estimate, &mask, &scn.rho, scn.sigma2)?;
        let frame = Frame {
            rx,
            received: &data.received,
            symbols: &data.symbols,
            messages: &data.messages,
            code,
            constellation: &c,
        };
        let session = IddSession::new(frame)?;
        for (di, &det) in cfg.detectors.iter().enumerate() {
            let out = session.run(det, &idd)?;
            for (it, e) in out.errors_per_iter.iter().enumerate() {
                counts.errors[TrialCounts::index(cfg, mi, di, it)] = *e;
            }
        }
    }
    Ok(counts)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub ap_mode: ApMode,
    /// 1-based outer iteration.
    pub idd_iter: usize,
    pub trials: u64,
    pub bits_total: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seed_base: u64,
}

impl BerRecord {
    fn key(&self) -> (u64, DetectorKind, ApMode, usize) {
        (self.snr_db.to_bits(), self.detector, self.ap_mode, self.idd_iter)
    }

    /// Pools two records of the same point measured on disjoint trials.
    pub fn merge(&self, other: &BerRecord) -> Result<BerRecord> {
        if self.key() != other.key() {
            return Err(Error::Config("cannot merge records of different points".into()));
        }
        let bits_total = self.bits_total + other.bits_total;
        let bit_errors = self.bit_errors + other.bit_errors;
        Ok(BerRecord {
            trials: self.trials + other.trials,
            bits_total,
            bit_errors,
            ber: ratio(bit_errors, bits_total),
            seed_base: self.seed_base.min(other.seed_base),
            ..self.clone()
        })
    }
}

fn ratio(errors: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        errors as f64 / total as f64
    }
}

/// All trials of one SNR point, in parallel over trials.
pub fn run_point(cfg: &SimConfig, code: &LdpcCode, snr_db: f64) -> Result<Vec<BerRecord>> {
    let total = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, code, snr_db, cfg.seed.wrapping_add(i)))
        .try_reduce(
            || TrialCounts::zeros(cfg),
            |mut a, b| {
                a += &b;
                Ok(a)
            },
        )?;
    let bits_total = cfg.trials * (cfg.num_ues * code.message_len()) as u64;
    let mut records = Vec::with_capacity(total.errors.len());
    for (mi, &ap_mode) in cfg.ap_modes.iter().enumerate() {
        for (di, &detector) in cfg.detectors.iter().enumerate() {
            for it in 0..cfg.idd_iters {
                let bit_errors = total.errors[TrialCounts::index(cfg, mi, di, it)];
                records.push(BerRecord {
                    snr_db,
                    detector,
                    ap_mode,
                    idd_iter: it + 1,
                    trials: cfg.trials,
                    bits_total,
                    bit_errors,
                    ber: ratio(bit_errors, bits_total),
                    seed_base: cfg.seed,
                });
            }
        }
    }
    Ok(records)
}

/// Full grid: SNR x AP mode x detector x IDD iteration.
pub fn sweep_with_code(cfg: &SimConfig, code: &LdpcCode) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    cfg.validate_code(code)?;
    let mut out = Vec::new();
    for &snr in &cfg.snr_db {
        log::info!("SNR {snr} dB: {} trials", cfg.trials);
        out.extend(run_point(cfg, code, snr)?);
    }
    Ok(out)
}

pub fn sweep(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    sweep_with_code(cfg, &cfg.load_code()?)
}

/// Pools two sweeps of the same grid record by record.
pub fn merge_sweeps(a: &[BerRecord], b: &[BerRecord]) -> Result<Vec<BerRecord>> {
    if a.len() != b.len() {
        return Err(Error::Config("sweeps cover different grids".into()));
    }
    a.iter().zip(b).map(|(x, y)| x.merge(y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            num_aps: 8,
            num_ues: 2,
            trials: 2,
            idd_iters: 2,
            snr_db: vec![0.0, 10.0],
            ..SimConfig::default()
        }
    }

    #[test]
    fn unit_snr_case() {
        let g = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let s = snr_to_noise(&g, &[1.0, 1.0], 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        let s2 = snr_to_noise(&g, &[2.0, 2.0], 1.0).unwrap();
        assert!((s2 - 2.0).abs() < 1e-15);
        assert!(matches!(snr_to_noise(&CMatrix::zeros(2, 2), &[1.0, 1.0], 1.0), Err(Error::ZeroChannel)));
        assert!(snr_to_noise(&g, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn snr_inverse_identity() {
        let cfg = SimConfig::default();
        let scn = draw_scenario(&cfg, 3.0, 11).unwrap();
        let energy: f64 = scn.channel.g.norm_squared();
        let back = energy / (scn.sigma2 * (32 * 8) as f64);
        assert!((back / db_to_snr(3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = small();
        let code = LdpcCode::default_code();
        assert_eq!(run_trial(&cfg, &code, 0.0, 5).unwrap(), run_trial(&cfg, &code, 0.0, 5).unwrap());
    }

    #[test]
    fn noiseless_perfect_csi_is_error_free() {
        let cfg = SimConfig { perfect_csi: true, ..small() };
        let code = LdpcCode::default_code();
        let counts = run_trial(&cfg, &code, 80.0, 3).unwrap();
        let all = cfg.ap_modes.iter().position(|&m| m == ApMode::All).unwrap();
        for di in 0..cfg.detectors.len() {
            for it in 0..cfg.idd_iters {
                assert_eq!(counts.errors[TrialCounts::index(&cfg, all, di, it)], 0);
            }
        }
    }

    #[test]
    fn sweep_shape_and_bit_accounting() {
        let cfg = small();
        let records = sweep(&cfg).unwrap();
        assert_eq!(records.len(), 2 * 3 * 2 * 2);
        for r in &records {
            assert_eq!(r.bits_total, 2 * 2 * 128);
            assert_eq!(r.ber, r.bit_errors as f64 / r.bits_total as f64);
        }
        let empty = SimConfig { snr_db: vec![], ..small() };
        assert!(sweep(&empty).unwrap().is_empty());
    }

    #[test]
    fn half_sweeps_merge_into_the_full_sweep() {
        let full = SimConfig { trials: 4, snr_db: vec![0.0], ..small() };
        let a = SimConfig { trials: 2, ..full.clone() };
        let b = SimConfig { trials: 2, seed: full.seed + 2, ..full.clone() };
        let merged = merge_sweeps(&sweep(&a).unwrap(), &sweep(&b).unwrap()).unwrap();
        assert_eq!(merged, sweep(&full).unwrap());
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{CorrelationModel, GeometryConfig};
use crate::idd::{DetectorKind, IddConfig};
use crate::ldpc::LdpcCode;
use crate::list::{SacConfig, DEFAULT_D_TH};
use crate::selection::{ApMode, SelectionPolicy};
use crate::soft::Constellation;
use crate::{Error, Result};

/// How the noise power follows from the requested SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnrMode {
    /// `tr(G diag(rho) G^H)` of the drawn channel.
    #[default]
    Instantaneous,
    /// Its expectation `N sum_{l,k} beta_lk rho_k` over fast fading.
    LargeScale,
}

/// Flat key-value simulation setup. Every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub area_side_m: f64,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    pub ap_height_m: f64,
    pub shadow_std_db: f64,
    /// Exponential correlation coefficient between antennas of one AP.
    pub correlation_r: f64,

    pub pilot_len: usize,
    pub coherence_len: usize,
    pub data_len: usize,
    pub pilot_power_w: f64,
    pub data_power_w: f64,
    /// Optional per-UE data powers; overrides `data_power_w`.
    pub data_powers_w: Option<Vec<f64>>,

    pub detectors: Vec<DetectorKind>,
    pub ap_modes: Vec<ApMode>,
    pub beta_th_db: f64,
    pub d_th: f64,
    pub list_size: usize,
    pub idd_iters: usize,
    pub inner_iters: usize,
    pub residual_mui: bool,

    pub snr_db: Vec<f64>,
    pub snr_mode: SnrMode,
    pub trials: u64,
    pub seed: u64,
    /// Keep AP/UE positions and shadowing from `seed` for every trial.
    pub fixed_geometry: bool,
    /// Detect with the true channel and no estimation error.
    pub perfect_csi: bool,
    pub ldpc_file: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let g = GeometryConfig::default();
        Self {
            area_side_m: g.area_side_m,
            num_aps: g.num_aps,
            antennas_per_ap: g.antennas_per_ap,
            num_ues: g.num_ues,
            ap_height_m: g.ap_height_m,
            shadow_std_db: 4.0,
            correlation_r: 0.0,
            pilot_len: 10,
            coherence_len: 200,
            data_len: 190,
            pilot_power_w: 0.1,
            data_power_w: 1.0,
            data_powers_w: None,
            detectors: DetectorKind::ALL.to_vec(),
            ap_modes: vec![ApMode::All, ApMode::Sel],
            beta_th_db: -60.0,
            d_th: DEFAULT_D_TH,
            list_size: 4,
            idd_iters: 3,
            inner_iters: 10,
            residual_mui: false,
            snr_db: vec![-10.0, -8.0, -6.0, -4.0, -2.0, 0.0],
            snr_mode: SnrMode::Instantaneous,
            trials: 1000,
            seed: 1,
            fixed_geometry: false,
            perfect_csi: false,
            ldpc_file: None,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        // relative code paths are taken relative to the config file
        if let (Some(p), Some(dir)) = (cfg.ldpc_file.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            area_side_m: self.area_side_m,
            num_aps: self.num_aps,
            antennas_per_ap: self.antennas_per_ap,
            num_ues: self.num_ues,
            ap_height_m: self.ap_height_m,
        }
    }

    pub fn correlation(&self) -> CorrelationModel {
        CorrelationModel::Exponential { r: self.correlation_r }
    }

    pub fn data_powers(&self) -> Vec<f64> {
        self.data_powers_w.clone().unwrap_or_else(|| vec![self.data_power_w; self.num_ues])
    }

    pub fn selection(&self, mode: ApMode) -> SelectionPolicy {
        SelectionPolicy { mode, beta_th_db: self.beta_th_db }
    }

    pub fn idd(&self) -> IddConfig {
        IddConfig {
            outer_iters: self.idd_iters,
            inner_iters: self.inner_iters,
            residual_mui: self.residual_mui,
            sac: SacConfig { d_th: self.d_th, list_size: self.list_size },
        }
    }

    pub fn load_code(&self) -> Result<LdpcCode> {
        match &self.ldpc_file {
            Some(p) => LdpcCode::from_alist_file(p),
            None => Ok(LdpcCode::default_code()),
        }
    }

    /// Checks everything that does not need the code.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_aps == 0 {
            return bad("no APs".into());
        }
        if self.num_ues == 0 {
            return bad("no UEs".into());
        }
        if self.antennas_per_ap == 0 {
            return bad("antennas_per_ap must be at least 1".into());
        }
        if !(self.area_side_m > 0.0) {
            return bad(format!("area_side_m must be positive, got {}", self.area_side_m));
        }
        if !(self.ap_height_m >= 0.0) || !(self.shadow_std_db >= 0.0) {
            return bad("ap_height_m and shadow_std_db must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.correlation_r) {
            return bad(format!("correlation_r must lie in [0, 1), got {}", self.correlation_r));
        }
        if self.pilot_len == 0 {
            return bad("pilot_len must be at least 1".into());
        }
        if self.pilot_len + self.data_len > self.coherence_len {
            return bad(format!(
                "pilot_len + data_len = {} exceeds coherence_len = {}",
                self.pilot_len + self.data_len,
                self.coherence_len
            ));
        }
        if !(self.pilot_power_w > 0.0) {
            return bad("pilot_power_w must be positive".into());
        }
        let powers = self.data_powers();
        if powers.len() != self.num_ues || powers.iter().any(|p| !(*p > 0.0)) {
            return bad(format!("need {} positive data powers", self.num_ues));
        }
        if self.detectors.is_empty() || self.ap_modes.is_empty() {
            return bad("at least one detector and one AP mode are required".into());
        }
        if self.beta_th_db.is_nan() {
            return bad("beta_th_db is NaN".into());
        }
        if !(self.d_th >= 0.0) {
            return bad(format!("d_th must be non-negative, got {}", self.d_th));
        }
        if self.list_size == 0 || self.list_size > Constellation::qpsk().size() {
            return bad(format!("list_size must be between 1 and 4, got {}", self.list_size));
        }
        if self.idd_iters == 0 || self.inner_iters == 0 {
            return bad("idd_iters and inner_iters must be at least 1".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR grid must be finite".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        Ok(())
    }

    /// Checks that one codeword per UE fits into the data phase.
    pub fn validate_code(&self, code: &LdpcCode) -> Result<()> {
        let bps = Constellation::qpsk().bits_per_symbol();
        if code.length() % bps != 0 || code.length() / bps > self.data_len {
            return Err(Error::Config(format!(
                "a {}-bit codeword needs {} QPSK symbols but data_len is {}",
                code.length(),
                code.length().div_ceil(bps),
                self.data_len
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        cfg.validate_code(&LdpcCode::default_code()).unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = SimConfig::from_toml_str("num_ues = 4\ndetectors = [\"softic\"]\nap_modes = [\"all\"]\nbeta_th_db = -inf\n").unwrap();
        assert_eq!(cfg.num_ues, 4);
        assert_eq!(cfg.detectors, vec![DetectorKind::SoftIc]);
        assert_eq!(cfg.beta_th_db, f64::NEG_INFINITY);
        assert_eq!(cfg.num_aps, 32);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(SimConfig::from_toml_str("num_antennas = 3").is_err());
        let cfg = SimConfig { pilot_len: 20, ..SimConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { data_len: 100, coherence_len: 200, ..SimConfig::default() };
        cfg.validate().unwrap();
        assert!(cfg.validate_code(&LdpcCode::default_code()).is_err());
        assert!(SimConfig { list_size: 5, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { num_aps: 0, ..SimConfig::default() }.validate().is_err());
    }
}

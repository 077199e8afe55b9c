//! Network geometry, large-scale fading, spatial correlation and
//! small-scale channel draws.
//!
//! Antenna indexing in every stacked vector is AP-major: antenna `n` of AP
//! `l` sits at row `l * N + n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::{complex_normal_vector, psd_sqrt, CMatrix};
use crate::{Error, Result};

/// Pathloss intercept of the urban-microcell model at 1 m.
pub const PATHLOSS_INTERCEPT_DB: f64 = -30.5;
/// Pathloss exponent times ten.
pub const PATHLOSS_SLOPE_DB: f64 = 36.7;
/// Distances below the 1 m reference are clamped.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub area_side_m: f64,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    /// Height of the APs above the UEs.
    pub ap_height_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { area_side_m: 1000.0, num_aps: 32, antennas_per_ap: 1, num_ues: 8, ap_height_m: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    pub area_side_m: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub antennas_per_ap: usize,
    pub ap_height_m: f64,
}

impl NetworkGeometry {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_aps() * self.antennas_per_ap
    }

    /// 3D distance between AP `l` and UE `k`.
    pub fn distance(&self, l: usize, k: usize) -> f64 {
        let [ax, ay] = self.ap_positions[l];
        let [ux, uy] = self.ue_positions[k];
        ((ax - ux).powi(2) + (ay - uy).powi(2) + self.ap_height_m.powi(2)).sqrt()
    }
}

/// Places APs and UEs uniformly at random in the `D x D` square.
pub fn place_network(seed: u64, cfg: &GeometryConfig) -> Result<NetworkGeometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_network_with(&mut rng, cfg)
}

pub fn place_network_with<R: Rng + ?Sized>(rng: &mut R, cfg: &GeometryConfig) -> Result<NetworkGeometry> {
    if cfg.num_aps == 0 {
        return Err(Error::Config("no APs".into()));
    }
    if cfg.num_ues == 0 {
        return Err(Error::Config("no UEs".into()));
    }
    if cfg.antennas_per_ap == 0 {
        return Err(Error::Config("APs need at least one antenna".into()));
    }
    if !(cfg.area_side_m > 0.0) || !cfg.area_side_m.is_finite() {
        return Err(Error::Config(format!("area side must be positive, got {}", cfg.area_side_m)));
    }
    if cfg.num_aps * cfg.antennas_per_ap < cfg.num_ues {
        log::warn!(
            "{} receive antennas for {} UEs: detection is not well posed",
            cfg.num_aps * cfg.antennas_per_ap,
            cfg.num_ues
        );
    }
    let d = cfg.area_side_m;
    let point = |rng: &mut R| [rng.random::<f64>() * d, rng.random::<f64>() * d];
    let ap_positions = (0..cfg.num_aps).map(|_| point(rng)).collect();
    let ue_positions = (0..cfg.num_ues).map(|_| point(rng)).collect();
    Ok(NetworkGeometry {
        area_side_m: d,
        ap_positions,
        ue_positions,
        antennas_per_ap: cfg.antennas_per_ap,
        ap_height_m: cfg.ap_height_m,
    })
}

/// Urban-microcell large-scale gain in dB for distance `distance_m` and
/// shadowing draw `shadow_db`.
pub fn pathloss_db(distance_m: f64, shadow_db: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * d.log10() + shadow_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// `beta[(l, k)]` is the linear large-scale gain between AP `l` and UE `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleCoefficients {
    pub beta: DMatrix<f64>,
    pub shadow_db: DMatrix<f64>,
}

impl LargeScaleCoefficients {
    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.beta.ncols()
    }

    pub fn beta_db(&self, l: usize, k: usize) -> f64 {
        linear_to_db(self.beta[(l, k)])
    }
}

/// Draws i.i.d. `N(0, shadow_std_db^2)` shadowing and evaluates the pathloss.
pub fn large_scale_fading<R: Rng + ?Sized>(
    geom: &NetworkGeometry,
    shadow_std_db: f64,
    rng: &mut R,
) -> LargeScaleCoefficients {
    let (l_count, k_count) = (geom.num_aps(), geom.num_ues());
    let shadow = Normal::new(0.0, shadow_std_db.max(0.0)).expect("finite std");
    let mut shadow_db = DMatrix::zeros(l_count, k_count);
    let mut beta = DMatrix::zeros(l_count, k_count);
    for k in 0..k_count {
        for l in 0..l_count {
            let s = shadow.sample(rng);
            shadow_db[(l, k)] = s;
            beta[(l, k)] = db_to_linear(pathloss_db(geom.distance(l, k), s));
        }
    }
    LargeScaleCoefficients { beta, shadow_db }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationModel {
    /// `R[m, n] = r^|m - n|` with `0 <= r < 1`.
    Exponential { r: f64 },
}

impl Default for CorrelationModel {
    fn default() -> Self {
        CorrelationModel::Exponential { r: 0.0 }
    }
}

/// Per-AP `N x N` spatial correlation scaled so that `trace / N = beta`.
pub fn correlation_matrix(beta: f64, n: usize, model: CorrelationModel) -> CMatrix {
    match model {
        CorrelationModel::Exponential { r } => CMatrix::from_fn(n, n, |i, j| {
            let lag = i.abs_diff(j) as i32;
            Complex64::new(beta * r.powi(lag), 0.0)
        }),
    }
}

/// Correlation blocks `Omega_{kl}` for every (UE, AP) pair, with cached
/// square-root factors for channel generation.
#[derive(Debug, Clone)]
pub struct SpatialCorrelation {
    num_aps: usize,
    num_ues: usize,
    antennas_per_ap: usize,
    blocks: Vec<CMatrix>,
    sqrt_blocks: Vec<CMatrix>,
}

impl SpatialCorrelation {
    /// `blocks[k * L + l]` holds `Omega_{kl}`.
    pub fn new(num_aps: usize, num_ues: usize, antennas_per_ap: usize, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != num_aps * num_ues {
            return Err(Error::Dimension(format!(
                "expected {} correlation blocks, got {}",
                num_aps * num_ues,
                blocks.len()
            )));
        }
        if let Some(b) = blocks.iter().find(|b| b.nrows() != antennas_per_ap || !b.is_square()) {
            return Err(Error::Dimension(format!(
                "correlation block is {}x{}, expected {antennas_per_ap}x{antennas_per_ap}",
                b.nrows(),
                b.ncols()
            )));
        }
        let sqrt_blocks = blocks.iter().map(psd_sqrt).collect();
        Ok(Self { num_aps, num_ues, antennas_per_ap, blocks, sqrt_blocks })
    }

    pub fn from_large_scale(ls: &LargeScaleCoefficients, antennas_per_ap: usize, model: CorrelationModel) -> Self {
        let (l_count, k_count) = (ls.num_aps(), ls.num_ues());
        let blocks = (0..k_count)
            .flat_map(|k| (0..l_count).map(move |l| (l, k)))
            .map(|(l, k)| correlation_matrix(ls.beta[(l, k)], antennas_per_ap, model))
            .collect();
        Self::new(l_count, k_count, antennas_per_ap, blocks).expect("consistent dimensions")
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }

    pub fn block(&self, k: usize, l: usize) -> &CMatrix {
        &self.blocks[k * self.num_aps + l]
    }

    fn sqrt_block(&self, k: usize, l: usize) -> &CMatrix {
        &self.sqrt_blocks[k * self.num_aps + l]
    }

    /// `trace(Omega_{kl}) / N`.
    pub fn beta(&self, k: usize, l: usize) -> f64 {
        self.block(k, l).trace().re / self.antennas_per_ap as f64
    }
}

/// True channel `G`, `NL x K`; column `k` stacks `g_{k1}, ..., g_{kL}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMatrix,
    pub antennas_per_ap: usize,
}

impl ChannelRealization {
    pub fn num_antennas(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.g.ncols()
    }

    pub fn num_aps(&self) -> usize {
        self.g.nrows() / self.antennas_per_ap
    }
}

/// Draws `g_{kl} = Omega_{kl}^{1/2} e` with `e ~ CN(0, I_N)` for every pair.
pub fn draw_channel<R: Rng + ?Sized>(corr: &SpatialCorrelation, rng: &mut R) -> ChannelRealization {
    let n = corr.antennas_per_ap;
    let mut g = CMatrix::zeros(corr.num_aps * n, corr.num_ues);
    for k in 0..corr.num_ues {
        for l in 0..corr.num_aps {
            let e = complex_normal_vector(n, rng);
            let block = corr.sqrt_block(k, l) * e;
            g.view_mut((l * n, k), (n, 1)).copy_from(&block);
        }
    }
    ChannelRealization { g, antennas_per_ap: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, relative_frobenius};

    #[test]
    fn placement_stays_in_square_and_is_seeded() {
        let cfg = GeometryConfig { num_aps: 32, num_ues: 8, ..Default::default() };
        let a = place_network(7, &cfg).unwrap();
        assert_eq!(a.num_aps(), 32);
        assert_eq!(a.num_ues(), 8);
        for p in a.ap_positions.iter().chain(&a.ue_positions) {
            assert!((0.0..=1000.0).contains(&p[0]) && (0.0..=1000.0).contains(&p[1]));
        }
        assert_eq!(a, place_network(7, &cfg).unwrap());
        assert_ne!(a, place_network(8, &cfg).unwrap());
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let no_aps = GeometryConfig { num_aps: 0, ..Default::default() };
        let err = place_network(1, &no_aps).unwrap_err();
        assert!(err.to_string().contains("no APs"));
        let flat = GeometryConfig { area_side_m: 0.0, ..Default::default() };
        assert!(place_network(1, &flat).is_err());
    }

    #[test]
    fn pathloss_reference_values() {
        assert!((pathloss_db(1.0, 0.0) + 30.5).abs() < 1e-12);
        assert!((pathloss_db(10.0, 0.0) + 67.2).abs() < 1e-12);
        assert!((pathloss_db(1.0, 4.0) + 26.5).abs() < 1e-12);
        // clamped below the reference distance
        assert_eq!(pathloss_db(0.2, 0.0), pathloss_db(1.0, 0.0));
    }

    #[test]
    fn stored_beta_reproduces_the_pathloss_formula() {
        let geom = place_network(3, &GeometryConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ls = large_scale_fading(&geom, 4.0, &mut rng);
        for l in 0..geom.num_aps() {
            for k in 0..geom.num_ues() {
                let expect = pathloss_db(geom.distance(l, k), ls.shadow_db[(l, k)]);
                assert!((ls.beta_db(l, k) - expect).abs() < 1e-9);
                assert!(ls.beta[(l, k)] > 0.0);
                assert!(geom.distance(l, k) >= 10.0);
            }
        }
    }

    #[test]
    fn correlation_matrix_cases() {
        let m = correlation_matrix(0.5, 1, CorrelationModel::default());
        assert_eq!(m[(0, 0)], Complex64::new(0.5, 0.0));
        let id = correlation_matrix(1.0, 4, CorrelationModel::Exponential { r: 0.0 });
        assert_eq!(id, CMatrix::identity(4, 4));
        let c = correlation_matrix(2.0, 2, CorrelationModel::Exponential { r: 0.5 });
        assert!((c.trace().re - 4.0).abs() < 1e-12);
        assert!((c[(0, 1)].norm() - 1.0).abs() < 1e-12);
        // eigenvalues of 2*[[1, .5], [.5, 1]] are 1 and 3
        assert!((min_eigenvalue(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_covariance_gives_zero_channel() {
        let corr = SpatialCorrelation::new(2, 1, 2, vec![CMatrix::zeros(2, 2); 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = draw_channel(&corr, &mut rng);
        assert!(ch.g.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn channel_draw_is_seeded() {
        let geom = place_network(3, &GeometryConfig::default()).unwrap();
        let ls = large_scale_fading(&geom, 4.0, &mut ChaCha8Rng::seed_from_u64(2));
        let corr = SpatialCorrelation::from_large_scale(&ls, 1, CorrelationModel::default());
        let a = draw_channel(&corr, &mut ChaCha8Rng::seed_from_u64(5));
        let b = draw_channel(&corr, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_covariance_matches_correlated_block() {
        let omega = correlation_matrix(1.5, 3, CorrelationModel::Exponential { r: 0.7 });
        let corr = SpatialCorrelation::new(1, 1, 3, vec![omega.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 20_000;
        let mut acc = CMatrix::zeros(3, 3);
        for _ in 0..draws {
            let g = draw_channel(&corr, &mut rng).g;
            acc += &g * g.adjoint();
        }
        acc /= Complex64::new(draws as f64, 0.0);
        assert!(relative_frobenius(&acc, &omega) < 0.02);
        assert!((corr.beta(0, 0) - 1.5).abs() < 1e-12);
    }
}

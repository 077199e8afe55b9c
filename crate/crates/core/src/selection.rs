//! Dynamic cooperation clustering: each UE is served by its master AP
//! (largest large-scale gain) plus every AP whose gain clears a threshold.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::linear_to_db;
use crate::linalg::{CVector, ZERO};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// Every AP serves every UE (`D_k = I`).
    #[serde(alias = "all-aps")]
    All,
    /// Master AP plus threshold rule.
    #[serde(alias = "aps-sel")]
    Sel,
}

impl ApMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ApMode::All => "all",
            ApMode::Sel => "sel",
        }
    }
}

impl fmt::Display for ApMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "all" | "all-aps" => Ok(ApMode::All),
            "sel" | "aps-sel" => Ok(ApMode::Sel),
            other => Err(Error::Config(format!("unknown AP mode '{other}' (expected all|sel)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionPolicy {
    pub mode: ApMode,
    /// Non-master APs serve a UE when their gain in dB is at least this.
    pub beta_th_db: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self { mode: ApMode::Sel, beta_th_db: -60.0 }
    }
}

/// `serve[(l, k)]` is true when AP `l` takes part in detecting UE `k`.
///
/// Stands for the block-diagonal `D_k` whose `l`-th block is `I_N` when AP
/// `l` serves UE `k` and `0_N` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    serve: DMatrix<bool>,
    antennas_per_ap: usize,
}

impl SelectionMask {
    pub fn new(serve: DMatrix<bool>, antennas_per_ap: usize) -> Self {
        Self { serve, antennas_per_ap }
    }

    pub fn all(num_aps: usize, num_ues: usize, antennas_per_ap: usize) -> Self {
        Self::new(DMatrix::from_element(num_aps, num_ues, true), antennas_per_ap)
    }

    pub fn num_aps(&self) -> usize {
        self.serve.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.serve.ncols()
    }

    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }

    pub fn serves(&self, l: usize, k: usize) -> bool {
        self.serve[(l, k)]
    }

    pub fn matrix(&self) -> &DMatrix<bool> {
        &self.serve
    }

    /// Antenna rows kept by `D_k`, ascending.
    pub fn serving_antennas(&self, k: usize) -> Vec<usize> {
        let n = self.antennas_per_ap;
        (0..self.num_aps()).filter(|&l| self.serve[(l, k)]).flat_map(|l| l * n..(l + 1) * n).collect()
    }

    pub fn serves_all(&self, k: usize) -> bool {
        self.serve.column(k).iter().all(|&s| s)
    }

    /// `D_l`: the UEs served by AP `l`.
    pub fn serving_set(&self, l: usize) -> Vec<usize> {
        (0..self.num_ues()).filter(|&k| self.serve[(l, k)]).collect()
    }

    /// APs that need a fronthaul link, i.e. serve at least one UE.
    pub fn active_aps(&self) -> usize {
        (0..self.num_aps()).filter(|&l| self.serve.row(l).iter().any(|&s| s)).count()
    }

    pub fn serving_links(&self) -> usize {
        self.serve.iter().filter(|&&s| s).count()
    }
}

/// Master AP of UE `k`: the largest gain, lowest index on ties.
pub fn select_master_ap(beta: &DMatrix<f64>, k: usize) -> usize {
    let col = beta.column(k);
    let mut best = 0;
    for l in 1..col.len() {
        if col[l] > col[best] {
            best = l;
        }
    }
    best
}

pub fn build_selection(beta: &DMatrix<f64>, policy: &SelectionPolicy, antennas_per_ap: usize) -> SelectionMask {
    let (l_count, k_count) = beta.shape();
    match policy.mode {
        ApMode::All => SelectionMask::all(l_count, k_count, antennas_per_ap),
        ApMode::Sel => {
            let mut serve = DMatrix::from_element(l_count, k_count, false);
            for k in 0..k_count {
                serve[(select_master_ap(beta, k), k)] = true;
                for l in 0..l_count {
                    if linear_to_db(beta[(l, k)]) >= policy.beta_th_db {
                        serve[(l, k)] = true;
                    }
                }
            }
            SelectionMask::new(serve, antennas_per_ap)
        }
    }
}

/// `D_k y`: zeroes the antenna blocks of APs not serving UE `k`.
pub fn apply_selection(mask: &SelectionMask, k: usize, y: &CVector) -> CVector {
    let n = mask.antennas_per_ap;
    let mut out = y.clone();
    for l in 0..mask.num_aps() {
        if !mask.serves(l, k) {
            out.rows_mut(l * n, n).fill(ZERO);
        }
    }
    out
}

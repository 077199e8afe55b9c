//! List-based soft-IC detection with a shadow-area constraint (SAC).
//!
//! UEs are detected one layer at a time, strongest first. Each layer's
//! estimate has the hard decisions of earlier layers subtracted, and the
//! prior means of layers not yet detected. When an estimate falls farther
//! than `d_th` from its nearest constellation point, the `M` nearest points
//! are each completed into a full selection vector by hard soft-IC
//! decisions on the remaining layers, and the vector with the smallest
//! masked residual `||D_k (y - G_hat phi)||^2` wins.
//!
//! Only the first unreliable layer branches. Every estimate reuses the
//! filter bank built for the symbol interval, so a frame costs `K` filter
//! constructions however often it branches.

use num_complex::Complex64;

use crate::detect::{normalize, DetectionResult, FilterBank, InterferenceProfile, Receiver};
use crate::linalg::{CMatrix, CVector};
use crate::soft::Constellation;

/// Reliability threshold from the simulation setup.
pub const DEFAULT_D_TH: f64 = 0.38;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacConfig {
    /// Distance threshold on the unit-energy constellation.
    pub d_th: f64,
    /// Candidate list size `M`.
    pub list_size: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self { d_th: DEFAULT_D_TH, list_size: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacDecision {
    pub distance: f64,
    pub nearest: usize,
    pub reliable: bool,
}

pub fn sac_reliability(u: Complex64, c: &Constellation, d_th: f64) -> SacDecision {
    let nearest = c.nearest(u);
    let distance = (u - c.point(nearest)).norm();
    SacDecision { distance, nearest, reliable: distance <= d_th }
}

/// Strongest-first order by `||D_k g_hat_k||`, ties by index.
pub fn detection_order(rx: &Receiver) -> Vec<usize> {
    let energy: Vec<f64> = (0..rx.num_ues())
        .map(|k| rx.mask.serving_antennas(k).iter().map(|&r| rx.est.g_hat[(r, k)].norm_sqr()).sum())
        .collect();
    let mut order: Vec<usize> = (0..rx.num_ues()).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]));
    order
}

/// Per-symbol-interval quantities shared by every layer and candidate:
/// `w_k^H y` and the cross responses `w_k^H g_hat_m`.
#[derive(Debug, Clone)]
pub struct ListContext<'a> {
    pub rx: &'a Receiver<'a>,
    pub bank: &'a FilterBank,
    pub prof: &'a InterferenceProfile,
    pub c: &'a Constellation,
    filtered: Vec<Complex64>,
    responses: CMatrix,
}

impl<'a> ListContext<'a> {
    pub fn new(
        rx: &'a Receiver<'a>,
        bank: &'a FilterBank,
        prof: &'a InterferenceProfile,
        c: &'a Constellation,
        y: &CVector,
    ) -> Self {
        let k_count = rx.num_ues();
        let filtered = bank.filters.iter().map(|w| w.dotc(y)).collect();
        let responses = CMatrix::from_fn(k_count, k_count, |k, m| bank.filters[k].dotc(&rx.est.g_hat.column(m)));
        Self { rx, bank, prof, c, filtered, responses }
    }

    fn scaled_point(&self, k: usize, idx: usize) -> Complex64 {
        self.c.point(idx) * self.rx.rho[k].sqrt()
    }

    /// Estimate of UE `k` with hard decisions `decided` cancelled and the
    /// prior means of the other undecided UEs removed.
    fn layer_estimate(&self, k: usize, decided: &[Option<usize>]) -> (Complex64, Complex64) {
        let mut s = self.filtered[k];
        for (m, d) in decided.iter().enumerate() {
            if m == k {
                continue;
            }
            let x = match d {
                Some(idx) => self.scaled_point(m, *idx),
                None => self.prof.mean[m],
            };
            if x.norm_sqr() > 0.0 {
                s -= self.responses[(k, m)] * x;
            }
        }
        (s, normalize(s, self.bank.gains[k], self.rx.rho[k]))
    }
}

/// Sequential detection state: the decisions taken so far along `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub order: Vec<usize>,
    /// Next position in `order` to detect.
    pub position: usize,
    pub decided: Vec<Option<usize>>,
    pub s_tilde: Vec<Complex64>,
    pub u: Vec<Complex64>,
}

impl LayerState {
    pub fn new(order: Vec<usize>) -> Self {
        let k = order.len();
        let zero = Complex64::new(0.0, 0.0);
        Self { order, position: 0, decided: vec![None; k], s_tilde: vec![zero; k], u: vec![zero; k] }
    }

    /// `y_check = y - sum_{decided t} g_hat_t x_hat_t`.
    pub fn residual(&self, ctx: &ListContext, y: &CVector) -> CVector {
        let mut r = y.clone();
        for (t, d) in self.decided.iter().enumerate() {
            if let Some(idx) = d {
                r -= ctx.rx.est.g_hat.column(t) * ctx.scaled_point(t, *idx);
            }
        }
        r
    }

    fn detect_next(&mut self, ctx: &ListContext) -> (usize, Complex64) {
        let k = self.order[self.position];
        let (s, u) = ctx.layer_estimate(k, &self.decided);
        self.s_tilde[k] = s;
        self.u[k] = u;
        (k, u)
    }

    fn commit(&mut self, k: usize, idx: usize) {
        self.decided[k] = Some(idx);
        self.position += 1;
    }

    pub fn is_done(&self) -> bool {
        self.position >= self.order.len()
    }
}

/// A complete candidate symbol vector `phi^m` with the soft estimates
/// observed while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionVector {
    pub symbols: Vec<usize>,
    pub s_tilde: Vec<Complex64>,
    pub u: Vec<Complex64>,
}

impl SelectionVector {
    pub fn scaled(&self, rho: &[f64], c: &Constellation) -> Vec<Complex64> {
        self.symbols.iter().zip(rho).map(|(&i, p)| c.point(i) * p.sqrt()).collect()
    }
}

/// Fixes `candidate` for the layer at `state.position` and completes the
/// later layers with hard soft-IC decisions using the same filters.
pub fn expand_candidate(ctx: &ListContext, state: &LayerState, candidate: usize) -> SelectionVector {
    let mut branch = state.clone();
    let k = branch.order[branch.position];
    branch.commit(k, candidate);
    while !branch.is_done() {
        let (q, u) = branch.detect_next(ctx);
        branch.commit(q, ctx.c.nearest(u));
    }
    SelectionVector {
        symbols: branch.decided.iter().map(|d| d.expect("all layers decided")).collect(),
        s_tilde: branch.s_tilde,
        u: branch.u,
    }
}

/// Masked residual `||D_k (y - G_hat phi)||^2`.
pub fn selection_residual(rx: &Receiver, k: usize, y: &CVector, phi: &[Complex64]) -> f64 {
    rx.mask
        .serving_antennas(k)
        .into_iter()
        .map(|r| {
            let pred: Complex64 = phi.iter().enumerate().map(|(m, &x)| rx.est.g_hat[(r, m)] * x).sum();
            (y[r] - pred).norm_sqr()
        })
        .sum()
}

/// Local ML choice among the candidates, lowest index on ties.
pub fn ml_select(rx: &Receiver, k: usize, y: &CVector, candidates: &[SelectionVector], c: &Constellation) -> usize {
    assert!(!candidates.is_empty(), "ml_select needs at least one candidate");
    let mut best = 0;
    let mut best_r = f64::INFINITY;
    for (m, cand) in candidates.iter().enumerate() {
        let r = selection_residual(rx, k, y, &cand.scaled(rx.rho, c));
        if r < best_r {
            best = m;
            best_r = r;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListDetection {
    pub result: DetectionResult,
    /// UE whose layer spawned the candidate list, if any did.
    pub branched_ue: Option<usize>,
}

pub fn list_detect(
    rx: &Receiver,
    bank: &FilterBank,
    y: &CVector,
    prof: &InterferenceProfile,
    cfg: &SacConfig,
    c: &Constellation,
) -> ListDetection {
    let ctx = ListContext::new(rx, bank, prof, c, y);
    let mut state = LayerState::new(detection_order(rx));
    let mut branched_ue = None;
    while !state.is_done() {
        let (k, u) = state.detect_next(&ctx);
        let sac = sac_reliability(u, c, cfg.d_th);
        if sac.reliable {
            state.commit(k, sac.nearest);
            continue;
        }
        let list = c.nearest_n(u, cfg.list_size.clamp(1, c.size()));
        let candidates: Vec<SelectionVector> = list.iter().map(|&cand| expand_candidate(&ctx, &state, cand)).collect();
        let best = &candidates[ml_select(rx, k, y, &candidates, c)];
        branched_ue = Some(k);
        let result = DetectionResult { s_tilde: best.s_tilde.clone(), u: best.u.clone(), hard: best.symbols.clone() };
        return ListDetection { result, branched_ue };
    }
    let hard = state.decided.iter().map(|d| d.expect("all layers decided")).collect();
    ListDetection { result: DetectionResult { s_tilde: state.s_tilde, u: state.u, hard }, branched_ue }
}

/// Sequential soft-IC with hard-decision feedback and no list.
pub fn sequential_soft_ic_detect(
    rx: &Receiver,
    bank: &FilterBank,
    y: &CVector,
    prof: &InterferenceProfile,
    c: &Constellation,
) -> DetectionResult {
    let ctx = ListContext::new(rx, bank, prof, c, y);
    let mut state = LayerState::new(detection_order(rx));
    while !state.is_done() {
        let (k, u) = state.detect_next(&ctx);
        state.commit(k, c.nearest(u));
    }
    let hard = state.decided.iter().map(|d| d.expect("all layers decided")).collect();
    DetectionResult { s_tilde: state.s_tilde, u: state.u, hard }
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

    #[test]
    fn sac_cases() {
        let c = Constellation::qpsk();
        let on = sac_reliability(c.point(2), &c, DEFAULT_D_TH);
        assert!(on.reliable && on.distance < 1e-15 && on.nearest == 2);
        let origin = sac_reliability(Complex64::new(0.0, 0.0), &c, DEFAULT_D_TH);
        // unit-energy QPSK points lie at distance 1 from the origin
        assert!((origin.distance - 1.0).abs() < 1e-15);
        assert!(!origin.reliable);
        assert!(sac_reliability(Complex64::new(40.0, -3.0), &c, f64::INFINITY).reliable);
    }

    fn toy(seed: u64, nl: usize, k: usize) -> (ChannelEstimate, SelectionMask, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(nl, k, |_, _| complex_normal(&mut rng));
        let est = ChannelEstimate::perfect(&ChannelRealization { g, antennas_per_ap: 1 });
        (est, SelectionMask::all(nl, k, 1), vec![1.0; k])
    }

    #[test]
    fn last_layer_candidate_needs_no_completion() {
        let (est, mask, rho) = toy(1, 4, 2);
        let c = Constellation::qpsk();
        let rx = Receiver::new(&est, &mask, &rho, 0.1).unwrap();
        let prof = InterferenceProfile::uninformed(&rho);
        let bank = FilterBank::build(&rx, &prof).unwrap();
        let y = est.g_hat.column(0) * c.point(1) + est.g_hat.column(1) * c.point(3);
        let ctx = ListContext::new(&rx, &bank, &prof, &c, &y);
        let order = detection_order(&rx);
        let mut state = LayerState::new(order.clone());
        let (k0, u0) = state.detect_next(&ctx);
        state.commit(k0, c.nearest(u0));
        let phi = expand_candidate(&ctx, &state, 2);
        assert_eq!(phi.symbols[order[1]], 2);
        assert_eq!(phi.symbols[k0], c.nearest(u0));
    }

    #[test]
    fn hard_slice_candidate_reproduces_plain_trajectory() {
        let (est, mask, rho) = toy(2, 6, 4);
        let c = Constellation::qpsk();
        let rx = Receiver::new(&est, &mask, &rho, 0.8).unwrap();
        let prof = InterferenceProfile::uninformed(&rho);
        let bank = FilterBank::build(&rx, &prof).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let y = crate::linalg::complex_normal_vector(6, &mut rng);
            let plain = sequential_soft_ic_detect(&rx, &bank, &y, &prof, &c);
            let ctx = ListContext::new(&rx, &bank, &prof, &c, &y);
            let mut state = LayerState::new(detection_order(&rx));
            let (k, u) = state.detect_next(&ctx);
            let phi = expand_candidate(&ctx, &state, c.nearest(u));
            assert_eq!(phi.symbols, plain.hard);
            assert_eq!(k, state.order[0]);
        }
    }

    #[test]
    fn ml_select_prefers_exact_match_and_single_candidate() {
        let (est, mask, rho) = toy(4, 5, 3);
        let c = Constellation::qpsk();
        let rx = Receiver::new(&est, &mask, &rho, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cands: Vec<SelectionVector> = (0..4)
            .map(|_| SelectionVector {
                symbols: (0..3).map(|_| rng.random_range(0..4)).collect(),
                s_tilde: vec![Complex64::new(0.0, 0.0); 3],
                u: vec![Complex64::new(0.0, 0.0); 3],
            })
            .collect();
        assert_eq!(ml_select(&rx, 0, &CVector::zeros(5), &cands[..1], &c), 0);
        let phi = cands[2].scaled(&rho, &c);
        let y = &est.g_hat * CVector::from_vec(phi.clone());
        let chosen = ml_select(&rx, 0, &y, &cands, &c);
        assert_eq!(cands[chosen].symbols, cands[2].symbols);
        assert!(selection_residual(&rx, 0, &y, &phi) < 1e-20);
    }

    #[test]
    fn zero_threshold_still_yields_constellation_vectors() {
        let (est, mask, rho) = toy(6, 6, 3);
        let c = Constellation::qpsk();
        let rx = Receiver::new(&est, &mask, &rho, 0.5).unwrap();
        let prof = InterferenceProfile::uninformed(&rho);
        let bank = FilterBank::build(&rx, &prof).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = SacConfig { d_th: 0.0, list_size: 4 };
        for _ in 0..20 {
            let y = crate::linalg::complex_normal_vector(6, &mut rng);
            let out = list_detect(&rx, &bank, &y, &prof, &cfg, &c);
            assert!(out.branched_ue.is_some());
            assert_eq!(out.result.hard.len(), 3);
            assert!(out.result.hard.iter().all(|&i| i < 4));
        }
    }
}

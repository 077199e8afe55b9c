//! Constellations and conversion of decoder LLRs into symbol priors,
//! means and variances.
//!
//! LLR sign convention: `L(b) = log P(b = 0) / P(b = 1)`, and bit value 0
//! maps to the antipodal value `+1`.

use num_complex::Complex64;

/// Magnitude at which LLRs are saturated before exponentiation.
pub const LLR_CLAMP: f64 = 30.0;

pub fn clamp_llr(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Unit-energy constellation with an explicit bit labeling.
///
/// `points[i]` carries label `i`; bit `l` of the label (0 = most
/// significant) is the `l`-th coded bit of the symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

impl Constellation {
    /// Gray QPSK: `(b1, b2) -> ((1 - 2 b1) + i (1 - 2 b2)) / sqrt 2`.
    pub fn qpsk() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let points = (0..4u32)
            .map(|label| {
                let b1 = (label >> 1) & 1;
                let b2 = label & 1;
                Complex64::new(a * (1.0 - 2.0 * b1 as f64), a * (1.0 - 2.0 * b2 as f64))
            })
            .collect();
        Self { points, bits_per_symbol: 2 }
    }

    /// Arbitrary labeled constellation; `points.len()` must be `2^bits`.
    pub fn custom(points: Vec<Complex64>) -> Option<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return None;
        }
        Some(Self { bits_per_symbol: m.trailing_zeros() as usize, points })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Complex64 {
        self.points[i]
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn bit(&self, i: usize, l: usize) -> u8 {
        ((i >> (self.bits_per_symbol - 1 - l)) & 1) as u8
    }

    /// Antipodal value `s^{b_l}` of bit `l` of point `i`.
    pub fn bit_sign(&self, i: usize, l: usize) -> f64 {
        1.0 - 2.0 * self.bit(i, l) as f64
    }

    pub fn energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.size() as f64
    }

    pub fn index_of_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn modulate(&self, bits: &[u8]) -> Vec<Complex64> {
        bits.chunks(self.bits_per_symbol).map(|c| self.points[self.index_of_bits(c)]).collect()
    }

    pub fn nearest(&self, u: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (u - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// The `m` points closest to `u`, nearest first, ties by index.
    pub fn nearest_n(&self, u: Complex64, m: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.size()).collect();
        idx.sort_by(|&a, &b| {
            (u - self.points[a]).norm_sqr().total_cmp(&(u - self.points[b]).norm_sqr()).then(a.cmp(&b))
        });
        idx.truncate(m);
        idx
    }
}

/// `P(s_j = s)` from the `M_c` bit LLRs of one symbol, assuming independent bits.
pub fn priors_from_llr(llrs: &[f64], c: &Constellation) -> Vec<f64> {
    assert_eq!(llrs.len(), c.bits_per_symbol(), "one LLR per bit of the symbol");
    let clamped: Vec<f64> = llrs.iter().map(|&v| clamp_llr(v)).collect();
    let mut p: Vec<f64> = (0..c.size())
        .map(|i| {
            let log_p: f64 = clamped.iter().enumerate().map(|(l, &v)| -softplus(-c.bit_sign(i, l) * v)).sum();
            log_p.exp()
        })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

pub fn symbol_mean(priors: &[f64], c: &Constellation) -> Complex64 {
    priors.iter().zip(c.points()).map(|(&p, &s)| s * p).sum()
}

pub fn symbol_variance(priors: &[f64], mean: Complex64, c: &Constellation) -> f64 {
    priors.iter().zip(c.points()).map(|(&p, &s)| (s - mean).norm_sqr() * p).sum()
}

/// Per-UE symbol statistics for one symbol interval, on the unit-energy
/// constellation (transmit power is applied by the detectors).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSymbolStats {
    pub mean: Vec<Complex64>,
    pub variance: Vec<f64>,
    pub priors: Vec<Vec<f64>>,
}

impl SoftSymbolStats {
    /// `llrs[j]` holds UE `j`'s `M_c` a-priori LLRs for this symbol.
    pub fn from_llrs<'a, I>(llrs: I, c: &Constellation) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut out = Self { mean: Vec::new(), variance: Vec::new(), priors: Vec::new() };
        for l in llrs {
            let p = priors_from_llr(l, c);
            let m = symbol_mean(&p, c);
            out.variance.push(symbol_variance(&p, m, c));
            out.mean.push(m);
            out.priors.push(p);
        }
        out
    }

    /// No information: uniform priors for `k` UEs.
    pub fn uninformed(k: usize, c: &Constellation) -> Self {
        let p = vec![1.0 / c.size() as f64; c.size()];
        let m = symbol_mean(&p, c);
        Self { mean: vec![m; k], variance: vec![symbol_variance(&p, m, c); k], priors: vec![p; k] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_is_gray_unit_energy_zero_mean() {
        let c = Constellation::qpsk();
        assert!((c.energy() - 1.0).abs() < 1e-15);
        let mean: Complex64 = c.points().iter().sum();
        assert!(mean.norm() < 1e-15);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(c.modulate(&[0, 0]), vec![Complex64::new(a, a)]);
        assert_eq!(c.modulate(&[1, 0]), vec![Complex64::new(-a, a)]);
        assert_eq!(c.modulate(&[0, 1]), vec![Complex64::new(a, -a)]);
        // neighbours differ in exactly one bit
        for i in 0..4 {
            for j in 0..4 {
                let d = (c.point(i) - c.point(j)).norm();
                if (d - 2.0 * a).abs() < 1e-12 {
                    assert_eq!((i ^ j).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn zero_llrs_give_uniform_priors() {
        let c = Constellation::qpsk();
        let p = priors_from_llr(&[0.0, 0.0], &c);
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(symbol_mean(&p, &c).norm() < 1e-15);
        assert!((symbol_variance(&p, symbol_mean(&p, &c), &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_llrs_saturate_to_a_point_mass() {
        let c = Constellation::qpsk();
        let p = priors_from_llr(&[f64::INFINITY, f64::INFINITY], &c);
        assert!((p[0] - 1.0).abs() < 1e-12);
        let m = symbol_mean(&p, &c);
        assert!((m - c.point(0)).norm() < 1e-12);
        assert!(symbol_variance(&p, m, &c) < 1e-12);
    }

    #[test]
    fn finite_llrs_match_direct_product_formula() {
        let c = Constellation::qpsk();
        let llr = [2.0, -1.0];
        let p = priors_from_llr(&llr, &c);
        // frozen from 1 / prod(1 + exp(-s_l L_l)) evaluated by hand
        let p_bit0 = |v: f64| 1.0 / (1.0 + (-v as f64).exp());
        let direct = [
            p_bit0(2.0) * p_bit0(-1.0),
            p_bit0(2.0) * (1.0 - p_bit0(-1.0)),
            (1.0 - p_bit0(2.0)) * p_bit0(-1.0),
            (1.0 - p_bit0(2.0)) * (1.0 - p_bit0(-1.0)),
        ];
        for i in 0..4 {
            assert!((p[i] - direct[i]).abs() < 1e-14);
        }
        let expect_mean: Complex64 = direct.iter().zip(c.points()).map(|(&w, &s)| s * w).sum();
        assert!((symbol_mean(&p, &c) - expect_mean).norm() < 1e-14);
    }

    #[test]
    fn nearest_n_orders_by_distance() {
        let c = Constellation::qpsk();
        let u = Complex64::new(0.6, 0.1);
        let order = c.nearest_n(u, 4);
        assert_eq!(order[0], 0);
        assert_eq!(order[0], c.nearest(u));
        assert_eq!(order[3], 3);
        assert_eq!(order.len(), 4);
    }

    #[test]
    fn log_helpers() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!((log_add(1.0, 2.0) - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add(f64::NEG_INFINITY, 3.0), 3.0);
    }
}

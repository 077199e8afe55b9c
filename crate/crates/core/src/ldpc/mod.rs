//! Binary LDPC codes: progressive-edge-growth construction, systematic
//! encoding, alist interchange and box-plus sum-product decoding.

mod alist;
mod decoder;
mod peg;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use alist::{parse_alist, write_alist};
pub use decoder::{box_plus, check_node_update, decode, DecodeOutput, DecoderState, MESSAGE_CLAMP};
pub use peg::progressive_edge_growth;

/// Default code: length 256, 128 checks, rate 1/2, variable degree 3.
pub const DEFAULT_LENGTH: usize = 256;
pub const DEFAULT_CHECKS: usize = 128;
pub const DEFAULT_VAR_DEGREE: usize = 3;
pub const DEFAULT_SEED: u64 = 0x1dc0de;

const DEFAULT_ALIST: &str = include_str!("../../data/peg_256_128.alist");

/// Parity-check matrix in sparse adjacency form together with the
/// systematic encoder obtained by GF(2) elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    length: usize,
    check_to_vars: Vec<Vec<usize>>,
    var_to_checks: Vec<Vec<usize>>,
    /// Codeword positions carrying message bits, ascending.
    info_cols: Vec<usize>,
    /// Codeword position fixed by each elimination row.
    parity_cols: Vec<usize>,
    /// `parity_eqs[r]`: message-bit indices XORed into `parity_cols[r]`.
    parity_eqs: Vec<Vec<usize>>,
}

impl LdpcCode {
    /// Builds the code from per-check variable lists. `H` must have full row rank.
    pub fn from_checks(length: usize, check_to_vars: Vec<Vec<usize>>) -> Result<Self> {
        let m = check_to_vars.len();
        if m == 0 || m >= length {
            return Err(Error::Code(format!("need 0 < M < N, got M = {m}, N = {length}")));
        }
        let mut var_to_checks = vec![Vec::new(); length];
        for (j, vars) in check_to_vars.iter().enumerate() {
            for &i in vars {
                if i >= length {
                    return Err(Error::Code(format!("check {j} references variable {i} >= {length}")));
                }
                if var_to_checks[i].contains(&j) {
                    return Err(Error::Code(format!("duplicate edge ({j}, {i})")));
                }
                var_to_checks[i].push(j);
            }
        }
        let (parity_cols, parity_eqs, info_cols) = systematic_form(length, &check_to_vars)?;
        Ok(Self { length, check_to_vars, var_to_checks, info_cols, parity_cols, parity_eqs })
    }

    /// PEG construction with the given variable degree; on a rank-deficient
    /// result the seed is incremented and the construction retried.
    pub fn build(length: usize, checks: usize, var_degree: usize, seed: u64) -> Result<Self> {
        if checks == 0 || checks >= length {
            return Err(Error::Code(format!("need 0 < M < N, got M = {checks}, N = {length}")));
        }
        if var_degree == 0 || var_degree > checks {
            return Err(Error::Code(format!("variable degree {var_degree} impossible with {checks} checks")));
        }
        for attempt in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
            let rows = progressive_edge_growth(length, checks, var_degree, &mut rng);
            match Self::from_checks(length, rows) {
                Ok(code) => {
                    if attempt > 0 {
                        log::info!("PEG seed {seed} rank deficient, used seed {}", seed.wrapping_add(attempt));
                    }
                    return Ok(code);
                }
                Err(Error::Code(msg)) if msg.contains("rank") => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Code("no full-rank PEG code found in 64 seeds".into()))
    }

    /// The committed (256, 128) code.
    pub fn default_code() -> Self {
        parse_alist(DEFAULT_ALIST).expect("bundled alist is valid")
    }

    pub fn from_alist_file(path: &Path) -> Result<Self> {
        parse_alist(&std::fs::read_to_string(path)?)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn num_checks(&self) -> usize {
        self.check_to_vars.len()
    }

    pub fn message_len(&self) -> usize {
        self.info_cols.len()
    }

    pub fn rate(&self) -> f64 {
        self.message_len() as f64 / self.length as f64
    }

    pub fn num_edges(&self) -> usize {
        self.check_to_vars.iter().map(Vec::len).sum()
    }

    pub fn check_to_vars(&self) -> &[Vec<usize>] {
        &self.check_to_vars
    }

    pub fn var_to_checks(&self) -> &[Vec<usize>] {
        &self.var_to_checks
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_cols
    }

    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.message_len() {
            return Err(Error::Dimension(format!(
                "message has {} bits, code expects {}",
                msg.len(),
                self.message_len()
            )));
        }
        let mut cw = vec![0u8; self.length];
        for (&pos, &b) in self.info_cols.iter().zip(msg) {
            cw[pos] = b & 1;
        }
        for (&pos, eq) in self.parity_cols.iter().zip(&self.parity_eqs) {
            cw[pos] = eq.iter().fold(0, |acc, &i| acc ^ (msg[i] & 1));
        }
        Ok(cw)
    }

    pub fn message_bits(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_cols.iter().map(|&p| codeword[p]).collect()
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.check_to_vars.iter().all(|vars| vars.iter().fold(0u8, |acc, &i| acc ^ bits[i]) == 0)
    }

    /// Dense systematic generator, one row per message bit.
    pub fn generator_matrix(&self) -> Vec<Vec<u8>> {
        let k = self.message_len();
        (0..k)
            .map(|i| {
                let mut e = vec![0u8; k];
                e[i] = 1;
                self.encode(&e).expect("unit message has the right length")
            })
            .collect()
    }

    /// Length of the shortest cycle in the Tanner graph (`usize::MAX` if acyclic).
    pub fn girth(&self) -> usize {
        let n = self.length;
        let m = self.num_checks();
        let mut best = usize::MAX;
        // node ids: variables 0..n, checks n..n+m
        for start in 0..n {
            let mut dist = vec![usize::MAX; n + m];
            let mut parent = vec![usize::MAX; n + m];
            let mut queue = std::collections::VecDeque::new();
            dist[start] = 0;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                if 2 * dist[v] >= best {
                    break;
                }
                let neighbours: Vec<usize> = if v < n {
                    self.var_to_checks[v].iter().map(|&c| n + c).collect()
                } else {
                    self.check_to_vars[v - n].clone()
                };
                for u in neighbours {
                    if u == parent[v] {
                        continue;
                    }
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        parent[u] = v;
                        queue.push_back(u);
                    } else {
                        best = best.min(dist[u] + dist[v] + 1);
                    }
                }
            }
        }
        best
    }
}

/// Reduced row echelon form of `H` over GF(2), pivoting from the last
/// column so the parity bits land at the tail whenever possible.
fn systematic_form(length: usize, rows: &[Vec<usize>]) -> Result<(Vec<usize>, Vec<Vec<usize>>, Vec<usize>)> {
    let words = length.div_ceil(64);
    let mut h: Vec<Vec<u64>> = rows
        .iter()
        .map(|vars| {
            let mut r = vec![0u64; words];
            for &i in vars {
                r[i / 64] ^= 1 << (i % 64);
            }
            r
        })
        .collect();
    let get = |r: &[u64], i: usize| (r[i / 64] >> (i % 64)) & 1 == 1;
    let m = h.len();
    let mut pivots = Vec::with_capacity(m);
    let mut row = 0;
    for col in (0..length).rev() {
        if row == m {
            break;
        }
        let Some(p) = (row..m).find(|&r| get(&h[r], col)) else { continue };
        h.swap(row, p);
        let pivot_row = h[row].clone();
        for (r, other) in h.iter_mut().enumerate() {
            if r != row && get(other, col) {
                other.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < m {
        return Err(Error::Code(format!("parity-check matrix is rank deficient ({} < {m})", pivots.len())));
    }
    let mut is_pivot = vec![false; length];
    pivots.iter().for_each(|&c| is_pivot[c] = true);
    let info_cols: Vec<usize> = (0..length).filter(|&c| !is_pivot[c]).collect();
    let eqs = h
        .iter()
        .map(|r| info_cols.iter().enumerate().filter(|(_, &c)| get(r, c)).map(|(i, _)| i).collect())
        .collect();
    Ok((pivots, eqs, info_cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn default_code_shape() {
        let code = LdpcCode::default_code();
        assert_eq!(code.length(), 256);
        assert_eq!(code.num_checks(), 128);
        assert_eq!(code.message_len(), 128);
        assert!((code.rate() - 0.5).abs() < 1e-15);
        assert!(code.var_to_checks().iter().all(|c| c.len() == 3));
        let six = code.check_to_vars().iter().filter(|v| v.len() == 6).count();
        assert!(six >= 100, "{six} checks of degree 6");
        assert!(code.check_to_vars().iter().all(|v| (5..=7).contains(&v.len())));
        assert!(code.girth() >= 6);
    }

    #[test]
    fn bundled_file_matches_seeded_construction() {
        let built = LdpcCode::build(DEFAULT_LENGTH, DEFAULT_CHECKS, DEFAULT_VAR_DEGREE, DEFAULT_SEED).unwrap();
        assert_eq!(built, LdpcCode::default_code());
    }

    #[test]
    fn generator_is_orthogonal_to_checks() {
        let code = LdpcCode::default_code();
        for row in code.generator_matrix() {
            assert!(code.syndrome_ok(&row));
        }
    }

    #[test]
    fn encoding_is_linear_and_systematic() {
        let code = LdpcCode::default_code();
        let zero = code.encode(&vec![0; 128]).unwrap();
        assert!(zero.iter().all(|&b| b == 0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a: Vec<u8> = (0..128).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..128).map(|_| rng.random_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let (ca, cb, cab) = (code.encode(&a).unwrap(), code.encode(&b).unwrap(), code.encode(&ab).unwrap());
            assert!(code.syndrome_ok(&ca));
            assert_eq!(code.message_bits(&ca), a);
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            assert_eq!(sum, cab);
        }
    }

    #[test]
    fn wrong_message_length_is_an_error() {
        let code = LdpcCode::default_code();
        assert!(code.encode(&[0; 10]).is_err());
    }

    #[test]
    fn rank_deficiency_is_detected() {
        // two identical checks
        let err = LdpcCode::from_checks(4, vec![vec![0, 1], vec![0, 1]]).unwrap_err();
        assert!(err.to_string().contains("rank"));
    }

    #[test]
    fn small_codes_build() {
        let code = LdpcCode::build(96, 48, 3, 5).unwrap();
        assert_eq!(code.message_len(), 48);
        assert!(code.syndrome_ok(&code.encode(&vec![1; 48]).unwrap()));
    }
}

use super::LdpcCode;

/// Saturation applied to every message passed along the graph.
pub const MESSAGE_CLAMP: f64 = 30.0;

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-MESSAGE_CLAMP, MESSAGE_CLAMP)
    }
}

/// LLR of the XOR of two independent bits:
/// `log((1 + e^{a+b}) / (e^a + e^b))`, evaluated without overflow.
pub fn box_plus(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let m = a.abs().min(b.abs());
    if m.is_infinite() {
        return sign * f64::INFINITY;
    }
    if a.is_infinite() || b.is_infinite() {
        // the finite magnitude passes through, sign combined
        return sign * m;
    }
    sign * m + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Extrinsic check-to-variable messages of one check node:
/// `out[i] = box-plus of all inputs except input i`.
pub fn check_node_update(inputs: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    let d = inputs.len();
    debug_assert_eq!(out.len(), d);
    match d {
        0 => {}
        1 => out[0] = 0.0,
        _ => {
            // backward partials in scratch, forward partial carried along
            scratch.clear();
            scratch.resize(d, 0.0);
            scratch[d - 1] = inputs[d - 1];
            for i in (0..d - 1).rev() {
                scratch[i] = box_plus(inputs[i], scratch[i + 1]);
            }
            out[0] = scratch[1];
            let mut fwd = inputs[0];
            for i in 1..d - 1 {
                out[i] = box_plus(fwd, scratch[i + 1]);
                fwd = box_plus(fwd, inputs[i]);
            }
            out[d - 1] = fwd;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    /// Channel LLR plus all incoming check messages.
    pub posterior: Vec<f64>,
    /// Sum of incoming check messages (posterior minus channel input).
    pub extrinsic: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Reusable edge buffers, laid out check-major.
#[derive(Debug, Clone)]
pub struct DecoderState {
    edge_var: Vec<usize>,
    check_start: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    scratch: Vec<f64>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl DecoderState {
    pub fn new(code: &LdpcCode) -> Self {
        let mut edge_var = Vec::with_capacity(code.num_edges());
        let mut check_start = vec![0];
        let mut var_edges = vec![Vec::new(); code.length()];
        for vars in code.check_to_vars() {
            for &v in vars {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_start.push(edge_var.len());
        }
        let e = edge_var.len();
        Self {
            edge_var,
            check_start,
            var_edges,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            scratch: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Flooding sum-product decoding with syndrome-based early exit.
    pub fn decode(&mut self, channel: &[f64], max_iter: usize) -> DecodeOutput {
        let n = self.var_edges.len();
        assert_eq!(channel.len(), n, "one channel LLR per code bit");
        for (e, &v) in self.edge_var.iter().enumerate() {
            self.v2c[e] = clamp(channel[v]);
        }
        self.c2v.iter_mut().for_each(|m| *m = 0.0);
        let mut extrinsic = vec![0.0; n];
        let mut posterior: Vec<f64> = channel.to_vec();
        let mut bits: Vec<u8> = posterior.iter().map(|&l| (l < 0.0) as u8).collect();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            for c in 0..self.check_start.len() - 1 {
                let (s, t) = (self.check_start[c], self.check_start[c + 1]);
                self.inputs.clear();
                self.inputs.extend_from_slice(&self.v2c[s..t]);
                self.outputs.clear();
                self.outputs.resize(t - s, 0.0);
                check_node_update(&self.inputs, &mut self.outputs, &mut self.scratch);
                for (dst, &o) in self.c2v[s..t].iter_mut().zip(&self.outputs) {
                    *dst = clamp(o);
                }
            }
            for v in 0..n {
                let ext: f64 = self.var_edges[v].iter().map(|&e| self.c2v[e]).sum();
                extrinsic[v] = ext;
                posterior[v] = channel[v] + ext;
                bits[v] = (posterior[v] < 0.0) as u8;
                let total = clamp(channel[v]) + ext;
                for &e in &self.var_edges[v] {
                    self.v2c[e] = clamp(total - self.c2v[e]);
                }
            }
            if self.syndrome_ok(&bits) {
                converged = true;
                break;
            }
        }
        DecodeOutput { bits, posterior, extrinsic, converged, iterations }
    }

    fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.check_start
            .windows(2)
            .all(|w| self.edge_var[w[0]..w[1]].iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }
}

/// One-shot decode; see [`DecoderState::decode`].
pub fn decode(code: &LdpcCode, channel: &[f64], max_iter: usize) -> DecodeOutput {
    DecoderState::new(code).decode(channel, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(a: f64, b: f64) -> f64 {
        ((1.0 + (a + b).exp()) / (a.exp() + b.exp())).ln()
    }

    #[test]
    fn box_plus_matches_definition() {
        for &(a, b) in &[(0.3, -1.2), (2.0, 2.0), (-4.0, 0.1), (7.5, -7.5), (0.0, 3.0)] {
            assert!((box_plus(a, b) - exact(a, b)).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn box_plus_special_values() {
        assert_eq!(box_plus(3.0, f64::INFINITY), 3.0);
        assert_eq!(box_plus(3.0, f64::NEG_INFINITY), -3.0);
        assert_eq!(box_plus(f64::INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(box_plus(0.0, 5.0), 0.0);
        assert!(box_plus(f64::NAN, 1.0).is_nan());
        // large finite arguments do not overflow
        assert!((box_plus(800.0, -900.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn check_update_equals_leave_one_out_fold() {
        let inputs = [1.5, -0.4, 2.2, 0.9, -3.0, 0.05];
        let mut out = [0.0; 6];
        let mut scratch = Vec::new();
        check_node_update(&inputs, &mut out, &mut scratch);
        for i in 0..6 {
            let fold = inputs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).reduce(box_plus).unwrap();
            assert!((out[i] - fold).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_codeword_decodes_in_one_iteration() {
        let code = LdpcCode::default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let msg: Vec<u8> = (0..code.message_len()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&msg).unwrap();
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { f64::INFINITY } else { f64::NEG_INFINITY }).collect();
        let out = decode(&code, &llr, 50);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.bits, cw);
    }

    #[test]
    fn posterior_is_channel_plus_extrinsic() {
        let code = LdpcCode::default_code();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let llr: Vec<f64> = (0..256).map(|_| 2.0 + 2.0 * rng.random::<f64>() - 1.5).collect();
        let out = decode(&code, &llr, 5);
        for i in 0..256 {
            assert!((out.posterior[i] - llr[i] - out.extrinsic[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_returns_channel_decisions() {
        let code = LdpcCode::default_code();
        let llr = vec![-1.0; 256];
        let out = decode(&code, &llr, 0);
        assert_eq!(out.iterations, 0);
        assert!(out.bits.iter().all(|&b| b == 1));
        assert!(out.extrinsic.iter().all(|&e| e == 0.0));
    }
}

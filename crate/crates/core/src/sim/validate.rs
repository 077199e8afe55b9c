//! Quick self-checks behind the `validate` subcommand. Each check compares
//! an implementation path against an independent evaluation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::{
    linear_mmse_detect, perfect_ic_detect, soft_ic_detect, FilterBank, InterferenceProfile, Receiver,
};
use crate::estimation::{assign_pilots, mmse_estimate, receive_pilots};
use crate::geometry::{draw_channel, CorrelationModel, SpatialCorrelation};
use crate::idd::{extrinsic_llr, EffectiveAwgn};
use crate::ldpc::{box_plus, decode, LdpcCode};
use crate::linalg::{complex_normal, CMatrix, CVector};
use crate::list::{list_detect, sequential_soft_ic_detect, SacConfig};
use crate::selection::SelectionMask;
use crate::soft::Constellation;

use super::{run_trial, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        filter_limits(),
        estimation_mse(),
        llr_brute_force(),
        box_plus_identity(),
        ldpc_noiseless(),
        list_degeneracy(),
        trial_determinism(),
    ]
}

fn random_system(rng: &mut ChaCha8Rng, nl: usize, k: usize) -> (crate::estimation::ChannelEstimate, SelectionMask) {
    let g = CMatrix::from_fn(nl, k, |_, _| complex_normal(rng));
    let est = crate::estimation::ChannelEstimate::perfect(&crate::geometry::ChannelRealization { g, antennas_per_ap: 1 });
    (est, SelectionMask::all(nl, k, 1))
}

fn filter_limits() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (est, mask) = random_system(&mut rng, 12, 4);
    let rho = vec![1.0, 0.5, 2.0, 1.0];
    let rx = Receiver::new(&est, &mask, &rho, 0.4).expect("valid receiver");
    let y = CVector::from_fn(12, |_, _| complex_normal(&mut rng));
    let uninformed = InterferenceProfile::uninformed(&rho);
    let bank = FilterBank::build(&rx, &uninformed).expect("filters");
    let lin = linear_mmse_detect(&rx, &y).expect("linear MMSE");
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        worst = worst.max((bank.filters[k].dotc(&y) - lin[k]).norm());
    }
    let x: Vec<Complex64> = (0..4).map(|k| complex_normal(&mut rng) * rho[k].sqrt()).collect();
    let exact = InterferenceProfile::exact(&x);
    let bank = FilterBank::build(&rx, &exact).expect("filters");
    for k in 0..4 {
        let a = soft_ic_detect(&rx, k, &y, &bank.filters[k], &exact.mean);
        let b = perfect_ic_detect(&rx, k, &y, &x).expect("perfect IC");
        worst = worst.max((a - b).norm());
    }
    outcome("filter limits", worst < 1e-10, format!("max deviation {worst:.2e}"))
}

fn estimation_mse() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let beta = nalgebra::DMatrix::from_fn(3, 4, |l, k| 0.5 + 0.3 * l as f64 + 0.1 * k as f64);
    let ls = crate::geometry::LargeScaleCoefficients { shadow_db: beta.map(|_| 0.0), beta };
    let corr = SpatialCorrelation::from_large_scale(&ls, 1, CorrelationModel::default());
    let book = assign_pilots(4, 2, 0.1, &mut rng).expect("pilots");
    let draws = 4000;
    let mut err = 0.0;
    let mut predicted = 0.0;
    for _ in 0..draws {
        let ch = draw_channel(&corr, &mut rng);
        let obs = receive_pilots(&ch, &corr, &book, 0.05, &mut rng).expect("pilots");
        let est = mmse_estimate(&obs, &corr, &book).expect("estimate");
        err += (&ch.g - &est.g_hat).column(0).norm_squared();
        predicted += (0..3).map(|l| est.error_block(0, l).trace().re).sum::<f64>();
    }
    let rel = (err / predicted - 1.0).abs();
    outcome("estimation MSE", rel < 0.05, format!("relative gap {rel:.3}"))
}

fn llr_brute_force() -> CheckOutcome {
    let c = Constellation::qpsk();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let u = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let eff = EffectiveAwgn { omega: Complex64::new(rng.random_range(0.3..1.2), 0.0), kappa2: rng.random_range(0.2..2.0) };
        let prior = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let got = extrinsic_llr(u, &eff, &prior, &c);
        for l in 0..2 {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..4 {
                let p: f64 = (0..2).map(|j| 1.0 / (1.0 + (-c.bit_sign(i, j) * prior[j]).exp())).product();
                let v = (-(u - eff.omega * c.point(i)).norm_sqr() / eff.kappa2).exp() * p;
                if c.bit(i, l) == 0 {
                    num += v;
                } else {
                    den += v;
                }
            }
            worst = worst.max((got[l] - ((num / den).ln() - prior[l])).abs());
        }
    }
    outcome("extrinsic LLR", worst < 1e-9, format!("max deviation {worst:.2e}"))
}

fn box_plus_identity() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let exact = ((1.0 + (a + b).exp()) / (a.exp() + b.exp())).ln();
        worst = worst.max((box_plus(a, b) - exact).abs());
    }
    outcome("box-plus", worst < 1e-12, format!("max deviation {worst:.2e}"))
}

fn ldpc_noiseless() -> CheckOutcome {
    let code = LdpcCode::default_code();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let msg: Vec<u8> = (0..code.message_len()).map(|_| rng.random_range(0..2)).collect();
    let cw = code.encode(&msg).expect("encode");
    let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { f64::INFINITY } else { f64::NEG_INFINITY }).collect();
    let out = decode(&code, &llr, 10);
    let ok = out.converged && out.iterations == 1 && out.bits == cw;
    outcome("LDPC noiseless", ok, format!("converged {} after {} iteration(s)", out.converged, out.iterations))
}

fn list_degeneracy() -> CheckOutcome {
    let c = Constellation::qpsk();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = SacConfig { d_th: f64::INFINITY, list_size: 4 };
    let mut mismatches = 0;
    for _ in 0..100 {
        let (est, mask) = random_system(&mut rng, 8, 4);
        let rho = vec![1.0; 4];
        let rx = Receiver::new(&est, &mask, &rho, 0.5).expect("valid receiver");
        let prof = InterferenceProfile::uninformed(&rho);
        let bank = FilterBank::build(&rx, &prof).expect("filters");
        let y = CVector::from_fn(8, |_, _| complex_normal(&mut rng) * 1.5);
        let a = list_detect(&rx, &bank, &y, &prof, &cfg, &c);
        let b = sequential_soft_ic_detect(&rx, &bank, &y, &prof, &c);
        if a.result != b || a.branched_ue.is_some() {
            mismatches += 1;
        }
    }
    outcome("list degeneracy", mismatches == 0, format!("{mismatches} of 100 frames differ"))
}

fn trial_determinism() -> CheckOutcome {
    let cfg = SimConfig { num_aps: 8, num_ues: 2, idd_iters: 2, ..SimConfig::default() };
    let code = LdpcCode::default_code();
    let a = run_trial(&cfg, &code, 0.0, 9);
    let b = run_trial(&cfg, &code, 0.0, 9);
    let ok = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    outcome("trial determinism", ok, if ok { "identical counts".into() } else { format!("{a:?} vs {b:?}") })
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

use cfmimo::estimation::{assign_pilots_in_order, receive_pilots};
use cfmimo::geometry::{correlation_matrix, draw_channel, CorrelationModel, SpatialCorrelation};
use cfmimo::idd::DetectorKind;
use cfmimo::ldpc::{decode, LdpcCode};
use cfmimo::linalg::CMatrix;
use cfmimo::sim::{sweep, BerRecord, SimConfig};
use cfmimo::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn wilson(errors: u64, n: u64) -> (f64, f64) {
    let (n, z2) = (n as f64, 1.96f64 * 1.96);
    let p = errors as f64 / n;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = 1.96 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    (centre - half, centre + half)
}

#[test]
fn single_saturated_wrong_bit_is_corrected_everywhere() {
    let code = LdpcCode::default_code();
    let msg: Vec<u8> = (0..code.message_len()).map(|i| ((i * 13 + 5) % 3 == 0) as u8).collect();
    let cw = code.encode(&msg).unwrap();
    let clean: Vec<f64> = cw.iter().map(|&b| if b == 0 { 30.0 } else { -30.0 }).collect();
    for pos in 0..code.length() {
        let mut llr = clean.clone();
        llr[pos] = -llr[pos];
        let out = decode(&code, &llr, 10);
        assert!(out.converged, "position {pos}");
        assert_eq!(out.bits, cw, "position {pos}");
    }
}

#[test]
fn pilot_observation_covariance_matches_psi() {
    // two users share pilot 0 at every AP, one user owns pilot 1
    let (l_count, k_count, n) = (2, 3, 2);
    let betas = [[1.0, 0.3], [0.5, 0.8], [0.2, 1.2]];
    let blocks = (0..k_count)
        .flat_map(|k| (0..l_count).map(move |l| (l, k)))
        .map(|(l, k)| correlation_matrix(betas[k][l], n, CorrelationModel::Exponential { r: 0.6 }))
        .collect();
    let corr = SpatialCorrelation::new(l_count, k_count, n, blocks).unwrap();
    let book = assign_pilots_in_order(&[0, 1, 2], 2, &[0.1, 0.2, 0.15]).unwrap();
    let sigma2 = 0.05;
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut acc = vec![CMatrix::zeros(n, n); 2 * l_count];
    let mut psi = Vec::new();
    for _ in 0..draws {
        let ch = draw_channel(&corr, &mut rng);
        let obs = receive_pilots(&ch, &corr, &book, sigma2, &mut rng).unwrap();
        for (i, a) in acc.iter_mut().enumerate() {
            let r = &obs.received[i];
            *a += r * r.adjoint();
        }
        psi = obs.covariance;
    }
    for (a, p) in acc.iter().zip(&psi) {
        let emp = a / Complex64::new(draws as f64, 0.0);
        let rel = (&emp - p).norm() / p.norm();
        assert!(rel < 0.02, "relative deviation {rel}");
    }
}

#[test]
fn genie_is_a_lower_bound_on_ber() {
    let cfg = SimConfig {
        num_aps: 16,
        num_ues: 4,
        detectors: vec![DetectorKind::Mmse, DetectorKind::SoftIc, DetectorKind::List, DetectorKind::Genie],
        snr_db: vec![14.0, 20.0],
        trials: 60,
        idd_iters: 2,
        seed: 3,
        ..SimConfig::default()
    };
    let records = sweep(&cfg).unwrap();
    let find = |r: &BerRecord, d: DetectorKind| {
        records
            .iter()
            .find(|o| o.snr_db == r.snr_db && o.ap_mode == r.ap_mode && o.idd_iter == r.idd_iter && o.detector == d)
            .unwrap()
    };
    for genie in records.iter().filter(|r| r.detector == DetectorKind::Genie) {
        for d in DetectorKind::ALL {
            let other = find(genie, d);
            let lo = wilson(genie.bit_errors, genie.bits_total).0;
            let hi = wilson(other.bit_errors, other.bits_total).1;
            assert!(lo <= hi, "genie {} vs {} {} at {} dB", genie.ber, d.as_str(), other.ber, genie.snr_db);
        }
    }
}

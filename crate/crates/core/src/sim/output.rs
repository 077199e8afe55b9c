use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use super::{BerRecord, Scenario, SimConfig};
use crate::linalg::CMatrix;
use crate::Result;

pub fn write_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record(["snr_db", "detector", "ap_mode", "idd_iter", "trials", "bits_total", "bit_errors", "ber", "seed_base"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// gnuplot script drawing one log-scale BER curve per
/// (detector, AP mode, iteration) found in `records`.
pub fn plot_script(records: &[BerRecord], csv_path: &str) -> String {
    let series: BTreeSet<_> = records.iter().map(|r| (r.detector, r.ap_mode, r.idd_iter)).collect();
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set logscale y").unwrap();
    writeln!(s, "set format y '10^{{%L}}'").unwrap();
    writeln!(s, "set xlabel 'SNR [dB]'").unwrap();
    writeln!(s, "set ylabel 'BER'").unwrap();
    writeln!(s, "set key outside right").unwrap();
    writeln!(s, "set grid").unwrap();
    let lines: Vec<String> = series
        .iter()
        .map(|(det, mode, it)| {
            format!(
                "'{csv_path}' using (column('snr_db')):((strcol('detector') eq '{det}' && strcol('ap_mode') eq '{mode}' && column('idd_iter') == {it} && column('ber') > 0) ? column('ber') : 1/0) with linespoints title '{det} {mode} it{it}'"
            )
        })
        .collect();
    if lines.is_empty() {
        writeln!(s, "# no records").unwrap();
    } else {
        // column names resolve against the header line
        writeln!(s, "set key autotitle columnhead").unwrap();
        writeln!(s, "plot \\\n  {}", lines.join(", \\\n  ")).unwrap();
    }
    s
}

pub fn write_plot_script(records: &[BerRecord], csv_path: &str, path: &Path) -> Result<()> {
    std::fs::write(path, plot_script(records, csv_path))?;
    Ok(())
}

fn write_real_matrix(path: &Path, header: &str, rows: usize, cols: usize, f: impl Fn(usize, usize) -> String) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "{header}")?;
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| f(i, j)).collect();
        writeln!(file, "{}", line.join(","))?;
    }
    Ok(())
}

/// Real and imaginary parts side by side: column `2k` is `Re m[., k]`.
fn interleaved(m: &CMatrix, i: usize, j: usize) -> String {
    let v = m[(i, j / 2)];
    if j % 2 == 0 { v.re } else { v.im }.to_string()
}

fn column_header(prefix: &str, n: usize) -> String {
    (0..n).map(|j| format!("{prefix}{j}")).collect::<Vec<_>>().join(",")
}

/// Debug CSVs for one scenario: positions, large-scale gains (APs x UEs,
/// linear), selection masks and channel estimates.
pub fn dump_scenario(cfg: &SimConfig, scn: &Scenario, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let geo = &scn.geometry;
    let mut f = File::create(dir.join("geometry.csv"))?;
    writeln!(f, "kind,index,x_m,y_m")?;
    for (i, p) in geo.ap_positions.iter().enumerate() {
        writeln!(f, "ap,{i},{},{}", p[0], p[1])?;
    }
    for (i, p) in geo.ue_positions.iter().enumerate() {
        writeln!(f, "ue,{i},{},{}", p[0], p[1])?;
    }
    let beta = &scn.large_scale.beta;
    let (l_count, k_count) = beta.shape();
    let ue_header = column_header("ue", k_count);
    write_real_matrix(&dir.join("beta.csv"), &ue_header, l_count, k_count, |l, k| beta[(l, k)].to_string())?;
    for &mode in &cfg.ap_modes {
        let mask = scn.mask(cfg, mode);
        write_real_matrix(&dir.join(format!("mask_{mode}.csv")), &ue_header, l_count, k_count, |l, k| {
            (mask.serves(l, k) as u8).to_string()
        })?;
    }
    let complex_header =
        (0..k_count).map(|k| format!("ue{k}_re,ue{k}_im")).collect::<Vec<_>>().join(",");
    let nl = scn.estimate.g_hat.nrows();
    write_real_matrix(&dir.join("estimates.csv"), &complex_header, nl, 2 * k_count, |i, j| interleaved(&scn.estimate.g_hat, i, j))?;
    write_real_matrix(&dir.join("channel.csv"), &complex_header, nl, 2 * k_count, |i, j| interleaved(&scn.channel.g, i, j))?;
    // error variance per (AP, UE): trace of C_kl
    write_real_matrix(&dir.join("error_trace.csv"), &ue_header, l_count, k_count, |l, k| {
        scn.estimate.error_block(k, l).trace().re.to_string()
    })?;
    Ok(())
}

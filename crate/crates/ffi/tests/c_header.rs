//! Compiles a C program against the generated header and the static
//! library and runs it.

use std::path::PathBuf;
use std::process::Command;

fn target_profile_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_profile_dir().join("libcfmimo_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cfmimo.h")).unwrap();
    for name in [
        "cfm_last_error",
        "cfm_version",
        "cfm_simulator_new",
        "cfm_simulator_set_trials",
        "cfm_simulator_sweep",
        "cfm_simulator_free",
        "cfm_records_len",
        "cfm_records_get",
        "cfm_records_write_csv",
        "cfm_records_free",
        "cfm_ldpc_default",
        "cfm_ldpc_from_alist",
        "cfm_ldpc_length",
        "cfm_ldpc_message_len",
        "cfm_ldpc_encode",
        "cfm_ldpc_decode",
        "cfm_ldpc_free",
        "cfm_box_plus",
    ] {
        let declared = header.contains(&format!(" {name}(")) || header.contains(&format!("*{name}("));
        assert!(declared, "{name} missing from header");
    }
    assert!(header.contains("typedef struct CfmSimulator CfmSimulator;"));
}

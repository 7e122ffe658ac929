use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use uda_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = uda_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn certify_roundtrip() {
    unsafe {
        let mut state = ptr::null_mut();
        let mut pairs = ptr::null_mut();
        assert_eq!(uda_state_from_json(c(r#"{"kind": "dicke", "n": 4, "k": 2}"#).as_ptr(), &mut state), UdaStatus::Ok);
        let s = r#"{"n": 4, "subsets": [[1,2],[1,3],[1,4],[2,3],[2,4],[3,4]]}"#;
        assert_eq!(uda_subsystems_from_json(c(s).as_ptr(), &mut pairs), UdaStatus::Ok);
        let mut dim = 0usize;
        assert_eq!(uda_kernel_dim(pairs, &mut dim), UdaStatus::Ok);
        // all nonidentity strings minus those of weight <= 2
        assert_eq!(dim, 255 - (4 * 3 + 6 * 9));
        let mut v = ptr::null_mut();
        assert_eq!(uda_certify(state, pairs, &mut v), UdaStatus::Ok);
        let mut kind = UdaVerdictKind::Robust;
        assert_eq!(uda_verdict_kind(v, &mut kind), UdaStatus::Ok);
        assert_eq!(kind, UdaVerdictKind::NotRobust);
        let mut js = ptr::null_mut();
        assert_eq!(uda_verdict_to_json(v, &mut js), UdaStatus::Ok);
        let text = CStr::from_ptr(js).to_str().unwrap().to_owned();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["verdict"], "NOT_ROBUST");
        uda_string_free(js);
        uda_verdict_free(v);
        uda_subsystems_free(pairs);
        uda_state_free(state);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut state = ptr::null_mut();
        assert_eq!(uda_state_from_json(ptr::null(), &mut state), UdaStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(uda_state_from_json(c("{not json").as_ptr(), &mut state), UdaStatus::ParseError);
        assert_eq!(
            uda_state_from_json(c(r#"{"kind": "dicke", "n": 3, "k": 3}"#).as_ptr(), &mut state),
            UdaStatus::InvalidInput
        );
        assert!(state.is_null());
        let mut pairs = ptr::null_mut();
        assert_eq!(
            uda_subsystems_from_json(c(r#"{"n": 3, "subsets": [[1, 4]]}"#).as_ptr(), &mut pairs),
            UdaStatus::ParseError
        );
        let mut dim = 0usize;
        assert_eq!(uda_kernel_dim(ptr::null(), &mut dim), UdaStatus::NullPointer);
        let mut t = 0.0;
        assert_eq!(uda_gme_threshold(2, 1, &mut t), UdaStatus::InvalidInput);
        uda_state_free(ptr::null_mut());
        uda_string_free(ptr::null_mut());
    }
}

#[test]
fn gme_through_the_abi() {
    unsafe {
        let mut t = 0.0;
        assert_eq!(uda_gme_threshold(4, 2, &mut t), UdaStatus::Ok);
        assert!((t - 2.0 / 3.0).abs() < 1e-15);

        // product |0101> marginals: each pair is a computational basis state
        let bits = [0u8, 1, 0, 1];
        let mut marginals = vec![];
        for i in 0..4 {
            for j in (i + 1)..4 {
                let idx = (bits[i] * 2 + bits[j]) as usize;
                let mut re = vec![vec![0.0; 4]; 4];
                re[idx][idx] = 1.0;
                marginals.push(serde_json::json!({
                    "pair": [i + 1, j + 1],
                    "matrix": {"n": 2, "re": re, "im": vec![vec![0.0; 4]; 4]},
                }));
            }
        }
        let body = serde_json::json!({"n": 4, "target": {"n": 4, "k": 2}, "marginals": marginals}).to_string();
        let mut certified = true;
        let mut js = ptr::null_mut();
        assert_eq!(uda_gme_evaluate(c(&body).as_ptr(), 4, 2, &mut certified, &mut js), UdaStatus::Ok);
        assert!(!certified);
        let rep: serde_json::Value = serde_json::from_str(CStr::from_ptr(js).to_str().unwrap()).unwrap();
        assert!(rep["measured_discrepancy"].as_f64().unwrap() > 2.0 / 3.0);
        uda_string_free(js);

        let partial = serde_json::json!({"n": 4, "marginals": marginals[..5]}).to_string();
        assert_eq!(uda_gme_evaluate(c(&partial).as_ptr(), 4, 2, &mut certified, ptr::null_mut()), UdaStatus::InvalidInput);
        assert!(last_error().contains("[3,4]"));
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(uda_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/uda.h")).unwrap();
    for name in [
        "uda_state_from_json",
        "uda_subsystems_from_json",
        "uda_certify",
        "uda_verdict_kind",
        "uda_verdict_to_json",
        "uda_gme_evaluate",
        "uda_kernel_dim",
        "uda_last_error",
        "typedef struct UdaVerdict UdaVerdict",
        "UDA_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libuda_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile_path("uda_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lopenblas", "-lgfortran", "-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "smoke program failed: {stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(stdout.trim(), "dim=27 kind=0 threshold=0.666666666667 has_verdict=1");
    let _ = std::fs::remove_file(&out);
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}

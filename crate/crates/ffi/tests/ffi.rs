use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use difftd_ffi::*;

fn cfg(pairs: &[(&str, &str)]) -> *mut DifftdConfig {
    let c = difftd_config_new();
    for (k, v) in pairs {
        let (k, v) = (CString::new(*k).unwrap(), CString::new(*v).unwrap());
        assert_eq!(unsafe { difftd_config_set(c, k.as_ptr(), v.as_ptr()) }, DifftdStatus::Ok);
    }
    c
}

fn last_error() -> String {
    let p = difftd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const AR1: &[(&str, &str)] = &[
    ("model.name", "ar1"),
    ("model.a", "0.7"),
    ("basis", "quadratic_noconst"),
    ("algorithm.name", "grad_lstd"),
    ("run.T", "3000"),
    ("run.replicas", "3"),
    ("run.seed", "12"),
];

#[test]
fn streaming_handle_reproduces_replica_zero() {
    let c = cfg(AR1);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { difftd_run(c, &mut res) }, DifftdStatus::Ok);
    assert_eq!(unsafe { difftd_result_param_len(res) }, 1);
    assert_eq!(unsafe { difftd_result_horizon(res) }, 3000);

    let mut est = ptr::null_mut();
    assert_eq!(unsafe { difftd_estimator_new(c, &mut est) }, DifftdStatus::Ok);
    // two chunks must match one uninterrupted run
    assert_eq!(unsafe { difftd_estimator_advance(est, 1234) }, DifftdStatus::Ok);
    assert_eq!(unsafe { difftd_estimator_advance(est, 3000 - 1234) }, DifftdStatus::Ok);
    assert_eq!(unsafe { difftd_estimator_steps(est) }, 3000);
    let (mut theta, mut kappa, mut cbar) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { difftd_estimator_fit(est, &mut theta, 1, &mut kappa, &mut cbar) }, DifftdStatus::Ok);

    let tmp = tempfile::tempdir().unwrap();
    let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { difftd_result_write(res, dir.as_ptr()) }, DifftdStatus::Ok);
    let text = std::fs::read_to_string(tmp.path().join("replicas.csv")).unwrap();
    let row0 = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row0.split(',').collect();
    assert_eq!(fields[0], "0");
    assert!(fields.iter().any(|f| f.parse::<f64>().ok() == Some(theta)), "{row0} vs {theta}");

    unsafe {
        difftd_estimator_free(est);
        difftd_result_free(res);
        difftd_config_free(c);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let c = cfg(&[("model.name", "ar1")]);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { difftd_run(c, &mut res) }, DifftdStatus::Config);
    assert!(res.is_null());
    assert!(last_error().contains("model.a"), "{}", last_error());

    let k = CString::new("no.such.key").unwrap();
    assert_eq!(unsafe { difftd_config_set(c, k.as_ptr(), k.as_ptr()) }, DifftdStatus::Config);
    assert_eq!(unsafe { difftd_config_set(ptr::null_mut(), k.as_ptr(), k.as_ptr()) }, DifftdStatus::NullPointer);

    let (mut t, mut kap) = (0.0, 0.0);
    assert_eq!(unsafe { difftd_oracle_ar1(1.0, 0.9, &mut t, &mut kap) }, DifftdStatus::InvalidArgument);
    assert_eq!(unsafe { difftd_oracle_ar1(0.7, 0.9, ptr::null_mut(), &mut kap) }, DifftdStatus::NullPointer);
    unsafe { difftd_config_free(c) };

    let c = cfg(AR1);
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { difftd_estimator_new(c, &mut est) }, DifftdStatus::Ok);
    let x = [1.0, 2.0];
    assert_eq!(unsafe { difftd_estimator_push(est, x.as_ptr(), 2, x.as_ptr(), 1) }, DifftdStatus::InvalidArgument);
    assert!(last_error().contains("expected 1"));
    let mut theta = [0.0; 2];
    assert_eq!(
        unsafe { difftd_estimator_fit(est, theta.as_mut_ptr(), 2, ptr::null_mut(), ptr::null_mut()) },
        DifftdStatus::InvalidArgument
    );
    // nothing observed yet: M is still the identity and b zero
    assert_eq!(
        unsafe { difftd_estimator_fit(est, theta.as_mut_ptr(), 1, ptr::null_mut(), ptr::null_mut()) },
        DifftdStatus::Ok
    );
    assert_eq!(theta[0], 0.0);
    unsafe {
        difftd_estimator_free(est);
        difftd_config_free(c);
    }
}

#[test]
fn pushed_transitions_match_the_model() {
    let c = cfg(AR1);
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { difftd_estimator_new(c, &mut est) }, DifftdStatus::Ok);
    // X' = 0.7X + N with x = 1, n = 0.3 lands on 1; ψ' = 2, ∇c = 2, so θ = 1
    let (x, n) = (1.0, 0.3);
    assert_eq!(unsafe { difftd_estimator_push(est, &x, 1, &n, 1) }, DifftdStatus::Ok);
    let mut theta = 0.0;
    assert_eq!(unsafe { difftd_estimator_fit(est, &mut theta, 1, ptr::null_mut(), ptr::null_mut()) }, DifftdStatus::Ok);
    assert!((theta - 1.0).abs() < 1e-12, "{theta}");
    unsafe {
        difftd_estimator_free(est);
        difftd_config_free(c);
    }
}

#[test]
fn ou_oracle_and_config_file() {
    let mut d = 0.0;
    assert_eq!(unsafe { difftd_oracle_ou(0.5, 1.0, 3.0, &mut d) }, DifftdStatus::Ok);
    assert!((d - 3.0).abs() < 1e-15);

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    std::fs::write(&path, "basis = \"quadratic\"\n[model]\nname = \"ar1\"\na = 0.5\n[algorithm]\nname = \"lstd\"\n[run]\nT = 100\n").unwrap();
    let c = difftd_config_new();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { difftd_config_load(c, p.as_ptr()) }, DifftdStatus::Ok);
    assert_eq!(unsafe { difftd_config_validate(c) }, DifftdStatus::Ok);
    let missing = CString::new(tmp.path().join("nope.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { difftd_config_load(c, missing.as_ptr()) }, DifftdStatus::Io);
    unsafe { difftd_config_free(c) };
}

#[test]
fn header_is_current_and_c_program_links() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/difftd.h")).unwrap();
    for sym in ["difftd_run", "difftd_estimator_push", "DIFFTD_STATUS_PANIC", "typedef struct DifftdConfig DifftdConfig"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }

    // the integration test binary lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("libdifftd_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&bin).env("DIFFTD_WORKERS", "1").output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 0.1.0"));
}

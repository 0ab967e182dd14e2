use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use shiftband_ffi::*;

const FLIP: &str = r#"{"kind": "piecewise", "T": 100, "K": 2, "noise": {"family": "deterministic"},
    "segments": [{"means": [0.9, 0.1]}, {"start": 51, "means": [0.1, 0.9]}]}"#;

fn model(json: &str) -> *mut ShiftbandModel {
    let c = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { shiftband_model_from_json(c.as_ptr(), &mut m) },
        ShiftbandStatus::Ok
    );
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = shiftband_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { shiftband_string_free(p) };
    s
}

#[test]
fn model_accessors() {
    let m = model(FLIP);
    unsafe {
        assert_eq!(shiftband_model_horizon(m), 100);
        assert_eq!(shiftband_model_num_arms(m), 2);
        let mut mu = 0.0;
        assert_eq!(shiftband_model_mean(m, 51, 1, &mut mu), ShiftbandStatus::Ok);
        assert_eq!(mu, 0.9);
        assert_eq!(
            shiftband_model_mean(m, 101, 0, &mut mu),
            ShiftbandStatus::Range
        );
        assert!(last_error().contains("out of range"));
        let rng = shiftband_rng_new(1, 0);
        let mut y = -1.0;
        assert_eq!(
            shiftband_model_sample(m, 1, 0, rng, &mut y),
            ShiftbandStatus::Ok
        );
        assert_eq!(y, 0.9);
        shiftband_rng_free(rng);
        shiftband_model_free(m);
        assert_eq!(shiftband_model_horizon(ptr::null()), 0);
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            shiftband_model_from_json(ptr::null(), &mut m),
            ShiftbandStatus::NullPointer
        );
        let bad = CString::new(r#"{"kind": "piecewise", "T": 10, "K": 2, "bogus": 1}"#).unwrap();
        assert_eq!(
            shiftband_model_from_json(bad.as_ptr(), &mut m),
            ShiftbandStatus::Config
        );
        assert!(last_error().contains("bogus"));
        assert!(m.is_null());
        let mut mu = 0.0;
        assert_eq!(
            shiftband_model_mean(ptr::null(), 1, 0, &mut mu),
            ShiftbandStatus::NullPointer
        );
    }
}

#[test]
fn ground_truth_json() {
    let m = model(FLIP);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            shiftband_ground_truth_json(m, 20_000, &mut out),
            ShiftbandStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(v["L"], 1);
        assert_eq!(v["T"], 100);
        assert_eq!(
            shiftband_ground_truth_json(m, 50, &mut out),
            ShiftbandStatus::Resource
        );
        shiftband_model_free(m);
    }
}

#[test]
fn policy_protocol() {
    let m = model(FLIP);
    unsafe {
        let spec = CString::new(r#"{"name": "oracle"}"#).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(
            shiftband_policy_new(m, spec.as_ptr(), 3, &mut p),
            ShiftbandStatus::Ok
        );
        let mut arm = usize::MAX;
        for t in 1..=100 {
            assert_eq!(shiftband_policy_select(p, &mut arm), ShiftbandStatus::Ok);
            let mut mu = 0.0;
            shiftband_model_mean(m, t, arm, &mut mu);
            assert_eq!(shiftband_policy_observe(p, arm, mu), ShiftbandStatus::Ok);
        }
        assert_eq!(
            shiftband_policy_select(p, &mut arm),
            ShiftbandStatus::EndOfHorizon
        );
        shiftband_policy_free(p);

        let meta = CString::new(r#"{"name": "meta"}"#).unwrap();
        assert_eq!(
            shiftband_policy_new(m, meta.as_ptr(), 3, &mut p),
            ShiftbandStatus::Ok
        );
        assert_eq!(shiftband_policy_observe(p, 0, 0.5), ShiftbandStatus::Usage);
        assert_eq!(shiftband_policy_select(p, &mut arm), ShiftbandStatus::Ok);
        assert_eq!(
            shiftband_policy_observe(p, arm, 2.0),
            ShiftbandStatus::Validation
        );
        shiftband_policy_free(p);

        let reserved = CString::new(r#"{"name": "exp3s"}"#).unwrap();
        assert_eq!(
            shiftband_policy_new(m, reserved.as_ptr(), 3, &mut p),
            ShiftbandStatus::Config
        );
        shiftband_model_free(m);
    }
}

#[test]
fn experiment_json_is_reproducible() {
    let env = FLIP.replace(r#""start": 51"#, r#""start_frac": 0.5"#);
    let cfg = CString::new(format!(
        r#"{{"env": {env}, "policy": {{"name": "uniform"}}, "horizons": [50, 100], "seeds": 2}}"#
    ))
    .unwrap();
    let run = || unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            shiftband_run_experiment_json(cfg.as_ptr(), 0, &mut out),
            ShiftbandStatus::Ok
        );
        take_string(out)
    };
    let a = run();
    assert_eq!(a, run());
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["trials"].as_array().unwrap().len(), 4);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(shiftband_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compile and run a C program against the generated header and the cdylib.
#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let libdir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !libdir.join("libshiftband_ffi.so").exists()
        && !libdir.join("libshiftband_ffi.dylib").exists()
    {
        eprintln!("cdylib not found in {}; skipping", libdir.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "shiftband.h"

int main(void) {
    const char *spec = "{\"kind\":\"piecewise\",\"T\":20,\"K\":2,\"segments\":[{\"means\":[0.7,0.3]}]}";
    ShiftbandModel *m = NULL;
    if (shiftband_model_from_json(spec, &m) != SHIFTBAND_STATUS_OK) return 1;
    ShiftbandPolicy *p = NULL;
    if (shiftband_policy_new(m, "{\"name\":\"meta\"}", 7, &p) != SHIFTBAND_STATUS_OK) return 2;
    ShiftbandRng *rng = shiftband_rng_new(7, 0);
    for (size_t t = 1; t <= 20; t++) {
        size_t arm;
        double y;
        if (shiftband_policy_select(p, &arm) != SHIFTBAND_STATUS_OK) return 3;
        if (shiftband_model_sample(m, t, arm, rng, &y) != SHIFTBAND_STATUS_OK) return 4;
        if (shiftband_policy_observe(p, arm, y) != SHIFTBAND_STATUS_OK) return 5;
    }
    size_t arm;
    if (shiftband_policy_select(p, &arm) != SHIFTBAND_STATUS_END_OF_HORIZON) return 6;
    if (shiftband_model_from_json("{", &m) != SHIFTBAND_STATUS_CONFIG) return 7;
    if (shiftband_last_error() == NULL) return 8;
    shiftband_rng_free(rng);
    shiftband_policy_free(p);
    shiftband_model_free(m);
    printf("ok %s\n", shiftband_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&libdir)
        .arg("-lshiftband_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", &libdir)
        .env("DYLD_LIBRARY_PATH", &libdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}

use std::ffi::{CStr, CString};
use std::ptr;

use multipred_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = mp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    mp_string_free(p);
    s
}

unsafe fn small_config() -> *mut MpConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(mp_config_from_preset(cstr("tabular-fixed-tb").as_ptr(), &mut cfg), MpStatus::Ok, "{}", last_error());
    assert_eq!(mp_config_set_steps(cfg, 2_000), MpStatus::Ok);
    cfg
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(mp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_through_the_c_api() {
    unsafe {
        let cfg = small_config();
        let mut log = ptr::null_mut();
        assert_eq!(mp_run(cfg, 3, &mut log), MpStatus::Ok, "{}", last_error());
        let rows = mp_runlog_rows(log);
        assert!(rows > 0);
        let gvfs = mp_runlog_num_gvfs(log);
        let goals = mp_runlog_num_goals(log);
        assert!(gvfs > 0 && goals > 0);

        let (mut step, mut te, mut r) = (0u64, 0.0, 0.0);
        assert_eq!(mp_runlog_row(log, rows - 1, &mut step, &mut te, &mut r), MpStatus::Ok);
        assert_eq!(step, 2_000);
        assert!(te.is_finite() && te >= 0.0);

        let mut e = 0.0;
        assert_eq!(mp_runlog_rmsve(log, rows - 1, gvfs - 1, &mut e), MpStatus::Ok);
        assert!(e >= 0.0);
        assert_eq!(mp_runlog_rmsve(log, rows - 1, gvfs, &mut e), MpStatus::OutOfRange);
        assert!(last_error().contains("out of range"));
        assert_eq!(mp_runlog_row(log, rows, &mut step, &mut te, &mut r), MpStatus::OutOfRange);

        let mut v = 0u64;
        assert_eq!(mp_runlog_visits(log, rows - 1, 0, &mut v), MpStatus::Ok);

        let mut csv = ptr::null_mut();
        assert_eq!(mp_runlog_to_csv(log, &mut csv), MpStatus::Ok);
        let csv = take_string(csv);
        assert!(csv.starts_with("step,"));
        assert_eq!(csv.lines().count(), rows + 1);

        // Same seed through the API gives the same log.
        let mut again = ptr::null_mut();
        assert_eq!(mp_run(cfg, 3, &mut again), MpStatus::Ok);
        let mut csv2 = ptr::null_mut();
        mp_runlog_to_csv(again, &mut csv2);
        assert_eq!(take_string(csv2), csv);

        mp_runlog_free(again);
        mp_runlog_free(log);
        mp_config_free(cfg);
    }
}

#[test]
fn config_json_round_trip() {
    unsafe {
        let cfg = small_config();
        let mut json = ptr::null_mut();
        assert_eq!(mp_config_to_json(cfg, &mut json), MpStatus::Ok);
        let json = take_string(json);
        let mut back = ptr::null_mut();
        assert_eq!(mp_config_from_json(cstr(&json).as_ptr(), &mut back), MpStatus::Ok, "{}", last_error());
        let mut json2 = ptr::null_mut();
        mp_config_to_json(back, &mut json2);
        assert_eq!(take_string(json2), json);
        mp_config_free(back);
        mp_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(mp_config_from_json(cstr("{not json").as_ptr(), &mut cfg), MpStatus::InvalidConfig);
        assert!(cfg.is_null());
        assert_eq!(mp_config_from_preset(cstr("no-such-preset").as_ptr(), &mut cfg), MpStatus::UnknownComponent);
        assert!(last_error().contains("no-such-preset"));
        assert_eq!(mp_config_from_preset(ptr::null(), &mut cfg), MpStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(mp_config_from_preset(bad.as_ptr().cast(), &mut cfg), MpStatus::InvalidUtf8);
        assert_eq!(mp_config_set_steps(ptr::null_mut(), 10), MpStatus::NullPointer);

        let c = small_config();
        assert_eq!(mp_config_set_steps(c, 0), MpStatus::InvalidConfig);
        assert_eq!(mp_run(c, 0, ptr::null_mut()), MpStatus::NullPointer);
        mp_config_free(c);

        assert_eq!(mp_runlog_rows(ptr::null()), 0);
        mp_runlog_free(ptr::null_mut());
        mp_config_free(ptr::null_mut());
        mp_string_free(ptr::null_mut());
    }
}

#[test]
fn oracle_check_reports() {
    unsafe {
        let mut report = ptr::null_mut();
        let mut passed = false;
        assert_eq!(mp_oracle_check(cstr("value-bound").as_ptr(), 50, 1, &mut report, &mut passed), MpStatus::Ok, "{}", last_error());
        let json: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert!(passed);
        assert_eq!(json["passed"], true);
        assert_eq!(json["trials"], 50);
        assert_eq!(mp_oracle_check(cstr("nope").as_ptr(), 1, 1, &mut report, &mut passed), MpStatus::UnknownComponent);
    }
}

#[test]
fn environment_stepping() {
    unsafe {
        let mut env = ptr::null_mut();
        assert_eq!(mp_env_new(cstr("tabular-tmaze").as_ptr(), 7, &mut env), MpStatus::Ok, "{}", last_error());
        let na = mp_env_num_actions(env);
        assert_eq!(na, 4);
        let (mut x, mut y) = (0.0, 0.0);
        assert_eq!(mp_env_state(env, &mut x, &mut y), MpStatus::Ok);

        let mut out = MpStep::default();
        for t in 0..5_000 {
            assert_eq!(mp_env_step(env, t % na, &mut out), MpStatus::Ok);
            if out.goal >= 0 {
                assert_eq!(out.behavior_discount, 0.0);
            } else {
                assert_eq!(out.behavior_discount, 1.0);
            }
            let (mut sx, mut sy) = (0.0, 0.0);
            mp_env_state(env, &mut sx, &mut sy);
            assert_eq!((sx, sy), (out.x, out.y));
        }
        assert_eq!(mp_env_step(env, na, &mut out), MpStatus::OutOfRange);
        mp_env_free(env);

        assert_eq!(mp_env_new(cstr("moon").as_ptr(), 0, &mut env), MpStatus::UnknownComponent);
        assert_eq!(mp_env_num_actions(ptr::null()), 0);
    }
}

use std::ffi::{c_void, CStr, CString};
use std::ptr;

use iirl_ffi::*;

/// Cobb-Douglas responses on three linear budgets: rational.
const RATIONAL: &str = r#"{"schema":"iirl.dataset","version":1,"mode":"utility-test","m":2,"K":3,"entries":[
{"function":{"kind":"linear","coeffs":[1.3948402714022823,0.82898687072569999],"offset":-1.8747810784358925},"response":[0.8922801994602958,0.76019626499287785]},
{"function":{"kind":"linear","coeffs":[0.92553588695560629,1.5659153355216631],"offset":-1.7066240720855617},"response":[1.22410811201601,0.36634680808599501]},
{"function":{"kind":"linear","coeffs":[1.1916322598103735,0.72897904460901897],"offset":-1.4832571563375021},"response":[0.82632210773134807,0.68394980549507611]}]}"#;

/// Each response is strictly cheaper than the other under the other's prices.
const CYCLE: &str = r#"{"schema":"iirl.dataset","version":1,"mode":"utility-test","m":2,"K":2,"entries":[
{"function":{"kind":"linear","coeffs":[1.0,1.0],"offset":-1.0},"response":[1.0,0.0]},
{"function":{"kind":"linear","coeffs":[1.0,4.0],"offset":-2.0},"response":[0.0,0.5]}]}"#;

const SCENARIO: &str = r#"{"schema":"iirl.scenario","version":1,"utilities":[
{"kind":"quadratic","matrix":{"n":2,"data":[-0.13053053928120253,0.0,0.0,-0.27495621568717848]},"linear":[3.4212204473622174,2.9221763464138313],"offset":0.0},
{"kind":"quadratic","matrix":{"n":2,"data":[-0.21544182742674156,0.0,0.0,-0.1198919045662219]},"linear":[3.4132481441711233,2.9665143126750042],"offset":0.0},
{"kind":"quadratic","matrix":{"n":2,"data":[-0.15604574505479246,0.0,0.0,-0.29820647468029915]},"linear":[2.5278351362683926,2.9069194493106845],"offset":0.0}],
"budget":{"kind":"linear","coeffs":[1.4024856636648479,1.0803837089297819],"offset":0.0},
"thresholds":[1.5965601809348549,1.2193245804838,1.2836905913037375]}"#;

fn last_error() -> String {
    let p = iirl_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dataset(json: &str) -> *mut IirlDataset {
    let text = CString::new(json).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { iirl_dataset_from_json(text.as_ptr(), &mut ds) }, IirlStatus::Ok);
    ds
}

#[test]
fn rational_dataset_passes_every_test() {
    let ds = dataset(RATIONAL);
    let (mut k, mut m) = (0, 0);
    let (mut garp, mut afriat) = (false, false);
    unsafe {
        assert_eq!(iirl_dataset_horizon(ds, &mut k), IirlStatus::Ok);
        assert_eq!(iirl_dataset_dim(ds, &mut m), IirlStatus::Ok);
        assert_eq!(iirl_garp_check(ds, 1e-9, &mut garp), IirlStatus::Ok);
        assert_eq!(iirl_afriat_test(ds, &mut afriat), IirlStatus::Ok);
        iirl_dataset_free(ds);
    }
    assert_eq!((k, m), (3, 2));
    assert!(garp && afriat);
}

#[test]
fn preference_cycle_fails_both_tests() {
    let ds = dataset(CYCLE);
    let (mut garp, mut afriat) = (true, true);
    unsafe {
        assert_eq!(iirl_garp_check(ds, 1e-9, &mut garp), IirlStatus::Ok);
        assert_eq!(iirl_afriat_test(ds, &mut afriat), IirlStatus::Ok);
        iirl_dataset_free(ds);
    }
    assert!(!garp && !afriat);
}

#[test]
fn strategy_test_rejects_wrong_mode() {
    let ds = dataset(RATIONAL);
    let mut ok = false;
    let st = unsafe { iirl_strategy_test(ds, &mut ok) };
    unsafe { iirl_dataset_free(ds) };
    assert_eq!(st, IirlStatus::InvalidInput);
    assert!(last_error().to_lowercase().contains("strategy"), "{}", last_error());
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    let garbage = CString::new("{not json").unwrap();
    assert_eq!(unsafe { iirl_dataset_from_json(garbage.as_ptr(), &mut ds) }, IirlStatus::Parse);
    assert!(ds.is_null());
    assert_eq!(unsafe { iirl_dataset_from_json(ptr::null(), &mut ds) }, IirlStatus::NullArgument);
    let bytes = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { iirl_dataset_from_json(bytes.as_ptr().cast(), &mut ds) },
        IirlStatus::InvalidUtf8
    );
    let missing = CString::new("/nonexistent/dataset.json").unwrap();
    assert_eq!(unsafe { iirl_dataset_load(missing.as_ptr(), &mut ds) }, IirlStatus::Io);
    let mut k = 0;
    assert_eq!(unsafe { iirl_dataset_horizon(ptr::null(), &mut k) }, IirlStatus::NullArgument);
    unsafe {
        iirl_dataset_free(ptr::null_mut());
        iirl_scenario_free(ptr::null_mut());
        iirl_masking_result_free(ptr::null_mut());
        iirl_string_free(ptr::null_mut());
    }
}

#[test]
fn analytic_bound_closed_form() {
    // Phi(0)^K = 2^-K when any constant is zero.
    let mut b = 0.0;
    assert_eq!(unsafe { iirl_analytic_bound(0.0, 1.0, 1.0, 0.5, 3, &mut b) }, IirlStatus::Ok);
    assert!((b - 0.125).abs() < 1e-12);
    assert_eq!(unsafe { iirl_analytic_bound(1.0, 1.0, 1.0, 0.0, 3, &mut b) }, IirlStatus::Numerical);
    assert_eq!(unsafe { iirl_analytic_bound(-1.0, 1.0, 1.0, 1.0, 3, &mut b) }, IirlStatus::InvalidInput);
}

#[test]
fn masking_round_trip() {
    let text = CString::new(SCENARIO).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { iirl_scenario_from_json(text.as_ptr(), &mut sc) }, IirlStatus::Ok);
    let (mut k, mut m) = (0, 0);
    unsafe {
        iirl_scenario_horizon(sc, &mut k);
        iirl_scenario_dim(sc, &mut m);
    }
    assert_eq!((k, m), (3, 2));

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { iirl_mask(sc, 0.5, &mut r) }, IirlStatus::Ok);
    let mut s = IirlMaskingSummary {
        eta: 0.0,
        psi_true: 0.0,
        target: 0.0,
        psi_masked: 0.0,
        violation_norm: 0.0,
        feasible: false,
        degenerate: false,
        horizon: 0,
        dim: 0,
    };
    assert_eq!(unsafe { iirl_masking_result_summary(r, &mut s) }, IirlStatus::Ok);
    assert_eq!((s.horizon, s.dim), (3, 2));
    assert!(s.feasible && s.psi_true > 0.0);
    assert!((s.target - 0.5 * s.psi_true).abs() < 1e-12);
    assert!(s.psi_masked <= s.target + 1e-6);

    let mut th = [0.0; 3];
    assert_eq!(unsafe { iirl_masking_result_thresholds(r, th.as_mut_ptr(), 3) }, IirlStatus::Ok);
    let original = [1.5965601809348549, 1.2193245804838, 1.2836905913037375];
    let norm: f64 = th.iter().zip(original).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!((norm - s.violation_norm).abs() < 1e-9);

    let mut small = [0.0; 5];
    assert_eq!(
        unsafe { iirl_masking_result_responses(r, small.as_mut_ptr(), 5) },
        IirlStatus::InvalidInput
    );
    let mut resp = [0.0; 6];
    assert_eq!(unsafe { iirl_masking_result_responses(r, resp.as_mut_ptr(), 6) }, IirlStatus::Ok);
    assert!(resp.iter().all(|v| *v >= 0.0));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { iirl_masking_result_to_json(r, &mut json) }, IirlStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("violation_norm"));
    unsafe {
        iirl_string_free(json);
        iirl_masking_result_free(r);
    }

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { iirl_mask(sc, 1.5, &mut bad) }, IirlStatus::InvalidInput);
    assert!(bad.is_null());
    unsafe { iirl_scenario_free(sc) };
}

unsafe extern "C" fn log_utility(x: *const f64, m: usize, grad: *mut f64, user: *mut c_void) -> f64 {
    *(user as *mut usize) += 1;
    let x = std::slice::from_raw_parts(x, m);
    let g = std::slice::from_raw_parts_mut(grad, m);
    let mut v = 0.0;
    for i in 0..m {
        v += (1.0 + x[i]).ln();
        g[i] = 1.0 / (1.0 + x[i]);
    }
    v
}

#[test]
fn callback_maximization() {
    // max ln(1+x) + ln(1+y) s.t. x + y <= 2: x = y = 1, multiplier 1/2.
    let mut calls = 0usize;
    let price = [1.0, 1.0];
    let mut x = [0.0; 2];
    let (mut v, mut mu) = (0.0, 0.0);
    let st = unsafe {
        iirl_maximize_linear_budget(
            Some(log_utility),
            (&mut calls as *mut usize).cast(),
            price.as_ptr(),
            2,
            2.0,
            x.as_mut_ptr(),
            &mut v,
            &mut mu,
        )
    };
    assert_eq!(st, IirlStatus::Ok);
    assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5, "{x:?}");
    assert!((v - 2.0 * 2f64.ln()).abs() < 1e-9);
    assert!((mu - 0.5).abs() < 1e-5);
    assert!(calls > 0);

    let st = unsafe {
        iirl_maximize_linear_budget(
            Some(log_utility),
            (&mut calls as *mut usize).cast(),
            price.as_ptr(),
            2,
            -1.0,
            x.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, IirlStatus::Infeasible);
    let st = unsafe {
        iirl_maximize_linear_budget(None, ptr::null_mut(), price.as_ptr(), 2, 1.0, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(st, IirlStatus::NullArgument);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(iirl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

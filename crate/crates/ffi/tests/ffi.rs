use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use rkhs_probe_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    rkp_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = rkp_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_owned()
}

unsafe fn family(json: &str) -> *mut RkpFamily {
    let mut f = ptr::null_mut();
    assert_eq!(rkp_family_from_json(c(json).as_ptr(), &mut f), RkpStatus::Ok);
    f
}

unsafe fn moments_of(json: &str, n_max: usize) -> *mut RkpMoments {
    let f = family(json);
    let mut m = ptr::null_mut();
    assert_eq!(rkp_even_moments(f, n_max, &mut m), RkpStatus::Ok);
    rkp_family_free(f);
    m
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(rkp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn family_round_trip() {
    unsafe {
        let f = family(r#"{"family":"beta","params":{"alpha":"1/2"}}"#);
        let mut s = ptr::null_mut();
        assert_eq!(rkp_family_to_json(f, &mut s), RkpStatus::Ok);
        let text = take(s);
        assert!(text.contains("\"beta\""), "{text}");
        assert!(text.contains("1/2"), "{text}");
        rkp_family_free(f);
    }
}

#[test]
fn gaussian_moments_are_double_factorials() {
    unsafe {
        let m = moments_of(r#"{"family":"gaussian","params":{"lambda":1}}"#, 4);
        let mut len = 0usize;
        assert_eq!(rkp_moments_len(m, &mut len), RkpStatus::Ok);
        assert_eq!(len, 5);
        let expected = ["1", "1", "3", "15", "105"];
        for (j, want) in expected.iter().enumerate() {
            let mut s = ptr::null_mut();
            assert_eq!(rkp_moments_get(m, j, &mut s), RkpStatus::Ok);
            assert_eq!(take(s), *want);
        }
        let mut s = ptr::null_mut();
        assert_eq!(rkp_moments_get(m, 5, &mut s), RkpStatus::OutOfRange);
        assert!(s.is_null());
        assert!(last_error().contains("index 5"));
        rkp_moments_free(m);
    }
}

#[test]
fn uniform_variance_sequence_matches_exact_values() {
    unsafe {
        let m = moments_of(r#"{"family":"beta","params":{"alpha":0}}"#, 8);
        let mut r = ptr::null_mut();
        assert_eq!(rkp_blue_variance_seq(m, 3, &mut r), RkpStatus::Ok);
        let mut len = 0usize;
        assert_eq!(rkp_report_len(r, &mut len), RkpStatus::Ok);
        assert_eq!(len, 4);
        // Uniform spectrum: var_n = prod_{i<=n} (2i / (2i+1))^2.
        let expected = [("1", 1.0), ("4/9", 4.0 / 9.0), ("64/225", 64.0 / 225.0), ("256/1225", 256.0 / 1225.0)];
        for (n, (text, value)) in expected.iter().enumerate() {
            let mut s = ptr::null_mut();
            assert_eq!(rkp_report_variance(r, n, &mut s), RkpStatus::Ok);
            assert_eq!(take(s), *text);
            let mut x = 0.0;
            assert_eq!(rkp_report_variance_f64(r, n, &mut x), RkpStatus::Ok);
            assert!((x - value).abs() < 1e-15);
        }
        let mut csv = ptr::null_mut();
        assert_eq!(rkp_report_to_csv(r, &mut csv), RkpStatus::Ok);
        assert!(take(csv).starts_with("n,"));
        let mut flag = RkpLimitFlag::Inconclusive;
        assert_eq!(rkp_report_limit_flag(r, &mut flag), RkpStatus::Ok);
        rkp_report_free(r);
        rkp_moments_free(m);
    }
}

#[test]
fn hankel_pair_and_oracle_agree() {
    unsafe {
        let m = moments_of(r#"{"family":"gaussian","params":{"lambda":1}}"#, 10);
        let (mut h, mut g) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(rkp_hankel_pair(m, 2, &mut h, &mut g), RkpStatus::Ok);
        let (h, g) = (take(h), take(g));
        let mut o = ptr::null_mut();
        assert_eq!(rkp_polyapprox_oracle(m, 2, &mut o), RkpStatus::Ok);
        let o = take(o);
        let mut r = ptr::null_mut();
        assert_eq!(rkp_blue_variance_seq(m, 2, &mut r), RkpStatus::Ok);
        let mut v = ptr::null_mut();
        assert_eq!(rkp_report_variance(r, 2, &mut v), RkpStatus::Ok);
        assert_eq!(take(v), o);
        assert!(!h.is_empty() && !g.is_empty());
        rkp_report_free(r);
        rkp_moments_free(m);
    }
}

#[test]
fn cosine_sequence_is_degenerate() {
    unsafe {
        let m = moments_of(r#"{"family":"cosine","params":{"lambda":1}}"#, 8);
        let mut r = ptr::null_mut();
        assert_eq!(rkp_blue_variance_seq(m, 4, &mut r), RkpStatus::Ok);
        let mut flag = RkpLimitFlag::Inconclusive;
        assert_eq!(rkp_report_limit_flag(r, &mut flag), RkpStatus::Ok);
        assert_eq!(flag, RkpLimitFlag::DegenerateZero);
        rkp_report_free(r);
        rkp_moments_free(m);
    }
}

#[test]
fn moments_from_strings_shift_and_mix() {
    unsafe {
        let raw = [c("1"), c("1/3"), c("1/5"), c("1/7"), c("1/9")];
        let ptrs: Vec<*const c_char> = raw.iter().map(|s| s.as_ptr()).collect();
        let mut m = ptr::null_mut();
        assert_eq!(rkp_moments_from_strings(ptrs.as_ptr(), ptrs.len(), &mut m), RkpStatus::Ok);

        let mut shifted = ptr::null_mut();
        assert_eq!(rkp_shift_measure(m, 1, &mut shifted), RkpStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(rkp_moments_get(shifted, 1, &mut s), RkpStatus::Ok);
        assert_eq!(take(s), "3/5");

        let mut mixed = ptr::null_mut();
        assert_eq!(rkp_mix_atom(m, c("1/2").as_ptr(), &mut mixed), RkpStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(rkp_moments_get(mixed, 0, &mut s), RkpStatus::Ok);
        assert_eq!(take(s), "1");
        let mut s = ptr::null_mut();
        assert_eq!(rkp_moments_get(mixed, 1, &mut s), RkpStatus::Ok);
        assert_eq!(take(s), "1/6");

        let mut csv = ptr::null_mut();
        assert_eq!(rkp_moments_to_csv(m, &mut csv), RkpStatus::Ok);
        assert!(take(csv).contains("4,1,9"));

        rkp_moments_free(mixed);
        rkp_moments_free(shifted);
        rkp_moments_free(m);
    }
}

#[test]
fn kriging_interpolates_and_estimates_scale() {
    unsafe {
        let mut k = ptr::null_mut();
        let kernel_json = c(r#"{"family":{"family":"gaussian","params":{"rate":1}},"sigma2":1}"#);
        assert_eq!(rkp_kernel_from_json(kernel_json.as_ptr(), &mut k), RkpStatus::Ok);
        let mut k0 = 0.0;
        assert_eq!(rkp_kernel_eval(k, 0.0, &mut k0), RkpStatus::Ok);
        assert_eq!(k0, 1.0);
        let mut k1 = 0.0;
        assert_eq!(rkp_kernel_eval(k, 1.0, &mut k1), RkpStatus::Ok);
        assert!((k1 - (-1.0f64).exp()).abs() < 1e-15);

        let points = [0.0, 0.25, 0.5, 0.75, 1.0];
        let values: Vec<f64> = points.iter().map(|x: &f64| x.sin()).collect();
        let queries = [0.25, 0.4];
        let mut mean = [0.0; 2];
        let mut var = [0.0; 2];
        let mut s2 = 0.0;
        let st = rkp_krige(
            k,
            points.as_ptr(),
            values.as_ptr(),
            points.len(),
            queries.as_ptr(),
            queries.len(),
            mean.as_mut_ptr(),
            var.as_mut_ptr(),
            &mut s2,
        );
        assert_eq!(st, RkpStatus::Ok, "{}", last_error());
        assert!((mean[0] - 0.25f64.sin()).abs() < 1e-14);
        assert!(var[0].abs() < 1e-14);
        assert!((mean[1] - 0.4f64.sin()).abs() < 1e-2, "{}", mean[1]);
        assert!(var[1] > 0.0);
        assert!(s2 > 0.0);

        let ones = [1.0; 5];
        let mut vb = 0.0;
        assert_eq!(
            rkp_blue_discrete_variance(k, points.as_ptr(), ones.as_ptr(), 5, &mut vb),
            RkpStatus::Ok
        );
        assert!(vb > 0.0 && vb <= 1.0);
        rkp_kernel_free(k);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(rkp_family_from_json(ptr::null(), &mut f), RkpStatus::NullPointer);
        assert!(last_error().contains("null"));

        assert_eq!(rkp_family_from_json(c("{not json").as_ptr(), &mut f), RkpStatus::Parse);
        assert!(f.is_null());

        let st = rkp_family_from_json(c(r#"{"family":"beta","params":{"alpha":-1}}"#).as_ptr(), &mut f);
        assert_ne!(st, RkpStatus::Ok);
        assert!(!last_error().is_empty());

        let st = rkp_family_from_json(c(r#"{"family":"gaussian","params":{"lambda":1,"extra":2}}"#).as_ptr(), &mut f);
        assert_eq!(st, RkpStatus::Parse);

        // Too few moments for the requested order.
        let m = moments_of(r#"{"family":"gaussian","params":{"lambda":1}}"#, 2);
        let mut r = ptr::null_mut();
        assert_eq!(rkp_blue_variance_seq(m, 5, &mut r), RkpStatus::Length);
        assert!(r.is_null());
        rkp_moments_free(m);

        let mut k = ptr::null_mut();
        let kernel_json = c(r#"{"family":"gaussian","params":{"rate":1}}"#);
        assert_eq!(rkp_kernel_from_json(kernel_json.as_ptr(), &mut k), RkpStatus::Ok);
        let points = [0.0, 0.0];
        let values = [1.0, 1.0];
        let st = rkp_krige(k, points.as_ptr(), values.as_ptr(), 2, ptr::null(), 0, ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_ne!(st, RkpStatus::Ok);
        let mut x = 0.0;
        assert_eq!(rkp_kernel_eval(k, f64::NAN, &mut x), RkpStatus::InvalidArgument);
        rkp_kernel_free(k);

        let mut ok = 0usize;
        assert_eq!(rkp_moments_len(ptr::null(), &mut ok), RkpStatus::NullPointer);
        assert_eq!(rkp_status_code(RkpStatus::Singular), 7);
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_ne!(rkp_family_from_json(ptr::null(), &mut f), RkpStatus::Ok);
        assert!(!rkp_last_error_message().is_null());
        let f = family(r#"{"family":"gaussian","params":{"lambda":2}}"#);
        assert!(rkp_last_error_message().is_null());
        rkp_family_free(f);
        rkp_family_free(ptr::null_mut());
        rkp_moments_free(ptr::null_mut());
        rkp_report_free(ptr::null_mut());
        rkp_kernel_free(ptr::null_mut());
        rkp_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/rkhs_probe.h");
    for name in [
        "rkp_family_from_json",
        "rkp_even_moments",
        "rkp_blue_variance_seq",
        "rkp_report_limit_flag",
        "rkp_krige",
        "rkp_last_error_message",
        "RKP_STATUS_SINGULAR",
        "typedef struct RkpKernel RkpKernel",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

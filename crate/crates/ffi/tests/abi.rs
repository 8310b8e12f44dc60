use std::ffi::{c_char, CStr};
use std::ptr;

use jps_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        jps_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

// Nine units, H = 3, Q = 3: stratum 1 = {1,1,2}, 2 = {2,2,3}, 3 = {3,3,3}.
const VALUES: [usize; 9] = [1, 1, 2, 2, 2, 3, 3, 3, 3];
const RANKS: [usize; 9] = [1, 1, 1, 2, 2, 2, 3, 3, 3];

fn sample() -> *mut JpsSampleHandle {
    let mut s = ptr::null_mut();
    let status = unsafe { jps_sample_new(VALUES.as_ptr(), RANKS.as_ptr(), 9, 3, 3, &mut s) };
    assert_eq!(status, JpsStatus::Ok, "{}", last_error());
    s
}

fn estimate(s: *const JpsSampleHandle, method: JpsMethod) -> (Vec<f64>, Vec<f64>) {
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(jps_estimate(s, method, &mut e), JpsStatus::Ok, "{}", last_error());
        let q = jps_estimate_num_categories(e);
        let mut p = vec![0.0; q];
        let mut c = vec![0.0; q - 1];
        assert_eq!(jps_estimate_proportions(e, p.as_mut_ptr(), p.len()), JpsStatus::Ok);
        assert_eq!(jps_estimate_cumulative(e, c.as_mut_ptr(), c.len()), JpsStatus::Ok);
        jps_estimate_free(e);
        (c, p)
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn estimates_through_handles() {
    let s = sample();
    let (c, p) = estimate(s, JpsMethod::Srs);
    assert!(close(&c, &[2.0 / 9.0, 5.0 / 9.0]), "{c:?}");
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    // Stratum means of I(X <= q), averaged over strata.
    let (c, _) = estimate(s, JpsMethod::St);
    let c1 = (2.0 / 3.0 + 0.0 + 0.0) / 3.0;
    let c2 = (1.0 + 2.0 / 3.0 + 0.0) / 3.0;
    assert!(close(&c, &[c1, c2]), "{c:?}");

    for m in [JpsMethod::Ml, JpsMethod::Iso, JpsMethod::IsoNoEmpty, JpsMethod::IsoStar] {
        let (c, p) = estimate(s, m);
        assert!(c.windows(2).all(|w| w[0] <= w[1]), "{m:?}: {c:?}");
        assert!(p.iter().all(|&v| v >= 0.0), "{m:?}: {p:?}");
    }
    unsafe { jps_sample_free(s) };
}

#[test]
fn fit_report_for_ml() {
    let s = sample();
    let mut e = ptr::null_mut();
    let (mut iterations, mut converged) = (usize::MAX, false);
    unsafe {
        assert_eq!(jps_estimate(s, JpsMethod::Ml, &mut e), JpsStatus::Ok);
        assert_eq!(jps_estimate_fit(e, &mut iterations, &mut converged), JpsStatus::Ok);
        jps_estimate_free(e);
        jps_sample_free(s);
    }
    assert!(converged);
    assert!(iterations < 1000);
}

#[test]
fn error_codes() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(jps_sample_new(ptr::null(), RANKS.as_ptr(), 9, 3, 3, &mut s), JpsStatus::NullPointer);
        assert!(s.is_null());

        let bad_rank = [1usize, 4];
        let status = jps_sample_new(VALUES.as_ptr(), bad_rank.as_ptr(), 2, 3, 3, &mut s);
        assert_eq!(status, JpsStatus::InvalidArgument);
        assert!(!last_error().is_empty());

        // Stratum 3 left empty.
        let ranks = [1usize, 2, 1, 2];
        assert_eq!(jps_sample_new(VALUES.as_ptr(), ranks.as_ptr(), 4, 3, 3, &mut s), JpsStatus::Ok);
        let mut empty = 0;
        assert_eq!(jps_sample_num_empty_strata(s, &mut empty), JpsStatus::Ok);
        assert_eq!(empty, 1);
        let mut e = ptr::null_mut();
        assert_eq!(jps_estimate(s, JpsMethod::IsoNoEmpty, &mut e), JpsStatus::EmptyStratum);
        assert_eq!(jps_estimate(s, JpsMethod::Sm, &mut e), JpsStatus::InvalidArgument);
        assert_eq!(jps_estimate(s, JpsMethod::IsoStar, &mut e), JpsStatus::Ok);

        let mut small = [0.0; 2];
        assert_eq!(jps_estimate_proportions(e, small.as_mut_ptr(), 2), JpsStatus::BufferTooSmall);
        assert!(last_error().contains("3 needed"), "{}", last_error());
        jps_estimate_free(e);
        jps_sample_free(s);

        assert_eq!(jps_estimate(ptr::null(), JpsMethod::St, &mut e), JpsStatus::NullPointer);
        assert_eq!(jps_estimate_num_categories(ptr::null()), 0);
        jps_sample_free(ptr::null_mut());
        jps_estimate_free(ptr::null_mut());
    }
}

#[test]
fn successful_calls_clear_the_error() {
    let mut s = ptr::null_mut();
    unsafe {
        jps_sample_new(ptr::null(), ptr::null(), 3, 3, 3, &mut s);
        assert!(!last_error().is_empty());
        let mut v = 0.0;
        assert_eq!(jps_incomplete_beta(0.5, 1, 1, &mut v), JpsStatus::Ok);
        assert_eq!(jps_last_error_message(ptr::null_mut(), 0), 0);
    }
}

#[test]
fn multi_ranker_estimates() {
    let ranks: Vec<usize> = RANKS.iter().flat_map(|&r| [r, r]).collect();
    let scores: Vec<f64> = VALUES.iter().enumerate().flat_map(|(i, &v)| [v as f64 + 0.1 * i as f64, v as f64]).collect();
    let single = sample();
    let (st, _) = estimate(single, JpsMethod::St);
    unsafe { jps_sample_free(single) };

    for with_scores in [true, false] {
        let mut m = ptr::null_mut();
        let z = if with_scores { scores.as_ptr() } else { ptr::null() };
        unsafe {
            let status = jps_multi_sample_new(VALUES.as_ptr(), ranks.as_ptr(), z, 9, 2, 3, 3, &mut m);
            assert_eq!(status, JpsStatus::Ok, "{}", last_error());
            for method in [JpsMethod::Sm, JpsMethod::SmStar, JpsMethod::St] {
                let mut e = ptr::null_mut();
                assert_eq!(jps_estimate_multi(m, method, &mut e), JpsStatus::Ok, "{}", last_error());
                let mut c = [0.0; 2];
                jps_estimate_cumulative(e, c.as_mut_ptr(), 2);
                // Identical rankers agree with the single-ranker estimator.
                if method != JpsMethod::SmStar {
                    assert!(close(&c, &st), "{method:?}: {c:?} vs {st:?}");
                }
                jps_estimate_free(e);
            }
            jps_multi_sample_free(m);
        }
    }
}

#[test]
fn kernel_entry_points() {
    unsafe {
        let mut v = 0.0;
        // B_x(1, 1) = x and B_x(2, 2) = 3x^2 - 2x^3.
        assert_eq!(jps_incomplete_beta(0.3, 1, 1, &mut v), JpsStatus::Ok);
        assert!((v - 0.3).abs() < 1e-14);
        jps_incomplete_beta(0.3, 2, 2, &mut v);
        assert!((v - (3.0 * 0.09 - 2.0 * 0.027)).abs() < 1e-14);
        assert_eq!(jps_incomplete_beta(1.5, 1, 1, &mut v), JpsStatus::InvalidArgument);

        // Minimum of two draws: P(min <= c) = 1 - (1 - c)^2.
        let cum = [0.3, 1.0];
        let mut pmf = [0.0; 2];
        assert_eq!(jps_order_stat_pmf(1, 2, cum.as_ptr(), 2, pmf.as_mut_ptr(), 2), JpsStatus::Ok);
        assert!((pmf[0] - 0.51).abs() < 1e-14 && (pmf[1] - 0.49).abs() < 1e-14);
        assert_eq!(jps_order_stat_pmf(3, 2, cum.as_ptr(), 2, pmf.as_mut_ptr(), 2), JpsStatus::InvalidArgument);

        let values = [1.0, 3.0, 2.0];
        let weights = [1.0, 1.0, 2.0];
        let mut fit = [0.0; 3];
        assert_eq!(jps_pava_non_increasing(values.as_ptr(), weights.as_ptr(), 3, fit.as_mut_ptr()), JpsStatus::Ok);
        let pooled = (1.0 + 3.0 + 4.0) / 4.0;
        assert!(close(&fit, &[pooled, pooled, pooled]), "{fit:?}");
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(jps_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/jps.h")).unwrap();
    for name in [
        "jps_last_error_message",
        "jps_version",
        "jps_sample_new",
        "jps_sample_free",
        "jps_sample_num_empty_strata",
        "jps_multi_sample_new",
        "jps_multi_sample_free",
        "jps_estimate",
        "jps_estimate_multi",
        "jps_estimate_free",
        "jps_estimate_num_categories",
        "jps_estimate_proportions",
        "jps_estimate_cumulative",
        "jps_estimate_fit",
        "jps_incomplete_beta",
        "jps_order_stat_pmf",
        "jps_pava_non_increasing",
        "JPS_STATUS_BUFFER_TOO_SMALL = 6",
        "JPS_METHOD_SM_STAR = 9",
        "typedef struct JpsSampleHandle JpsSampleHandle",
    ] {
        assert!(header.contains(name), "header lacks `{name}`");
    }
}

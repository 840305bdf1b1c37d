//! Drives the C entry points from Rust: the crate also builds as an
//! rlib, so the `extern "C"` functions are callable directly and the
//! whole handle lifecycle can be exercised without a C compiler.

use std::ffi::{c_int, CString};
use std::path::Path;
use std::ptr;

use conflab_capi::{
    conflab_existence_check, conflab_gibbs_weights, conflab_kms_residual, conflab_last_error,
    conflab_periodic_weights, conflab_potential_coboundary, conflab_potential_constant,
    conflab_potential_cosine, conflab_potential_cycle_values, conflab_potential_free,
    conflab_spectrum_classify, conflab_system_finite_cycle, conflab_system_free,
    conflab_system_rotation, conflab_system_squaring, ConflabStatus,
};

fn last_error_string() -> String {
    let mut buf = vec![0u8; 512];
    let n = unsafe { conflab_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(buf.len() - 1));
    String::from_utf8_lossy(&buf).into_owned()
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/conflab.h");
    let text = std::fs::read_to_string(&header).expect("header is generated by build.rs");
    for symbol in [
        "CONFLAB_H",
        "ConflabStatus",
        "ConflabSystem",
        "ConflabPotential",
        "conflab_system_rotation",
        "conflab_spectrum_classify",
        "conflab_gibbs_weights",
        "conflab_last_error",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}

#[test]
fn rotation_handles_and_spectrum_roundtrip() {
    let name = CString::new("golden").unwrap();
    let sys = unsafe { conflab_system_rotation(name.as_ptr()) };
    assert!(!sys.is_null());

    // F ≡ 1 admits a conformal measure only at β = 0.
    let pot = conflab_potential_constant(1.0);
    assert!(!pot.is_null());

    let betas: Vec<f64> = (0..17).map(|i| -4.0 + 0.5 * i as f64).collect();
    let mut shape: c_int = -1;
    let status = unsafe {
        conflab_spectrum_classify(
            sys,
            pot,
            betas.as_ptr(),
            betas.len(),
            0.2,
            20_000,
            1e-3,
            &mut shape,
        )
    };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());
    assert_eq!(shape, 0, "constant potential must classify as zero-only");

    // A single-β existence check at β = 0 always holds.
    let mut verdict: c_int = -1;
    let status =
        unsafe { conflab_existence_check(sys, pot, 0.2, 0.0, 20_000, 1e-3, &mut verdict) };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());
    assert_eq!(verdict, 0);

    unsafe {
        conflab_potential_free(pot);
        conflab_system_free(sys);
    }
}

#[test]
fn coboundary_spectrum_fills_the_line() {
    let name = CString::new("silver").unwrap();
    let sys = unsafe { conflab_system_rotation(name.as_ptr()) };
    assert!(!sys.is_null());

    let transfer = conflab_potential_cosine(1, 1.0);
    let pot = unsafe { conflab_potential_coboundary(transfer) };
    assert!(!pot.is_null());

    let betas = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut shape: c_int = -1;
    let status = unsafe {
        conflab_spectrum_classify(sys, pot, betas.as_ptr(), betas.len(), 0.1, 20_000, 1e-3, &mut shape)
    };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());
    assert_eq!(shape, 3, "a coboundary admits measures on the whole line");

    unsafe {
        conflab_potential_free(pot);
        conflab_system_free(sys);
    }
}

#[test]
fn unknown_rotation_reports_through_last_error() {
    let name = CString::new("plastic").unwrap();
    let sys = unsafe { conflab_system_rotation(name.as_ptr()) };
    assert!(sys.is_null());
    let msg = last_error_string();
    assert!(msg.contains("plastic"), "message was: {msg}");

    // Null-name path takes the NullArgument branch of the constructor.
    let sys = unsafe { conflab_system_rotation(ptr::null()) };
    assert!(sys.is_null());
}

#[test]
fn periodic_weights_match_gibbs_weights() {
    let period = 4u32;
    let values = [0.5, -1.25, 0.75, 0.0];
    assert_eq!(values.iter().sum::<f64>(), 0.0);

    let sys = conflab_system_finite_cycle(period);
    assert!(!sys.is_null());
    let pot = unsafe { conflab_potential_cycle_values(values.as_ptr(), values.len()) };
    assert!(!pot.is_null());

    let beta = 1.3;
    let mut conformal = [0.0f64; 4];
    let status = unsafe {
        conflab_periodic_weights(sys, pot, 1.0, period, beta, conformal.as_mut_ptr())
    };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());

    let mut gibbs = [0.0f64; 4];
    let status =
        unsafe { conflab_gibbs_weights(values.as_ptr(), values.len(), beta, gibbs.as_mut_ptr()) };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());

    let total: f64 = conformal.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
    for (a, b) in conformal.iter().zip(&gibbs) {
        assert!((a - b).abs() <= 1e-14, "conformal {a} vs gibbs {b}");
    }

    let mut residual = f64::NAN;
    let status = unsafe {
        conflab_kms_residual(values.as_ptr(), values.len(), beta, 8, 42, &mut residual)
    };
    assert_eq!(status, ConflabStatus::Ok, "{}", last_error_string());
    assert!(residual <= 1e-10, "residual {residual}");

    unsafe {
        conflab_potential_free(pot);
        conflab_system_free(sys);
    }
}

#[test]
fn non_telescoping_cycle_is_a_constraint_violation() {
    let values = [0.5, 0.5, 0.5]; // Σ ≠ 0: no conformal measure off β = 0
    let sys = conflab_system_finite_cycle(3);
    let pot = unsafe { conflab_potential_cycle_values(values.as_ptr(), values.len()) };

    let mut weights = [0.0f64; 3];
    let status =
        unsafe { conflab_periodic_weights(sys, pot, 1.0, 3, 1.0, weights.as_mut_ptr()) };
    assert_eq!(status, ConflabStatus::ConstraintViolated);
    assert!(last_error_string().contains("telescope"));

    let mut gibbs = [0.0f64; 3];
    let status =
        unsafe { conflab_gibbs_weights(values.as_ptr(), values.len(), 1.0, gibbs.as_mut_ptr()) };
    assert_eq!(status, ConflabStatus::ConstraintViolated);

    unsafe {
        conflab_potential_free(pot);
        conflab_system_free(sys);
    }
}

#[test]
fn null_and_domain_errors_are_typed() {
    let mut verdict: c_int = 0;
    let status = unsafe {
        conflab_existence_check(ptr::null(), ptr::null(), 0.0, 1.0, 1_000, 1e-3, &mut verdict)
    };
    assert_eq!(status, ConflabStatus::NullArgument);

    // Squaring-map seeds live on [0, 1]; 1.5 is out of range.
    let sys = conflab_system_squaring();
    let pot = conflab_potential_constant(0.0);
    let status = unsafe {
        conflab_existence_check(sys, pot, 1.5, 1.0, 1_000, 1e-3, &mut verdict)
    };
    assert_eq!(status, ConflabStatus::InvalidArgument);
    assert!(last_error_string().contains("interval"));

    // An empty β grid is rejected before any work happens.
    let mut shape: c_int = 0;
    let status = unsafe {
        conflab_spectrum_classify(sys, pot, [0.0].as_ptr(), 0, 0.5, 1_000, 1e-3, &mut shape)
    };
    assert_eq!(status, ConflabStatus::InvalidArgument);

    unsafe {
        conflab_potential_free(pot);
        conflab_system_free(sys);
    }
}

use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use nfkit_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        nf_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn boundaries_through_the_c_abi() {
    let mut d = 0.0;
    let lam = 299_792_458.0 / 28e9;
    unsafe {
        assert_eq!(nf_rayleigh_distance(2f64.sqrt(), lam, &mut d), NfStatus::Ok);
        assert!((d - 373.59).abs() < 0.01);
        assert_eq!(nf_fresnel_distance(1.0, lam, &mut d), NfStatus::Ok);
        let mut region = NfRegion::Far;
        assert_eq!(nf_classify_region(50.0, 1.0, lam, &mut region), NfStatus::Ok);
        assert_eq!(region, NfRegion::RadiatingNear);
        assert_eq!(nf_rayleigh_distance(1.0, -1.0, &mut d), NfStatus::InvalidArgument);
    }
    assert!(last_error().contains("wavelength"), "{}", last_error());
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(nf_rayleigh_distance(1.0, 1.0, ptr::null_mut()), NfStatus::NullPointer);
        let mut n = 0usize;
        assert_eq!(nf_array_len(ptr::null(), &mut n), NfStatus::NullPointer);
        nf_array_free(ptr::null_mut());
    }
    assert!(last_error().contains("null"));
}

#[test]
fn array_handles_and_steering() {
    unsafe {
        let mut a: *mut NfArray = ptr::null_mut();
        assert_eq!(nf_array_upa(4, 4, 0.01, &mut a), NfStatus::Ok);
        let mut n = 0usize;
        assert_eq!(nf_array_len(a, &mut n), NfStatus::Ok);
        assert_eq!(n, 16);
        let mut ap = 0.0;
        assert_eq!(nf_array_aperture(a, &mut ap), NfStatus::Ok);
        assert!((ap - 0.03 * 2f64.sqrt()).abs() < 1e-12);
        let (mut re, mut im) = (vec![0.0; 16], vec![0.0; 16]);
        assert_eq!(
            nf_nearfield_steering(a, 0.1, 0.0, 0.5, 0.01, false, re.as_mut_ptr(), im.as_mut_ptr(), 16),
            NfStatus::Ok
        );
        assert!(re.iter().zip(&im).all(|(r, i)| (r.hypot(*i) - 1.0).abs() < 1e-12));
        let mut err = 0.0;
        assert_eq!(
            nf_max_phase_error(a, 0.0, 0.0, 0.5, 0.01, 7, &mut err),
            NfStatus::InvalidArgument
        );
        assert_eq!(
            nf_max_phase_error(a, 0.0, 0.0, 0.5, 0.01, NfApprox::Linear as u32, &mut err),
            NfStatus::Ok
        );
        assert!(err > 0.0);
        // source on an element
        let mut b: *mut NfArray = ptr::null_mut();
        assert_eq!(nf_array_ula(3, 0.01, &mut b), NfStatus::Ok);
        assert_eq!(
            nf_nearfield_steering(b, 0.0, 0.0, 0.0, 0.01, false, re.as_mut_ptr(), im.as_mut_ptr(), 16),
            NfStatus::InvalidArgument
        );
        nf_array_free(a);
        nf_array_free(b);
    }
}

#[test]
fn dof_and_cep() {
    // diag(1, 1e-3): the second mode holds far less than 1% of the energy
    let re = [1.0, 0.0, 0.0, 1e-3];
    let im = [0.0; 4];
    let mut dof = 0usize;
    unsafe {
        assert_eq!(
            nf_effective_dof(re.as_ptr(), im.as_ptr(), 2, 2, 0.01, &mut dof),
            NfStatus::Ok
        );
        assert_eq!(dof, 1);
        assert_eq!(
            nf_effective_dof(re.as_ptr(), im.as_ptr(), 2, 2, 1e-9, &mut dof),
            NfStatus::Ok
        );
        assert_eq!(dof, 2);
        assert_eq!(
            nf_effective_dof(re.as_ptr(), im.as_ptr(), 0, 2, 0.01, &mut dof),
            NfStatus::InvalidArgument
        );
    }
    let xs = [1.0, -1.0, 0.0, 0.0];
    let ys = [0.0, 0.0, 2.0, -2.0];
    let mut r = 0.0;
    unsafe {
        assert_eq!(nf_cep(xs.as_ptr(), ys.as_ptr(), 4, &mut r), NfStatus::Ok);
        assert_eq!(nf_cep(xs.as_ptr(), ys.as_ptr(), 0, &mut r), NfStatus::InvalidArgument);
    }
}

#[test]
fn positioning_is_deterministic() {
    let spacing = 299_792_458.0 / 300e9 / 2.0;
    let run = || {
        let mut s = NfPositioningSummary::default();
        let status = unsafe { nf_positioning_experiment(64, spacing, 15.0, 500, 42, 3.0, 3.0, &mut s) };
        assert_eq!(status, NfStatus::Ok);
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(a.cep_m.to_bits(), b.cep_m.to_bits());
    assert!(a.cep_m > 0.6 && a.cep_m < 1.4, "{}", a.cep_m);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/nfkit.h");
    for name in [
        "nf_last_error_message",
        "nf_rayleigh_distance",
        "nf_fresnel_distance",
        "nf_classify_region",
        "nf_array_ula",
        "nf_array_upa",
        "nf_array_free",
        "nf_array_len",
        "nf_array_aperture",
        "nf_nearfield_steering",
        "nf_max_phase_error",
        "nf_effective_dof",
        "nf_cep",
        "nf_positioning_experiment",
        "typedef struct NfArray NfArray;",
        "NF_STATUS_NUMERICAL_FAILURE = 2",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_against_the_static_library() {
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libnfkit_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = env!("CARGO_MANIFEST_DIR");
    let exe = profile_dir.join("nfkit_c_api_test");
    let status = Command::new("cc")
        .arg(format!("{dir}/tests/c_api.c"))
        .arg(format!("-I{dir}/include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler (cc) is required for this test");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

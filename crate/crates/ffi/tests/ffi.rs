use std::ffi::CStr;
use std::ptr;

use lfbm_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { lfbm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(255));
    s
}

#[test]
fn scalar_functions_match_closed_forms() {
    let mut v = 0.0;
    // beta = 1/2 is Brownian motion
    assert_eq!(unsafe { lfbm_cov_liouville(0.3, 0.7, 0.5, &mut v) }, LfbmStatus::Ok);
    assert!((v - 0.3).abs() < 1e-12, "{v}");

    let values = [1.0; 16];
    assert_eq!(unsafe { lfbm_isometry_norm(2.0, values.as_ptr(), 16, 0.5, &mut v) }, LfbmStatus::Ok);
    assert!((v - 2f64.sqrt()).abs() < 1e-10, "{v}");

    assert_eq!(unsafe { lfbm_kernel_variance(0.0, 1.0, 0.0, 0.5, &mut v) }, LfbmStatus::Ok);
    assert!((v - 1.0).abs() < 1e-8, "{v}");

    let lambda = 4.0;
    assert_eq!(unsafe { lfbm_mode_variance(lambda, 1.0, 0.5, &mut v) }, LfbmStatus::Ok);
    let exact = (1.0 - (-2.0 * lambda).exp()) / (2.0 * lambda);
    assert!((v - exact).abs() < 1e-10 * exact, "{v} vs {exact}");
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut v = 0.0;
    assert_eq!(unsafe { lfbm_cov_liouville(0.3, 0.7, 1.5, &mut v) }, LfbmStatus::InvalidParameter);
    assert!(last_error().contains("beta"), "{}", last_error());

    assert_eq!(unsafe { lfbm_kernel_variance(0.0, 1.0, 0.3, 0.25, &mut v) }, LfbmStatus::Divergent);
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { lfbm_cov_liouville(0.3, 0.7, 0.5, ptr::null_mut()) }, LfbmStatus::NullPointer);
    assert_eq!(unsafe { lfbm_isometry_norm(1.0, ptr::null(), 4, 0.5, &mut v) }, LfbmStatus::NullPointer);

    // success clears the message
    assert_eq!(unsafe { lfbm_cov_liouville(0.3, 0.7, 0.5, &mut v) }, LfbmStatus::Ok);
    assert_eq!(last_error(), "");
    assert_eq!(unsafe { lfbm_last_error_message(ptr::null_mut(), 0) }, 0);
}

#[test]
fn kernel_handle_round_trips() {
    let n = 32;
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { lfbm_kernel_new(1.0, n, 0.4, LfbmSide::Left, &mut k) }, LfbmStatus::Ok);
    assert!(!k.is_null());

    let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut g = vec![0.0; n];
    assert_eq!(unsafe { lfbm_kernel_apply(k, f.as_ptr(), n, g.as_mut_ptr(), n - 1) }, LfbmStatus::BufferTooSmall);
    assert_eq!(unsafe { lfbm_kernel_apply(k, f.as_ptr(), n, g.as_mut_ptr(), n) }, LfbmStatus::Ok);
    let mut back = vec![0.0; n];
    assert_eq!(unsafe { lfbm_kernel_solve(k, g.as_ptr(), n, back.as_mut_ptr(), n) }, LfbmStatus::Ok);
    for (x, y) in back.iter().zip(&f) {
        assert!((x - y).abs() < 1e-10);
    }
    assert_eq!(unsafe { lfbm_kernel_apply(k, f.as_ptr(), n - 1, g.as_mut_ptr(), n) }, LfbmStatus::DimensionMismatch);
    assert_eq!(unsafe { lfbm_kernel_apply(ptr::null(), f.as_ptr(), n, g.as_mut_ptr(), n) }, LfbmStatus::NullPointer);
    unsafe { lfbm_kernel_free(k) };
    unsafe { lfbm_kernel_free(ptr::null_mut()) };
}

#[test]
fn ensemble_handle_samples_and_integrates() {
    let (n_cells, n_paths) = (16, 3000);
    let mut e = ptr::null_mut();
    let status = unsafe { lfbm_ensemble_sample(1.0, n_cells, 0.5, LfbmScheme::Cholesky, n_paths, 7, &mut e) };
    assert_eq!(status, LfbmStatus::Ok);
    let (mut p, mut m) = (0, 0);
    assert_eq!(unsafe { lfbm_ensemble_shape(e, &mut p, &mut m) }, LfbmStatus::Ok);
    assert_eq!((p, m), (n_paths, n_cells + 1));

    let mut path = vec![f64::NAN; m];
    assert_eq!(unsafe { lfbm_ensemble_path(e, 0, path.as_mut_ptr(), m) }, LfbmStatus::Ok);
    assert_eq!(path[0], 0.0);
    assert_eq!(unsafe { lfbm_ensemble_path(e, n_paths, path.as_mut_ptr(), m) }, LfbmStatus::InvalidParameter);

    // integral of 1 is W(1), variance 1 for Brownian motion
    let ones = vec![1.0; n_cells];
    let mut x = vec![0.0; n_paths];
    assert_eq!(unsafe { lfbm_ensemble_integrate(e, ones.as_ptr(), n_cells, x.as_mut_ptr(), n_paths) }, LfbmStatus::Ok);
    let mut last = vec![0.0; m];
    for (i, xi) in x.iter().enumerate().take(5) {
        unsafe { lfbm_ensemble_path(e, i, last.as_mut_ptr(), m) };
        assert!((xi - last[n_cells]).abs() < 1e-12);
    }
    let var = x.iter().map(|v| v * v).sum::<f64>() / n_paths as f64;
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n_paths as f64).sqrt(), "{var}");

    // the same seed reproduces the paths
    let mut e2 = ptr::null_mut();
    unsafe { lfbm_ensemble_sample(1.0, n_cells, 0.5, LfbmScheme::Cholesky, n_paths, 7, &mut e2) };
    let mut other = vec![0.0; m];
    unsafe {
        lfbm_ensemble_path(e, 9, path.as_mut_ptr(), m);
        lfbm_ensemble_path(e2, 9, other.as_mut_ptr(), m);
    }
    assert_eq!(path, other);
    unsafe {
        lfbm_ensemble_free(e);
        lfbm_ensemble_free(e2);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lfbm.h")).unwrap();
    for name in [
        "#ifndef LFBM_H",
        "typedef struct LfbmKernel LfbmKernel;",
        "typedef struct LfbmEnsemble LfbmEnsemble;",
        "LFBM_STATUS_DIVERGENT = 6",
        "lfbm_last_error_message(",
        "lfbm_cov_liouville(",
        "lfbm_isometry_norm(",
        "lfbm_kernel_variance(",
        "lfbm_mode_variance(",
        "lfbm_kernel_new(",
        "lfbm_kernel_apply(",
        "lfbm_kernel_solve(",
        "lfbm_kernel_free(",
        "lfbm_ensemble_sample(",
        "lfbm_ensemble_shape(",
        "lfbm_ensemble_path(",
        "lfbm_ensemble_integrate(",
        "lfbm_ensemble_free(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"lfbm.h\"\nint main(void) { double v; return lfbm_cov_liouville(0.1, 0.2, 0.5, &v) == LFBM_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

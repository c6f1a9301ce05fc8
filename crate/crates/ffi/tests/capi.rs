use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use nfimaging_ffi::*;

const VOXELS: &str = r#"
[scene]
kind = "random-voxels"
grid = [3, 3, 3]
active = 2

[arrays]
kind = "corner-units"
rows = 4
cols = 4

[solver]
name = "ls"
"#;

fn last_error() -> String {
    unsafe {
        let n = nfi_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as std::ffi::c_char; n + 1];
        nfi_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn voxel_cell_round_trip() {
    let text = CString::new(VOXELS).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(nfi_config_from_str(text.as_ptr(), &mut cfg), NfiStatus::Ok);
        let mut img = ptr::null_mut();
        assert_eq!(nfi_run_cell(cfg, 3, &mut img), NfiStatus::Ok, "{}", last_error());
        let (mut rows, mut cols) = (0usize, 0usize);
        assert_eq!(nfi_image_shape(img, &mut rows, &mut cols), NfiStatus::Ok);
        assert_eq!((rows, cols), (27, 1));
        let mut small = vec![0.0; 5];
        assert_eq!(nfi_image_copy(img, small.as_mut_ptr(), small.len()), NfiStatus::BufferTooSmall);
        assert!(last_error().contains("buffer"));
        let mut data = vec![0.0; rows * cols];
        assert_eq!(nfi_image_copy(img, data.as_mut_ptr(), data.len()), NfiStatus::Ok);
        assert!(data.iter().any(|&v| v > 0.0));
        let mut m = NfiMetrics::default();
        assert_eq!(nfi_image_metrics(img, &mut m), NfiStatus::Ok);
        assert!(m.pcc > 0.9, "{m:?}");
        nfi_image_free(img);
        nfi_config_free(cfg);
    }
}

#[test]
fn config_errors_carry_messages() {
    let text = CString::new("[scene]\nkind = \"teapot\"\n").unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { nfi_config_from_str(text.as_ptr(), &mut cfg) };
    assert_eq!(s, NfiStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("scene.kind"));
}

#[test]
fn null_and_utf8_are_rejected() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(nfi_config_from_str(ptr::null(), &mut cfg), NfiStatus::NullPointer);
        let bad = [0xffu8 as std::ffi::c_char, 0];
        assert_eq!(nfi_config_from_str(bad.as_ptr(), &mut cfg), NfiStatus::InvalidUtf8);
        assert_eq!(nfi_run_cell(ptr::null(), 0, ptr::null_mut()), NfiStatus::NullPointer);
        nfi_config_free(ptr::null_mut());
        nfi_image_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_is_reported() {
    let p = CString::new("/nonexistent/nfimaging.toml").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { nfi_config_from_file(p.as_ptr(), &mut cfg) }, NfiStatus::Config);
    assert!(last_error().contains("cannot read"));
}

#[test]
fn metrics_of_identical_vectors() {
    let a = [0.0, 0.5, 2.0, 1.0];
    let mut m = NfiMetrics::default();
    assert_eq!(unsafe { nfi_metrics(a.as_ptr(), a.as_ptr(), a.len(), &mut m) }, NfiStatus::Ok);
    assert_eq!(m.mse, 0.0);
    assert!((m.pcc - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { nfi_metrics(a.as_ptr(), a.as_ptr(), 0, &mut m) }, NfiStatus::InvalidArgument);
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(nfi_status_name(NfiStatus::BufferTooSmall)) };
    assert_eq!(name.to_str().unwrap(), "buffer-too-small");
    let v = unsafe { CStr::from_ptr(nfi_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/nfimaging.h")).unwrap();
    for f in ["nfi_config_from_str", "nfi_run_cell", "nfi_image_copy", "nfi_last_error_message", "NFI_STATUS_PANIC = 10"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    // Syntax-check the header with the system C compiler when there is one.
    let src = std::env::temp_dir().join("nfimaging_header_check.c");
    std::fs::write(&src, "#include \"nfimaging.h\"\nint main(void) { NfiMetrics m = {0}; (void)m; return NFI_STATUS_OK; }\n").unwrap();
    match std::process::Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(dir.join("include")).arg(&src).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}

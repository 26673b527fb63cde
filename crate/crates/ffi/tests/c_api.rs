use std::ffi::CStr;
use std::ptr;

use penta_coulomb_ffi::*;

fn message() -> String {
    unsafe { CStr::from_ptr(pc_last_error_message()) }.to_string_lossy().into_owned()
}

fn unit_pentagon() -> *mut PcLinkage {
    let mut l = ptr::null_mut();
    let sides = [1.0; 5];
    assert_eq!(unsafe { pc_linkage_new(sides.as_ptr(), 5, &mut l) }, PcStatus::Ok);
    l
}

fn minimize(l: *const PcLinkage, q: [f64; 5]) -> ([f64; 10], f64) {
    let (mut v, mut e) = ([0.0; 10], 0.0);
    assert_eq!(unsafe { pc_minimize(l, q.as_ptr(), v.as_mut_ptr(), &mut e) }, PcStatus::Ok, "{}", message());
    (v, e)
}

#[test]
fn regular_pentagon_round_trip() {
    let l = unit_pentagon();
    let (v, e) = minimize(l, [1.0; 5]);
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    assert!((e - 5.0 / phi).abs() < 1e-9);
    let (mut s, mut t) = (0.0, 0.0);
    let fixed = [1.0; 3];
    assert_eq!(unsafe { pc_stabilize_pentagon(v.as_ptr(), fixed.as_ptr(), &mut s, &mut t) }, PcStatus::Ok);
    assert!((s - 1.0).abs() < 1e-9 && (t - 1.0).abs() < 1e-9);
    assert!(message().is_empty());
    unsafe { pc_linkage_free(l) };
}

#[test]
fn square_quadrilateral() {
    let v = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let mut t = 0.0;
    assert_eq!(unsafe { pc_stabilize_quad(v.as_ptr(), &mut t) }, PcStatus::Ok);
    assert!((t - 1.0).abs() < 1e-12);
}

#[test]
fn navigation_through_handles() {
    let l = unit_pentagon();
    let fixed = [1.0; 3];
    let (start, _) = minimize(l, [1.0; 5]);
    let (target, _) = minimize(l, [1.0, 1.0, 1.4, 1.0, 0.8]);
    let mut tr = ptr::null_mut();
    let status = unsafe { pc_navigate(l, start.as_ptr(), target.as_ptr(), fixed.as_ptr(), 40, &mut tr) };
    assert_eq!(status, PcStatus::Ok, "{}", message());
    let mut n = 0;
    assert_eq!(unsafe { pc_trajectory_len(tr, &mut n) }, PcStatus::Ok);
    assert_eq!(n, 41);
    let (mut s, mut t, mut e, mut v) = (0.0, 0.0, 0.0, [0.0; 10]);
    assert_eq!(unsafe { pc_trajectory_step(tr, n - 1, &mut s, &mut t, &mut e, v.as_mut_ptr()) }, PcStatus::Ok);
    assert!((s - 0.8).abs() < 1e-9 && (t - 1.4).abs() < 1e-9, "s = {s}, t = {t}");
    let end = v.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(end < 1e-6, "endpoint error {end}");
    let out_of_range = unsafe { pc_trajectory_step(tr, n, &mut s, &mut t, &mut e, v.as_mut_ptr()) };
    assert_eq!(out_of_range, PcStatus::InvalidArgument);
    assert!(message().contains("out of range"));
    unsafe {
        pc_trajectory_free(tr);
        pc_linkage_free(l);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let mut l = ptr::null_mut();
    let bad = [1.0, 1.0, 5.0, 1.0, 1.0];
    assert_eq!(unsafe { pc_linkage_new(bad.as_ptr(), 5, &mut l) }, PcStatus::InvalidLinkage);
    assert!(l.is_null());
    assert!(!message().is_empty());

    assert_eq!(unsafe { pc_linkage_new(ptr::null(), 5, &mut l) }, PcStatus::NullPointer);
    let mut n = 0;
    assert_eq!(unsafe { pc_linkage_sides(ptr::null(), &mut n) }, PcStatus::NullPointer);

    let l = unit_pentagon();
    let (mut v, mut e) = ([0.0; 10], 0.0);
    let negative = [1.0, 1.0, -1.0, 1.0, 1.0];
    let status = unsafe { pc_minimize(l, negative.as_ptr(), v.as_mut_ptr(), &mut e) };
    assert_ne!(status, PcStatus::Ok);
    assert_eq!(v, [0.0; 10], "outputs untouched on failure");

    let collapsed = [0.0; 8];
    let mut t = 0.0;
    assert_ne!(unsafe { pc_stabilize_quad(collapsed.as_ptr(), &mut t) }, PcStatus::Ok);
    unsafe {
        pc_linkage_free(l);
        pc_linkage_free(ptr::null_mut());
        pc_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn header_is_current_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/penta_coulomb.h")).unwrap();
    for name in ["pc_linkage_new", "pc_minimize", "pc_navigate", "pc_trajectory_step", "PC_STATUS_INTERNAL"] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let Ok(cc) = which_cc() else { return };
    let tmp = std::env::temp_dir().join(format!("pc_header_{}.c", std::process::id()));
    std::fs::write(&tmp, "#include \"penta_coulomb.h\"\nint main(void) { return pc_last_error_message() == 0; }\n").unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&tmp)
        .output()
        .unwrap();
    let _ = std::fs::remove_file(&tmp);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}

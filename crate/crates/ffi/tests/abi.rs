//! The C entry points called from Rust, plus a C program built against the
//! generated header and the static library.

use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use t2s_ffi::*;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = t2s_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    t2s_string_free(p);
    s
}

fn catalog() -> *mut T2sCatalog {
    let path = c(repo().join("fixtures/spider/tables.json").to_str().unwrap());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { t2s_catalog_load(path.as_ptr(), &mut out) }, T2sStatus::Ok);
    assert!(!out.is_null());
    out
}

#[test]
fn validate_and_repair_through_the_abi() {
    let cat = catalog();
    unsafe {
        let mut n = 0;
        assert_eq!(t2s_catalog_len(cat, &mut n), T2sStatus::Ok);
        assert!(n >= 5);

        let db = c("employees");
        let bad = c("SELECT SUM(salary) FROM Employee WHERE dept = 'Sales';");
        let mut aligned = true;
        let mut json = ptr::null_mut();
        assert_eq!(
            t2s_validate(cat, db.as_ptr(), bad.as_ptr(), &mut aligned, &mut json),
            T2sStatus::Ok
        );
        assert!(!aligned);
        let report: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(report["issues"].as_array().unwrap().len(), 2);

        let mut fixed = ptr::null_mut();
        assert_eq!(t2s_repair(cat, db.as_ptr(), bad.as_ptr(), &mut fixed), T2sStatus::Ok);
        let fixed = take(fixed);
        assert_eq!(fixed, "SELECT SUM(salary) FROM Employees WHERE department = 'Sales';");
        let fixed = c(&fixed);
        assert_eq!(
            t2s_validate(cat, db.as_ptr(), fixed.as_ptr(), &mut aligned, ptr::null_mut()),
            T2sStatus::Ok
        );
        assert!(aligned);

        let nowhere = c("nowhere");
        assert_eq!(
            t2s_validate(cat, nowhere.as_ptr(), fixed.as_ptr(), &mut aligned, ptr::null_mut()),
            T2sStatus::NotFound
        );
        assert!(last_error().contains("nowhere"));
        t2s_catalog_free(cat);
    }
}

#[test]
fn errors_are_codes_with_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(t2s_catalog_load(ptr::null(), &mut out), T2sStatus::NullArgument);
        assert_eq!(last_error(), "path is null");
        let missing = c("/no/such/tables.json");
        assert_eq!(t2s_catalog_load(missing.as_ptr(), &mut out), T2sStatus::InvalidInput);
        assert!(out.is_null());

        let bytes = [0xffu8, 0xfe, 0];
        let mut sql = ptr::null_mut();
        assert_eq!(t2s_extract_sql(bytes.as_ptr().cast(), &mut sql), T2sStatus::InvalidUtf8);
        let prose = c("No idea, sorry.");
        assert_eq!(t2s_extract_sql(prose.as_ptr(), &mut sql), T2sStatus::InvalidInput);

        // A successful call clears the previous message.
        let raw = c("Sure!\n```sql\nSELECT 1;\n```");
        assert_eq!(t2s_extract_sql(raw.as_ptr(), &mut sql), T2sStatus::Ok);
        assert!(t2s_last_error().is_null());
        assert_eq!(take(sql), "SELECT 1;");

        t2s_catalog_free(ptr::null_mut());
        t2s_string_free(ptr::null_mut());
    }
}

#[test]
fn match_and_mean() {
    unsafe {
        let pred = c("SELECT e.name FROM Employees AS e WHERE 50000 < e.salary");
        let gold = c("SELECT name FROM Employees WHERE salary > 50000;");
        let mut matched = false;
        assert_eq!(
            t2s_exact_match(pred.as_ptr(), gold.as_ptr(), false, &mut matched),
            T2sStatus::Ok
        );
        assert!(matched);

        let values = [-0.1, -0.3, -0.2];
        let mut mean = 0.0;
        assert_eq!(
            t2s_mean_logprob(values.as_ptr(), values.len(), &mut mean),
            T2sStatus::Ok
        );
        assert_eq!(mean, -0.2);
        assert_eq!(t2s_mean_logprob(ptr::null(), 0, &mut mean), T2sStatus::InvalidInput);
        assert_eq!(t2s_mean_logprob(ptr::null(), 3, &mut mean), T2sStatus::NullArgument);

        let v = CStr::from_ptr(t2s_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "t2s.h"

int main(int argc, char **argv) {
    T2sCatalog *cat = NULL;
    if (t2s_catalog_load(argv[1], &cat) != T2S_STATUS_OK) {
        fprintf(stderr, "load: %s\n", t2s_last_error());
        return 1;
    }
    char *fixed = NULL;
    if (t2s_repair(cat, "employees", "SELECT SUM(salary) FROM Employee WHERE dept = 'Sales';", &fixed) != T2S_STATUS_OK) {
        return 2;
    }
    printf("%s\n", fixed);
    t2s_string_free(fixed);
    bool aligned = true;
    if (t2s_validate(cat, "missing", "SELECT 1", &aligned, NULL) != T2S_STATUS_NOT_FOUND) {
        return 3;
    }
    t2s_catalog_free(cat);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let Some(cc) = which("cc") else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    // target/<profile>/deps/abi-<hash> -> target/<profile>/libt2s_ffi.a
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("libt2s_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = work.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .arg(repo().join("fixtures/spider/tables.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "SELECT SUM(salary) FROM Employees WHERE department = 'Sales';\n"
    );
}

fn which(name: &str) -> Option<PathBuf> {
    std::env::var_os("PATH")
        .into_iter()
        .flat_map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

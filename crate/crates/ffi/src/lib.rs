//! C ABI over the schema catalog, SQL validation, extraction and exact-set
//! matching.
//!
//! Every function returns a [`T2sStatus`]. On failure the message is kept
//! per thread and can be read with [`t2s_last_error`]. Strings handed out by
//! this library must be released with [`t2s_string_free`], catalogs with
//! [`t2s_catalog_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use t2s_core::eval::{exact_set_match, EmOptions};
use t2s_core::extract::extract_sql;
use t2s_core::pipeline::mean_logprob;
use t2s_core::schema::SchemaCatalog;
use t2s_core::sql::{apply_repairs, suggest_repairs, validate_sql};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T2sStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The named database is not in the catalog.
    NotFound = 3,
    /// The input could not be loaded or parsed.
    InvalidInput = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Opaque schema catalog.
pub struct T2sCatalog {
    inner: SchemaCatalog,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: T2sStatus, msg: impl Into<String>) -> T2sStatus {
    set_error(msg);
    status
}

/// Runs `f`, clearing the last error first and turning panics into
/// [`T2sStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), (T2sStatus, String)>) -> T2sStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => T2sStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(T2sStatus::Internal, "panic in t2s"),
    }
}

type Res<T> = Result<T, (T2sStatus, String)>;

unsafe fn text<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err((T2sStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (T2sStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Res<()> {
    if p.is_null() {
        Err((T2sStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> Res<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (T2sStatus::Internal, "result contains a NUL byte".to_string()))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn t2s_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn t2s_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn t2s_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a catalog from a SPIDER `tables.json`, a native schema file or a
/// directory of native schemas.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_catalog_load(path: *const c_char, out: *mut *mut T2sCatalog) -> T2sStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = text(path, "path")?;
        let inner = SchemaCatalog::load_path(Path::new(path)).map_err(|e| (T2sStatus::InvalidInput, e.to_string()))?;
        *out = Box::into_raw(Box::new(T2sCatalog { inner }));
        Ok(())
    })
}

/// Number of databases in the catalog.
///
/// # Safety
/// `catalog` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_catalog_len(catalog: *const T2sCatalog, out: *mut usize) -> T2sStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let c = catalog
            .as_ref()
            .ok_or((T2sStatus::NullArgument, "catalog is null".to_string()))?;
        *out = c.inner.len();
        Ok(())
    })
}

/// Releases a catalog. Null is ignored.
///
/// # Safety
/// `catalog` must come from [`t2s_catalog_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn t2s_catalog_free(catalog: *mut T2sCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Validates `sql` against database `db`. Writes whether the query is
/// aligned with the schema and, when `report_json` is non-null, the full
/// report as JSON. An unparsable query is not an error: it yields
/// `aligned = false` and a report carrying the syntax error.
///
/// # Safety
/// Strings must be NUL-terminated; `aligned` must be writable; the handle
/// must be live.
#[no_mangle]
pub unsafe extern "C" fn t2s_validate(
    catalog: *const T2sCatalog,
    db: *const c_char,
    sql: *const c_char,
    aligned: *mut bool,
    report_json: *mut *mut c_char,
) -> T2sStatus {
    guard(|| {
        out_ptr(aligned, "aligned")?;
        let c = catalog
            .as_ref()
            .ok_or((T2sStatus::NullArgument, "catalog is null".to_string()))?;
        let (db, sql) = (text(db, "db")?, text(sql, "sql")?);
        let schema = c
            .inner
            .get(db)
            .ok_or_else(|| (T2sStatus::NotFound, format!("unknown database '{db}'")))?;
        let report = validate_sql(sql, schema);
        *aligned = report.aligned;
        if !report_json.is_null() {
            let json = serde_json::to_string(&report).map_err(|e| (T2sStatus::Internal, e.to_string()))?;
            *report_json = to_c(json)?;
        }
        Ok(())
    })
}

/// Applies the suggested name repairs for `sql` and writes the rewritten
/// query. An aligned query comes back unchanged.
///
/// # Safety
/// As for [`t2s_validate`]; `repaired` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_repair(
    catalog: *const T2sCatalog,
    db: *const c_char,
    sql: *const c_char,
    repaired: *mut *mut c_char,
) -> T2sStatus {
    guard(|| {
        out_ptr(repaired, "repaired")?;
        let c = catalog
            .as_ref()
            .ok_or((T2sStatus::NullArgument, "catalog is null".to_string()))?;
        let (db, sql) = (text(db, "db")?, text(sql, "sql")?);
        let schema = c
            .inner
            .get(db)
            .ok_or_else(|| (T2sStatus::NotFound, format!("unknown database '{db}'")))?;
        let report = validate_sql(sql, schema);
        if !report.syntax_ok {
            return Err((
                T2sStatus::InvalidInput,
                report.syntax_error.unwrap_or_else(|| "syntax error".into()),
            ));
        }
        *repaired = to_c(apply_repairs(sql, &suggest_repairs(&report, schema)))?;
        Ok(())
    })
}

/// Recovers the SQL statement from raw model output.
///
/// # Safety
/// `raw` must be NUL-terminated; `sql` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_extract_sql(raw: *const c_char, sql: *mut *mut c_char) -> T2sStatus {
    guard(|| {
        out_ptr(sql, "sql")?;
        let raw = text(raw, "raw")?;
        let r = extract_sql(raw).map_err(|e| (T2sStatus::InvalidInput, e.to_string()))?;
        *sql = to_c(r.sql)?;
        Ok(())
    })
}

/// Exact-set match of a predicted query against a gold query.
///
/// # Safety
/// Strings must be NUL-terminated; `matched` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_exact_match(
    pred: *const c_char,
    gold: *const c_char,
    ignore_literals: bool,
    matched: *mut bool,
) -> T2sStatus {
    guard(|| {
        out_ptr(matched, "matched")?;
        let (pred, gold) = (text(pred, "pred")?, text(gold, "gold")?);
        *matched = exact_set_match(pred, gold, &EmOptions { ignore_literals }).em;
        Ok(())
    })
}

/// Mean of `len` token log-probabilities.
///
/// # Safety
/// `values` must point to `len` doubles; `mean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn t2s_mean_logprob(values: *const f64, len: usize, mean: *mut f64) -> T2sStatus {
    guard(|| {
        out_ptr(mean, "mean")?;
        if values.is_null() && len > 0 {
            return Err((T2sStatus::NullArgument, "values is null".into()));
        }
        let slice = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(values, len)
        };
        *mean = mean_logprob(slice).map_err(|e| (T2sStatus::InvalidInput, e.to_string()))?;
        Ok(())
    })
}

//! C interface to `netrand`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `netrand_run_test` and released with the matching `*_free`. Every
//! fallible call returns a status code; on failure the message is available
//! from `netrand_last_error` until the next failing call on the same thread.
//! Strings returned by the library must be released with
//! `netrand_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use netrand::config::{run_with_settings, TestSettings};
use netrand::exposure::{compute_exposures, Comparator, ExposureMapping};
use netrand::graph::degree_diagnostics;
use netrand::inference::TestReport;
use netrand::simulation::{run_table, Dgp, SimTechnique, TableId, TablePlan};
use netrand::{Covariate, Dataset, Error, ErrorKind, Graph, TreatmentVector};
use serde::Deserialize;

pub const NETRAND_OK: i32 = 0;
pub const NETRAND_NULL_POINTER: i32 = 1;
pub const NETRAND_INVALID_ARGUMENT: i32 = 2;
pub const NETRAND_DATA_ERROR: i32 = 3;
pub const NETRAND_INFEASIBLE: i32 = 4;
/// The requested quantity does not exist for this report.
pub const NETRAND_NOT_AVAILABLE: i32 = 5;
pub const NETRAND_PANIC: i32 = 6;

/// Undirected network.
pub struct NetrandGraph(Graph);

/// Outcomes, treatment and optional covariate.
pub struct NetrandDataset(Dataset);

/// Result of one test.
pub struct NetrandReport(TestReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NetrandDegreeDiagnostics {
    pub third_moment: f64,
    pub path3_density: f64,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub isolated_units: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => NETRAND_INVALID_ARGUMENT,
            ErrorKind::Data => NETRAND_DATA_ERROR,
            ErrorKind::Infeasible => NETRAND_INFEASIBLE,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NETRAND_NULL_POINTER, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(NETRAND_INVALID_ARGUMENT, msg.into())
}

/// Runs `f`, converting failures and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NETRAND_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            NETRAND_PANIC
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| invalid("string is not valid UTF-8"))
}

fn out_string(s: String, out: *mut *mut c_char) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| invalid("output contains a NUL byte"))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn netrand_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn netrand_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a network from `n_edges` pairs stored flat in `edges`
/// (`edges[2k], edges[2k+1]`). Duplicate edges are merged.
///
/// # Safety
/// `edges` must point to `2 * n_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_graph_new(
    n_units: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut NetrandGraph,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let flat = slice(edges, n_edges * 2, "edges")?;
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let g = Graph::new(n_units, &pairs)?;
        *out = Box::into_raw(Box::new(NetrandGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from `netrand_graph_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn netrand_graph_free(g: *mut NetrandGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_degree_diagnostics(g: *const NetrandGraph, out: *mut NetrandDegreeDiagnostics) -> i32 {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = degree_diagnostics(&g.0);
        *out = NetrandDegreeDiagnostics {
            third_moment: d.third_moment,
            path3_density: d.path3_density,
            max_degree: d.max_degree,
            mean_degree: d.mean_degree,
            isolated_units: d.isolated_units,
        };
        Ok(())
    })
}

/// Exposure of every unit under the fraction-of-treated-neighbors rule:
/// 1 when the fraction exceeds `threshold` (or reaches it, when
/// `strict == 0`). Writes `n_units` values to `out`.
///
/// # Safety
/// `t` and `out` must each hold `n_units` elements.
#[no_mangle]
pub unsafe extern "C" fn netrand_compute_exposures(
    g: *const NetrandGraph,
    t: *const u8,
    n_units: usize,
    threshold: f64,
    strict: i32,
    out: *mut u32,
) -> i32 {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let t = slice(t, n_units, "t")?;
        if out.is_null() && n_units > 0 {
            return Err(null("out"));
        }
        let cmp = if strict != 0 {
            Comparator::StrictGreater
        } else {
            Comparator::GreaterOrEqual
        };
        let pi = compute_exposures(&ExposureMapping::fraction_threshold(threshold, cmp), t, &g.0)?;
        for (i, v) in pi.iter().enumerate() {
            *out.add(i) = v.0;
        }
        Ok(())
    })
}

/// Dataset from outcomes `y` and 0/1 treatments `t`. `x` may be null; when
/// present it holds an integer covariate code per unit.
///
/// # Safety
/// `y`, `t` and (if non-null) `x` must each hold `n_units` elements.
#[no_mangle]
pub unsafe extern "C" fn netrand_dataset_new(
    y: *const f64,
    t: *const u8,
    x: *const u32,
    n_units: usize,
    out: *mut *mut NetrandDataset,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let y = slice(y, n_units, "y")?.to_vec();
        let t = TreatmentVector::new(slice(t, n_units, "t")?.to_vec())?;
        let cov = if x.is_null() {
            None
        } else {
            let labels: Vec<String> = slice(x, n_units, "x")?.iter().map(|v| v.to_string()).collect();
            Some(Covariate::from_labels(&labels))
        };
        *out = Box::into_raw(Box::new(NetrandDataset(Dataset::new(y, t, cov)?)));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle from `netrand_dataset_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn netrand_dataset_free(d: *mut NetrandDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Runs one test. `settings_json` uses the same fields as the command
/// line's `--config` file; null means all defaults.
///
/// # Safety
/// Handles must be live; `settings_json` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn netrand_run_test(
    g: *const NetrandGraph,
    d: *const NetrandDataset,
    settings_json: *const c_char,
    seed: u64,
    out: *mut *mut NetrandReport,
) -> i32 {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let settings: TestSettings = match opt_str(settings_json)? {
            Some(s) => serde_json::from_str(s).map_err(|e| invalid(format!("settings: {e}")))?,
            None => TestSettings::default(),
        };
        let report = run_with_settings(&g.0, &d.0, &settings, seed)?;
        *out = Box::into_raw(Box::new(NetrandReport(report)));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from `netrand_run_test` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn netrand_report_free(r: *mut NetrandReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Full report as JSON.
///
/// # Safety
/// `r` must be a live report; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_report_to_json(r: *const NetrandReport, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&r.0).map_err(|e| Fail(NETRAND_DATA_ERROR, e.to_string()))?;
        out_string(s, out)
    })
}

/// Number of per-cell p-values (zero for a combined test or a null handle).
///
/// # Safety
/// `r` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn netrand_report_cell_count(r: *const NetrandReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.per_cell_pvalues.len())
}

/// The `index`-th per-cell p-value, cells in label order. The label is
/// written to `label` when it is non-null.
///
/// # Safety
/// `r` must be a live report; `pvalue` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_report_cell_pvalue(
    r: *const NetrandReport,
    index: usize,
    pvalue: *mut f64,
    label: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        let pvalue = pvalue.as_mut().ok_or_else(|| null("pvalue"))?;
        let (k, p) = r
            .0
            .per_cell_pvalues
            .iter()
            .nth(index)
            .ok_or_else(|| Fail(NETRAND_NOT_AVAILABLE, format!("no cell {index}")))?;
        *pvalue = *p;
        if !label.is_null() {
            out_string(k.clone(), label)?;
        }
        Ok(())
    })
}

/// p-value of a combined test; `NETRAND_NOT_AVAILABLE` for multiple tests.
///
/// # Safety
/// `r` must be a live report; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_report_combined_pvalue(r: *const NetrandReport, out: *mut f64) -> i32 {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = r
            .0
            .combined_pvalue
            .ok_or_else(|| Fail(NETRAND_NOT_AVAILABLE, "not a combined test".into()))?;
        Ok(())
    })
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct PlanOverrides {
    reps: Option<usize>,
    b: Option<usize>,
    sigmas: Option<Vec<f64>>,
    dgps: Option<Vec<Dgp>>,
    sizes: Option<Vec<usize>>,
    techniques: Option<Vec<SimTechnique>>,
}

/// Runs a size/power table (`"1"`..`"6"` or `"fig2"`) and returns it as CSV.
/// `overrides_json` may set `reps`, `b`, `sigmas`, `dgps`, `sizes` and
/// `techniques`; null keeps the standard plan.
///
/// # Safety
/// `table` must be NUL-terminated; `overrides_json` null or NUL-terminated;
/// `csv_out` writable.
#[no_mangle]
pub unsafe extern "C" fn netrand_simulate(
    table: *const c_char,
    overrides_json: *const c_char,
    seed: u64,
    csv_out: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let table: TableId = opt_str(table)?.ok_or_else(|| null("table"))?.parse()?;
        if csv_out.is_null() {
            return Err(null("csv_out"));
        }
        let o: PlanOverrides = match opt_str(overrides_json)? {
            Some(s) => serde_json::from_str(s).map_err(|e| invalid(format!("overrides: {e}")))?,
            None => PlanOverrides::default(),
        };
        let mut plan = TablePlan::standard(table);
        if let Some(v) = o.reps {
            plan.base.reps = v;
        }
        if let Some(v) = o.b {
            plan.base.b = v;
        }
        if let Some(v) = o.sigmas {
            plan.sigmas = v;
        }
        if let Some(v) = o.dgps {
            plan.dgps = v;
        }
        if let Some(v) = o.sizes {
            plan.sizes = v;
        }
        if let Some(v) = o.techniques {
            plan.base.techniques = v;
        }
        let result = run_table(table, &plan, seed)?;
        out_string(result.to_csv(), csv_out)
    })
}

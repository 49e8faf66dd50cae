//! C ABI over poem-core.
//!
//! Every fallible call returns a `PoemStatus`; on failure
//! `poem_last_error` describes the problem. Strings returned to the caller
//! are owned by the caller and released with `poem_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use poem_core::clock::SystemClock;
use poem_core::console::{ConsoleApi, ConsoleError};
use poem_core::domain::{parse_report, Field, Report, SensorIndicator, UserId};
use poem_core::ingest::IngestionService;
use poem_core::store::{ProvisionArgs, StoreError, Stores, StreamId};
use poem_core::sumve::{tec_annual, MachinePowerProfile, TimeFractions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoemStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Invalid = 4,
    NotFound = 5,
    /// The ingestion service answered with a non-2xx status.
    Rejected = 6,
    Storage = 7,
    Panic = 8,
}

/// A parsed sensor report.
pub struct PoemReport(Report);

/// An ingestion service and console over one set of stores.
pub struct PoemSystem {
    stores: Stores,
    ingest: IngestionService,
    console: ConsoleApi,
}

/// Office and machine details for `poem_system_provision`. `user_id` and
/// `monitor_type` may be null.
#[repr(C)]
pub struct PoemProvision {
    pub user_id: *const c_char,
    pub office: *const c_char,
    pub department: *const c_char,
    pub floor: *const c_char,
    pub building: *const c_char,
    pub zone: *const c_char,
    pub machine_type: *const c_char,
    pub monitor_type: *const c_char,
    pub p_off: f64,
    pub p_sleep: f64,
    pub p_idle: f64,
    pub p_sidle: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(PoemStatus, String);

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) | StoreError::UnknownStream(_) | StoreError::UnknownGroup(_) => PoemStatus::NotFound,
            StoreError::Invalid(_) | StoreError::Duplicate(_) | StoreError::InvalidRange { .. } => PoemStatus::Invalid,
            _ => PoemStatus::Storage,
        };
        Failure(status, e.to_string())
    }
}

impl From<ConsoleError> for Failure {
    fn from(e: ConsoleError) -> Self {
        let status = match &e {
            ConsoleError::NotFound(_) | ConsoleError::UnknownGroup(_) => PoemStatus::NotFound,
            ConsoleError::Store(_) => PoemStatus::Storage,
            _ => PoemStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PoemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PoemStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PoemStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PoemStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(PoemStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(PoemStatus::NullArgument, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(PoemStatus::NullArgument, format!("{what} is null")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn poem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn poem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses one report line.
///
/// # Safety
/// `line` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poem_report_parse(line: *const c_char, out_report: *mut *mut PoemReport) -> PoemStatus {
    guard(|| {
        let slot = out(out_report, "out")?;
        *slot = ptr::null_mut();
        let report = parse_report(text(line, "line")?).map_err(|e| Failure(PoemStatus::Parse, e.to_string()))?;
        *slot = Box::into_raw(Box::new(PoemReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from `poem_report_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn poem_report_free(report: *mut PoemReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Canonical wire form. Free with `poem_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poem_report_to_wire(report: *const PoemReport, out_line: *mut *mut c_char) -> PoemStatus {
    guard(|| {
        let r = handle(report, "report")?;
        *out(out_line, "out")? = owned_string(r.0.to_wire());
        Ok(())
    })
}

/// The report's `id`. Free with `poem_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poem_report_id(report: *const PoemReport, out_id: *mut *mut c_char) -> PoemStatus {
    guard(|| {
        let r = handle(report, "report")?;
        *out(out_id, "out")? = owned_string(r.0.id().to_string());
        Ok(())
    })
}

/// The indicator name, e.g. `ambsensor`. Free with `poem_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poem_report_indicator(report: *const PoemReport, out_name: *mut *mut c_char) -> PoemStatus {
    guard(|| {
        let r = handle(report, "report")?;
        *out(out_name, "out")? = owned_string(r.0.indicator().to_string());
        Ok(())
    })
}

/// Seconds since the Unix epoch.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poem_report_tsutc(report: *const PoemReport, out_unix: *mut i64) -> PoemStatus {
    guard(|| {
        let r = handle(report, "report")?;
        *out(out_unix, "out")? = r.0.tsutc().unix();
        Ok(())
    })
}

/// A numeric payload value by wire name, e.g. `tempC`. `NotFound` when absent.
///
/// # Safety
/// `report` must be a live handle, `name` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn poem_report_number(report: *const PoemReport, name: *const c_char, out_value: *mut f64) -> PoemStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let name = text(name, "name")?;
        let field = Field::from_name(name).ok_or_else(|| Failure(PoemStatus::NotFound, format!("unknown name {name:?}")))?;
        let v = r.0.number(field).ok_or_else(|| Failure(PoemStatus::NotFound, format!("{name} is not set")))?;
        *out(out_value, "out")? = v;
        Ok(())
    })
}

/// Annual typical energy consumption in kWh.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn poem_tec_annual(
    p_off: f64,
    p_sleep: f64,
    p_idle: f64,
    p_sidle: f64,
    t_off: f64,
    t_sleep: f64,
    t_idle: f64,
    t_sidle: f64,
    t_work: f64,
    out_kwh: *mut f64,
) -> PoemStatus {
    guard(|| {
        let slot = out(out_kwh, "out")?;
        let invalid = |e: poem_core::sumve::SumveError| Failure(PoemStatus::Invalid, e.to_string());
        let fractions = TimeFractions::new(t_off, t_sleep, t_idle, t_sidle, t_work).map_err(invalid)?;
        *slot = tec_annual(&MachinePowerProfile::new(p_off, p_sleep, p_idle, p_sidle), &fractions).map_err(invalid)?;
        Ok(())
    })
}

/// Opens the stores in `data_dir`, or in memory when it is null.
///
/// # Safety
/// `data_dir` must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn poem_system_open(data_dir: *const c_char, out_system: *mut *mut PoemSystem) -> PoemStatus {
    guard(|| {
        let slot = out(out_system, "out")?;
        *slot = ptr::null_mut();
        let stores = match optional_text(data_dir, "data_dir")? {
            Some(dir) => Stores::open(dir)?,
            None => Stores::in_memory(),
        };
        let clock = Arc::new(SystemClock);
        let system = PoemSystem {
            ingest: IngestionService::new(stores.clone(), clock.clone()),
            console: ConsoleApi::new(stores.clone(), clock),
            stores,
        };
        *slot = Box::into_raw(Box::new(system));
        Ok(())
    })
}

/// # Safety
/// `system` must come from `poem_system_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn poem_system_free(system: *mut PoemSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Registers a user and creates their streams. Returns the user id, which
/// the caller frees with `poem_string_free`.
///
/// # Safety
/// `system` must be live, the strings in `args` NUL-terminated or allowed null, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn poem_system_provision(
    system: *const PoemSystem,
    args: *const PoemProvision,
    out_user_id: *mut *mut c_char,
) -> PoemStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let a = handle(args, "args")?;
        let slot = out(out_user_id, "out")?;
        let provision = ProvisionArgs {
            user_id: optional_text(a.user_id, "user_id")?.map(str::to_string),
            office: text(a.office, "office")?.to_string(),
            department: text(a.department, "department")?.to_string(),
            floor: text(a.floor, "floor")?.to_string(),
            building: text(a.building, "building")?.to_string(),
            zone: text(a.zone, "zone")?.to_string(),
            machine_type: text(a.machine_type, "machine_type")?.to_string(),
            p_idle: a.p_idle,
            p_sidle: a.p_sidle,
            p_sleep: a.p_sleep,
            p_off: a.p_off,
            monitor_type: optional_text(a.monitor_type, "monitor_type")?.map(str::to_string),
            monitor_on: 0.0,
            monitor_standby: 0.0,
            monitor_off: 0.0,
            charging_multiplier: poem_core::sumve::DEFAULT_CHARGING_MULTIPLIER,
        };
        let id = sys.stores.provision_user(&provision)?;
        *slot = owned_string(id.to_string());
        Ok(())
    })
}

/// Posts a report body to `/sensor` or `/meter`. `http_status` receives
/// the status the HTTP endpoint would answer; non-2xx yields `Rejected`.
///
/// # Safety
/// `system` must be live, `path` and `body` NUL-terminated, `http_status` valid.
#[no_mangle]
pub unsafe extern "C" fn poem_system_ingest(
    system: *const PoemSystem,
    path: *const c_char,
    body: *const c_char,
    http_status: *mut u16,
) -> PoemStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let status = out(http_status, "http_status")?;
        let resp = sys.ingest.post(text(path, "path")?, text(body, "body")?);
        *status = resp.status;
        if resp.is_success() {
            Ok(())
        } else {
            Err(Failure(PoemStatus::Rejected, resp.body))
        }
    })
}

/// Number of stored documents in a user's stream for an indicator name.
///
/// # Safety
/// `system` must be live, the strings NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn poem_system_count(
    system: *const PoemSystem,
    user_id: *const c_char,
    indicator: *const c_char,
    out_count: *mut usize,
) -> PoemStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(out_count, "out")?;
        let user = UserId::new(text(user_id, "user_id")?).map_err(|e| Failure(PoemStatus::Invalid, e.to_string()))?;
        let name = text(indicator, "indicator")?;
        let indicator: SensorIndicator =
            name.parse().map_err(|_| Failure(PoemStatus::Invalid, format!("unknown indicator {name:?}")))?;
        *slot = sys.stores.sensors.count(&StreamId::new(user, indicator))?;
        Ok(())
    })
}

/// The user's home view as JSON. Free with `poem_string_free`.
///
/// # Safety
/// `system` must be live, `user_id` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn poem_system_home_view(
    system: *const PoemSystem,
    user_id: *const c_char,
    out_json: *mut *mut c_char,
) -> PoemStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let slot = out(out_json, "out")?;
        let user = UserId::new(text(user_id, "user_id")?).map_err(|e| Failure(PoemStatus::Invalid, e.to_string()))?;
        let view = sys.console.get_home_view(&user)?;
        *slot = owned_string(serde_json::to_string(&view).map_err(|e| Failure(PoemStatus::Storage, e.to_string()))?);
        Ok(())
    })
}

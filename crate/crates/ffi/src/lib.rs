//! C ABI over the `wholepage` library.
//!
//! Every entry point returns a [`WpStatus`]. On failure the message is kept
//! per thread and can be read with [`wp_last_error`]. Models and rankers cross
//! the boundary as opaque handles released by their `_free` function. Strings
//! handed out by the library are released with [`wp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::{Deserialize, Serialize};
use wholepage::dml::{estimate_dvwpx, DmlConfig, DvwpxModel, PanelDataset, Stage2};
use wholepage::domain::{region_of_position, ContextFeatures, HorizonConfig, PageLayout, PageRegion, TemplateId};
use wholepage::metrics::{BrandMatchPage, BrandMatchSlot, RegionWeights};
use wholepage::ranker::{select_template, BundleSnapshot, CandidateScore, RankerBundle};
use wholepage::rng::{stream, Purpose};
use wholepage::sim::SURROGATE_NAMES;
use wholepage::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    EstimationFailed = 3,
    InvariantViolated = 4,
    Panic = 5,
}

/// Page regions. Functions taking region codes as integers use these values.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpRegion {
    Top = 0,
    Middle = 1,
    Bottom = 2,
}

/// Fitted downstream-value model.
pub struct WpModel(DvwpxModel);

/// Read-only ranker built from a serialized bundle.
pub struct WpRanker(BundleSnapshot);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(Error::Json(e))
    }
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WpStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            WpStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            match e {
                Error::Invariant(_) => WpStatus::InvariantViolated,
                e if e.is_estimation_failure() => WpStatus::EstimationFailed,
                _ => WpStatus::InvalidInput,
            }
        }
        Err(_) => {
            set_error("internal panic".into());
            WpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::InvalidInput(format!("{what} is not valid UTF-8"))))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior NUL").into_raw()
}

fn region_from_code(code: u32) -> Result<PageRegion, Failure> {
    PageRegion::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| Failure::Core(Error::InvalidInput(format!("unknown region code {code}"))))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn wp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Region of a 1-based page position.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_region_of_position(position: u32, out: *mut WpRegion) -> WpStatus {
    guard(|| {
        let region = match region_of_position(position)? {
            PageRegion::Top => WpRegion::Top,
            PageRegion::Middle => WpRegion::Middle,
            PageRegion::Bottom => WpRegion::Bottom,
        };
        write_out(out, region, "out")
    })
}

/// Region-weighted, pixel-area-weighted brand match rate of one page.
///
/// Slot `i` lies in region `regions[i]` (a [`WpRegion`] code), covers
/// `pixel_areas[i]` and matches the query brand when `matched[i]` is true.
/// `weights` holds the top, middle and bottom weights.
///
/// # Safety
/// The three slot arrays must hold `n` elements, `weights` three, and `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_pr_wp_bmr(
    regions: *const u32,
    pixel_areas: *const f64,
    matched: *const bool,
    n: usize,
    weights: *const f64,
    out: *mut f64,
) -> WpStatus {
    guard(|| {
        let regions = slice_arg(regions, n, "regions")?;
        let areas = slice_arg(pixel_areas, n, "pixel_areas")?;
        let matched = slice_arg(matched, n, "matched")?;
        let w = slice_arg(weights, 3, "weights")?;
        let slots = (0..n)
            .map(|i| Ok(BrandMatchSlot { region: region_from_code(regions[i])?, pixel_area: areas[i], matched: matched[i] }))
            .collect::<Result<Vec<_>, Failure>>()?;
        let weights = RegionWeights::new(w[0], w[1], w[2])?;
        let value = BrandMatchPage { slots }.pr_wp_bmr(&weights)?;
        write_out(out, value, "out")
    })
}

/// Loads a model saved as JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_model_from_json(json: *const c_char, out: *mut *mut WpModel) -> WpStatus {
    guard(|| {
        let model = DvwpxModel::from_json(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(WpModel(model))), "out")
    })
}

/// Fits a model on a panel given as CSV text. Any error raised by the fit
/// itself is reported as `EstimationFailed`.
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_model_estimate_csv(
    csv: *const c_char,
    use_lasso: bool,
    seed: u64,
    out: *mut *mut WpModel,
) -> WpStatus {
    guard(|| {
        let panel = PanelDataset::read_csv(str_arg(csv, "csv")?.as_bytes())?;
        let config = DmlConfig {
            stage2: if use_lasso { Stage2::Lasso } else { Stage2::Ols },
            seed,
            ..DmlConfig::default()
        };
        let model = estimate_dvwpx(&panel, &config, HorizonConfig::default()).map_err(|e| match e {
            e if e.is_estimation_failure() => e,
            e => Error::Stage { stage: "estimate", source: Box::new(e) },
        })?;
        write_out(out, Box::into_raw(Box::new(WpModel(model))), "out")
    })
}

/// Serializes a model. Release the string with [`wp_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_model_to_json(model: *const WpModel, out: *mut *mut c_char) -> WpStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        write_out(out, into_c_string(model.0.to_json()?), "out")
    })
}

/// Number of surrogate features the model scores.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_model_n_surrogates(model: *const WpModel, out: *mut usize) -> WpStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        write_out(out, model.0.surrogate_names().len(), "out")
    })
}

/// Downstream value of a surrogate vector of length `n`.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n` values and `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_model_score(model: *const WpModel, x: *const f64, n: usize, out: *mut f64) -> WpStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        let value = model.0.score(slice_arg(x, n, "x")?)?;
        write_out(out, value, "out")
    })
}

/// Region weights implied by a model over the three region brand-match
/// surrogates, written to `out` as top, middle, bottom.
///
/// # Safety
/// `model` must be a live handle and `out` must hold three values.
#[no_mangle]
pub unsafe extern "C" fn wp_model_region_weights(model: *const WpModel, out: *mut f64) -> WpStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure::Null("model"))?;
        let w = model.0.derive_region_weights(SURROGATE_NAMES)?.as_array();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), out, 3);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn wp_model_free(model: *mut WpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a ranker from a serialized bundle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_ranker_from_json(json: *const c_char, out: *mut *mut WpRanker) -> WpStatus {
    guard(|| {
        let snapshot = RankerBundle::from_json(str_arg(json, "json")?)?.snapshot()?;
        write_out(out, Box::into_raw(Box::new(WpRanker(snapshot))), "out")
    })
}

#[derive(Deserialize)]
struct SelectRequest {
    context: ContextFeatures,
    candidates: Vec<PageLayout>,
}

#[derive(Serialize)]
struct SelectResponse {
    template_id: TemplateId,
    chosen: usize,
    trace: Vec<CandidateScore>,
}

/// Picks a template for `request_json` (`{"context": .., "candidates": [..]}`)
/// and writes `{"template_id", "chosen", "trace"}` JSON to `out`. The draw is
/// a pure function of `seed` and `event_id`.
///
/// # Safety
/// `ranker` must be a live handle, `request_json` a NUL-terminated string and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_ranker_select(
    ranker: *const WpRanker,
    request_json: *const c_char,
    seed: u64,
    event_id: u64,
    out: *mut *mut c_char,
) -> WpStatus {
    guard(|| {
        let ranker = ranker.as_ref().ok_or(Failure::Null("ranker"))?;
        let request: SelectRequest = serde_json::from_str(str_arg(request_json, "request_json")?)?;
        let mut rng = stream(seed, Purpose::Thompson(0), event_id);
        let selection = select_template(&request.context, &request.candidates, &ranker.0, &mut rng)?;
        let response = SelectResponse {
            template_id: selection.trace[selection.chosen].template_id,
            chosen: selection.chosen,
            trace: selection.trace,
        };
        write_out(out, into_c_string(serde_json::to_string(&response)?), "out")
    })
}

/// # Safety
/// `ranker` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn wp_ranker_free(ranker: *mut WpRanker) {
    if !ranker.is_null() {
        drop(Box::from_raw(ranker));
    }
}

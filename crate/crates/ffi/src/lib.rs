//! C ABI over `rankatlas`.
//!
//! Objects cross the boundary as opaque heap handles created by `ra_*_new`
//! style constructors and released by the matching `ra_*_free`. Every
//! fallible function returns an [`RaStatus`]; on failure a message is
//! available from [`ra_last_error_message`] on the same thread. Strings
//! returned to the caller are owned by the caller and must be released with
//! [`ra_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rankatlas::bilinear::BilinearMap;
use rankatlas::certify::{certify, Verdict};
use rankatlas::hopf::{circ, rho, HashBoundsTable};
use rankatlas::pencil::{afcr_margin, SearchBudget};
use rankatlas::tensor::Tensor3;
use rankatlas::trank::classify;
use rankatlas::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Dimension = 3,
    NotInV = 4,
    Singular = 5,
    Contradiction = 6,
    Budget = 7,
    Parse = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaVerdictKind {
    RankP = 0,
    RankExceedsP = 1,
    Inconclusive = 2,
}

pub struct RaTensor(Tensor3);
pub struct RaBilinear(BilinearMap);
pub struct RaBoundsTable(HashBoundsTable);
pub struct RaVerdict(Verdict);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RaStatus {
    match e {
        Error::Domain(_) => RaStatus::Domain,
        Error::Dimension(_) => RaStatus::Dimension,
        Error::NotInV { .. } => RaStatus::NotInV,
        Error::Singular(_) => RaStatus::Singular,
        Error::Contradiction { .. } => RaStatus::Contradiction,
        Error::Budget(_) => RaStatus::Budget,
        Error::Parse { .. } => RaStatus::Parse,
        Error::Io { .. } => RaStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> RaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RaStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            RaStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            RaStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::Lib(Error::Parse { field: what.into(), msg: e.to_string() }))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nul removed").into_raw()
}

fn budget(restarts: usize, seed: u64) -> SearchBudget {
    SearchBudget::with_restarts(restarts).seeded(seed)
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `ra_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a `d1 x d2 x d3` tensor from `len = d1*d2*d3` slice-major values.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_tensor_new(
    d1: usize,
    d2: usize,
    d3: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut RaTensor,
) -> RaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let values = std::slice::from_raw_parts(data, len).to_vec();
        *out = Box::into_raw(Box::new(RaTensor(Tensor3::new(d1, d2, d3, values)?)));
        Ok(())
    })
}

/// Parses a tensor in the JSON or plain-text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_tensor_parse(text: *const c_char, out: *mut *mut RaTensor) -> RaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = Tensor3::parse(c_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(RaTensor(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must be a live handle; the three out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_tensor_dims(t: *const RaTensor, d1: *mut usize, d2: *mut usize, d3: *mut usize) -> RaStatus {
    guard(|| {
        let (a, b, c) = borrow(t, "tensor")?.0.dims();
        *out_ptr(d1, "d1")? = a;
        *out_ptr(d2, "d2")? = b;
        *out_ptr(d3, "d3")? = c;
        Ok(())
    })
}

/// Tensor as a JSON string; release with `ra_string_free`.
///
/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_tensor_to_json(t: *const RaTensor, out: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let t = borrow(t, "tensor")?;
        *out_ptr(out, "out")? = into_c_string(t.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ra_tensor_free(t: *mut RaTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Cayley-Dickson multiplication on `R^d`, `d` in {1, 2, 4, 8}.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bilinear_hypercomplex(d: usize, out: *mut *mut RaBilinear) -> RaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RaBilinear(BilinearMap::hypercomplex_mult(d)?)));
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bilinear_convolve(g: *const RaBilinear, m: usize, n: usize, out: *mut *mut RaBilinear) -> RaStatus {
    guard(|| {
        let g = borrow(g, "map")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RaBilinear(BilinearMap::convolve(&g.0, m, n)?)));
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bilinear_restrict(f: *const RaBilinear, a: usize, b: usize, out: *mut *mut RaBilinear) -> RaStatus {
    guard(|| {
        let f = borrow(f, "map")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RaBilinear(f.0.restrict(a, b)?)));
        Ok(())
    })
}

/// The `c x a x b` tensor of the map.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bilinear_to_tensor(f: *const RaBilinear, out: *mut *mut RaTensor) -> RaStatus {
    guard(|| {
        let f = borrow(f, "map")?;
        *out_ptr(out, "out")? = Box::into_raw(Box::new(RaTensor(f.0.as_tensor())));
        Ok(())
    })
}

/// # Safety
/// `f` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ra_bilinear_free(f: *mut RaBilinear) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Multi-start nonsingularity margin of the pencil `y`. Any of the three
/// out pointers may be NULL.
///
/// # Safety
/// `y` must be a live handle; non-NULL out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_afcr_margin(
    y: *const RaTensor,
    restarts: usize,
    seed: u64,
    margin: *mut f64,
    relative: *mut f64,
    is_afcr: *mut c_int,
) -> RaStatus {
    guard(|| {
        let est = afcr_margin(&borrow(y, "tensor")?.0, &budget(restarts, seed))?;
        if let Some(m) = margin.as_mut() {
            *m = est.margin;
        }
        if let Some(r) = relative.as_mut() {
            *r = est.relative;
        }
        if let Some(a) = is_afcr.as_mut() {
            *a = c_int::from(est.is_afcr);
        }
        Ok(())
    })
}

/// Certifies rank `p` or rank above `p` for an `n x p x m` tensor.
///
/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_certify(t: *const RaTensor, restarts: usize, seed: u64, out: *mut *mut RaVerdict) -> RaStatus {
    guard(|| {
        let t = borrow(t, "tensor")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RaVerdict(certify(&t.0, &budget(restarts, seed))?)));
        Ok(())
    })
}

/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_verdict_kind(v: *const RaVerdict, out: *mut RaVerdictKind) -> RaStatus {
    guard(|| {
        *out_ptr(out, "out")? = match borrow(v, "verdict")?.0 {
            Verdict::RankP(_) => RaVerdictKind::RankP,
            Verdict::RankExceedsP(_) => RaVerdictKind::RankExceedsP,
            Verdict::Inconclusive { .. } => RaVerdictKind::Inconclusive,
        };
        Ok(())
    })
}

/// Reconstruction residual of a RankP verdict; `Domain` for other verdicts.
///
/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_verdict_residual(v: *const RaVerdict, out: *mut f64) -> RaStatus {
    guard(|| {
        match &borrow(v, "verdict")?.0 {
            Verdict::RankP(c) => *out_ptr(out, "out")? = c.residual,
            other => return Err(Error::Domain(format!("verdict is {}, not RankP", other.label())).into()),
        }
        Ok(())
    })
}

/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_verdict_to_json(v: *const RaVerdict, out: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let v = borrow(v, "verdict")?;
        *out_ptr(out, "out")? = into_c_string(v.0.to_json().to_string());
        Ok(())
    })
}

/// # Safety
/// `v` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ra_verdict_free(v: *mut RaVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bounds_table_build(max_dim: usize, out: *mut *mut RaBoundsTable) -> RaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RaBoundsTable(HashBoundsTable::build(max_dim)?)));
        Ok(())
    })
}

/// Bounds on `m # n`; pairs outside the table get standalone bounds.
///
/// # Safety
/// `t` must be a live handle; `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_bounds(t: *const RaBoundsTable, m: usize, n: usize, lower: *mut usize, upper: *mut usize) -> RaStatus {
    guard(|| {
        let t = borrow(t, "table")?;
        if m == 0 || n == 0 {
            return Err(Error::Domain(format!("dimensions must be positive, got ({m}, {n})")).into());
        }
        let b = t.0.bounds(m, n);
        *out_ptr(lower, "lower")? = b.lower;
        *out_ptr(upper, "upper")? = b.upper;
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ra_bounds_table_free(t: *mut RaBoundsTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Typical ranks of `R^{m x n x p}` as a human-readable string. `table` may
/// be NULL, in which case one is built for the shape.
///
/// # Safety
/// `table` must be NULL or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_classify(m: usize, n: usize, p: usize, table: *const RaBoundsTable, out: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let built;
        let table = match table.as_ref() {
            Some(t) => &t.0,
            None => {
                let mut s = [m, n, p];
                s.sort_unstable();
                built = HashBoundsTable::build(s[1].clamp(2, 64))?;
                &built
            }
        };
        *out = into_c_string(classify(m, n, p, table)?.to_string());
        Ok(())
    })
}

/// Stiefel-Hopf lower bound `r o s`; 0 if either argument is 0.
#[no_mangle]
pub extern "C" fn ra_circ(r: u64, s: u64) -> u64 {
    if r == 0 || s == 0 {
        return 0;
    }
    catch_unwind(|| circ(r, s)).unwrap_or(0)
}

/// Hurwitz-Radon number `rho(n)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_hurwitz_radon(n: u64, out: *mut u64) -> RaStatus {
    guard(|| {
        *out_ptr(out, "out")? = rho(n)?;
        Ok(())
    })
}

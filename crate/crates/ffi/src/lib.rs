//! C ABI for the separator.
//!
//! Every fallible call returns a [`VoxsepStatus`]. On failure a description
//! is kept per thread and can be read with [`voxsep_last_error_message`].
//! Handles are opaque; free them with [`voxsep_separator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use voxsep::config::{RunConfig, Variant};
use voxsep::eval::{sdr_sir, EvalConfig};
use voxsep::model::ModelParams;
use voxsep::signal::AudioClip;
use voxsep::training::{load_checkpoint, separate};
use voxsep::Error;

/// Sample rate every audio buffer must use.
pub const VOXSEP_SAMPLE_RATE: u32 = 44_100;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxsepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    SampleRate = 6,
    Numeric = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxsepVariant {
    Nri = 0,
    RisS = 1,
    RisL = 2,
}

/// A loaded model with its run configuration.
pub struct VoxsepSeparator {
    params: ModelParams,
    config: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> VoxsepStatus {
    match err {
        Error::Io { .. } => VoxsepStatus::Io,
        Error::Format(_) => VoxsepStatus::Format,
        Error::Dimension(_) => VoxsepStatus::Dimension,
        Error::SampleRate { .. } => VoxsepStatus::SampleRate,
        Error::Numeric(_) => VoxsepStatus::Numeric,
        Error::Parameter(_) | Error::Domain(_) | Error::Usage(_) => VoxsepStatus::InvalidArgument,
    }
}

struct Failure(VoxsepStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(VoxsepStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording failures and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VoxsepStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VoxsepStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VoxsepStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable floats.
unsafe fn samples<'a>(ptr: *const f32, len: usize, what: &str) -> Result<&'a [f32], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn widen(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// Loads a checkpoint file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn voxsep_separator_load(path: *const c_char, out: *mut *mut VoxsepSeparator) -> VoxsepStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(VoxsepStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let ck = load_checkpoint(path)?;
        let sep = Box::new(VoxsepSeparator {
            params: ck.params,
            config: ck.config,
        });
        *out = Box::into_raw(sep);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sep` must come from [`voxsep_separator_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn voxsep_separator_free(sep: *mut VoxsepSeparator) {
    if !sep.is_null() {
        drop(Box::from_raw(sep));
    }
}

/// Selects the decoder variant used by later separations.
///
/// # Safety
/// `sep` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn voxsep_separator_set_variant(sep: *mut VoxsepSeparator, variant: VoxsepVariant) -> VoxsepStatus {
    guard(|| {
        let sep = sep.as_mut().ok_or_else(|| null("separator"))?;
        sep.config.set_variant(match variant {
            VoxsepVariant::Nri => Variant::Nri,
            VoxsepVariant::RisS => Variant::RisS,
            VoxsepVariant::RisL => Variant::RisL,
        });
        Ok(())
    })
}

/// Separates the voice from a mono mixture.
///
/// Writes `len` samples to `output`, which must hold `output_capacity`
/// floats. When `mean_ri_iterations` is non-null it receives the average
/// number of recurrent-inference iterations.
///
/// # Safety
/// `sep` must be a live handle; `input` must hold `len` floats and `output`
/// `output_capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn voxsep_separate(
    sep: *const VoxsepSeparator,
    input: *const f32,
    len: usize,
    sample_rate: u32,
    output: *mut f32,
    output_capacity: usize,
    mean_ri_iterations: *mut f64,
) -> VoxsepStatus {
    guard(|| {
        let sep = sep.as_ref().ok_or_else(|| null("separator"))?;
        let input = samples(input, len, "input")?;
        if output.is_null() {
            return Err(null("output"));
        }
        if output_capacity < len {
            return Err(Failure(
                VoxsepStatus::BufferTooSmall,
                format!("output holds {output_capacity} samples, {len} needed"),
            ));
        }
        let clip = AudioClip::new(widen(input), sample_rate)?;
        let result = separate(&clip, &sep.params, &sep.config)?;
        let out = std::slice::from_raw_parts_mut(output, len);
        for (o, v) in out.iter_mut().zip(&result.voice.samples) {
            *o = *v as f32;
        }
        if !mean_ri_iterations.is_null() {
            *mean_ri_iterations = result.mean_ri_iterations();
        }
        Ok(())
    })
}

/// SDR and SIR (dB) of `estimate` against the true voice, with the
/// accompaniment as the interfering source. Perfect estimates give
/// `+INFINITY`, an all-zero estimate `-INFINITY`.
///
/// # Safety
/// The three buffers must hold `len` floats; `sdr` and `sir` must be valid.
#[no_mangle]
pub unsafe extern "C" fn voxsep_sdr_sir(
    estimate: *const f32,
    voice: *const f32,
    accompaniment: *const f32,
    len: usize,
    filter_len: usize,
    sdr: *mut f64,
    sir: *mut f64,
) -> VoxsepStatus {
    guard(|| {
        let est = widen(samples(estimate, len, "estimate")?);
        let v = widen(samples(voice, len, "voice")?);
        let a = widen(samples(accompaniment, len, "accompaniment")?);
        if sdr.is_null() || sir.is_null() {
            return Err(null("result pointer"));
        }
        let cfg = EvalConfig {
            proj_filter_len: filter_len,
        };
        let score = sdr_sir(&est, &[&v, &a], 0, &cfg)?;
        *sdr = score.sdr;
        *sir = score.sir;
        Ok(())
    })
}

/// Description of the last failure on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn voxsep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn voxsep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_rate_matches_core() {
        assert_eq!(VOXSEP_SAMPLE_RATE, voxsep::signal::SAMPLE_RATE);
    }

    #[test]
    fn every_error_kind_has_a_status() {
        let io = Error::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(status_of(&io), VoxsepStatus::Io);
        assert_eq!(status_of(&Error::Numeric("nan".into())), VoxsepStatus::Numeric);
        assert_eq!(
            status_of(&Error::SampleRate { found: 8000, expected: 44_100 }),
            VoxsepStatus::SampleRate
        );
        assert_eq!(status_of(&Error::Usage("u".into())), VoxsepStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_a_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, VoxsepStatus::Panic);
        assert!(!voxsep_last_error_message().is_null());
    }
}

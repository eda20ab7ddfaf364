//! C ABI over `qis-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_load` function and released by the matching `*_free`. Every
//! fallible call returns a [`QisStatus`]; on failure a description is kept
//! per thread and can be copied out with [`qis_last_error`]. Panics never
//! unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qis_core::models::{Student, Teacher};
use qis_core::sensor::{calibrate_gain, measure_ppp, simulate_frame, RawFrame, RgbImage, SensorConfig, SensorKind};
use qis_core::training::Predictor;
use qis_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Numeric = 4,
    Io = 5,
    Format = 6,
    Data = 7,
    Divergence = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Sensor kind selector for [`qis_sensor_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QisSensorKind {
    Qis = 0,
    Cis = 1,
}

/// Opaque sensor configuration.
pub struct QisSensor(SensorConfig);
/// Opaque clean RGB image.
pub struct QisImage(RgbImage);
/// Opaque raw frame.
pub struct QisFrame(RawFrame);
/// Opaque frozen teacher classifier.
pub struct QisTeacher(Teacher);
/// Opaque trained student network.
pub struct QisStudent(Student);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> QisStatus {
    match e {
        Error::Dimension(_) | Error::Shape(_) => QisStatus::Dimension,
        Error::InvalidParameter(_) => QisStatus::InvalidArgument,
        Error::Numeric(_) | Error::DivisionByZero(_) => QisStatus::Numeric,
        Error::Io { .. } => QisStatus::Io,
        Error::Format(_) => QisStatus::Format,
        Error::Data(_) => QisStatus::Data,
        Error::Divergence { .. } => QisStatus::Divergence,
        Error::Graph(_) | Error::FrozenMutation(_) => QisStatus::Internal,
    }
}

struct Fail(QisStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QisStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QisStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            QisStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QisStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copy the calling thread's last error message into `buf` as a
/// NUL-terminated string. Returns the message length in bytes (excluding the
/// terminator); the copy is truncated when `len` is too small.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qis_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a sensor with the default parameters of `kind` and unit gain.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn qis_sensor_new(kind: QisSensorKind, out: *mut *mut QisSensor) -> QisStatus {
    guard(|| {
        let k = match kind {
            QisSensorKind::Qis => SensorKind::Qis,
            QisSensorKind::Cis => SensorKind::Cis,
        };
        put(out, QisSensor(SensorConfig::for_kind(k)))
    })
}

/// # Safety
/// `sensor` must be null or a handle from [`qis_sensor_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qis_sensor_free(sensor: *mut QisSensor) {
    release(sensor)
}

/// Override the numeric sensor parameters. Negative values leave a field
/// unchanged; `adc_bits` of 0 leaves the bit depth unchanged.
///
/// # Safety
/// `sensor` must be a live sensor handle.
#[no_mangle]
pub unsafe extern "C" fn qis_sensor_set(
    sensor: *mut QisSensor,
    gain_alpha: f64,
    read_noise_sigma: f64,
    adc_bits: u8,
    prnu_strength: f64,
    prnu_seed: u64,
) -> QisStatus {
    guard(|| {
        let s = borrow_mut(sensor, "sensor")?;
        let mut cfg = s.0.clone();
        if gain_alpha >= 0.0 {
            cfg.gain_alpha = gain_alpha;
        }
        if read_noise_sigma >= 0.0 {
            cfg.read_noise_sigma = read_noise_sigma;
        }
        if adc_bits > 0 {
            cfg.adc_bits = adc_bits;
        }
        if prnu_strength >= 0.0 {
            cfg.prnu_strength = prnu_strength;
        }
        cfg.prnu_seed = prnu_seed;
        cfg.validate()?;
        s.0 = cfg;
        Ok(())
    })
}

/// Current gain of a sensor.
///
/// # Safety
/// `sensor` must be a live sensor handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qis_sensor_gain(sensor: *const QisSensor, out: *mut f64) -> QisStatus {
    guard(|| {
        let s = borrow(sensor, "sensor")?;
        *borrow_mut(out, "output pointer")? = s.0.gain_alpha;
        Ok(())
    })
}

/// Set the sensor gain so that `images` average `ppp` photons per pixel.
///
/// # Safety
/// `sensor` must be live; `images` must point to `n` live image handles.
#[no_mangle]
pub unsafe extern "C" fn qis_sensor_calibrate(
    sensor: *mut QisSensor,
    images: *const *const QisImage,
    n: usize,
    ppp: f64,
) -> QisStatus {
    guard(|| {
        let s = borrow_mut(sensor, "sensor")?;
        if images.is_null() {
            return Err(null("images"));
        }
        let handles = std::slice::from_raw_parts(images, n);
        let imgs = handles
            .iter()
            .map(|&h| borrow(h, "image").map(|i| &i.0))
            .collect::<Result<Vec<_>, _>>()?;
        s.0.gain_alpha = calibrate_gain(imgs, ppp)?;
        Ok(())
    })
}

/// Build an image from `width*height*3` interleaved RGB floats in `[0, 1]`.
///
/// # Safety
/// `data` must point to `len` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_image_new(
    width: usize,
    height: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut QisImage,
) -> QisStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let v = std::slice::from_raw_parts(data, len).to_vec();
        put(out, QisImage(RgbImage::new(width, height, v)?))
    })
}

/// Read a binary PPM (P6) image.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_image_read_ppm(path: *const c_char, out: *mut *mut QisImage) -> QisStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, QisImage(RgbImage::read_ppm(&p)?))
    })
}

/// # Safety
/// `image` must be null or a live image handle.
#[no_mangle]
pub unsafe extern "C" fn qis_image_free(image: *mut QisImage) {
    release(image)
}

/// Simulate one raw frame. PRNU is applied when the sensor's strength is
/// positive.
///
/// # Safety
/// `image` and `sensor` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_simulate_frame(
    image: *const QisImage,
    sensor: *const QisSensor,
    seed: u64,
    out: *mut *mut QisFrame,
) -> QisStatus {
    guard(|| {
        let img = &borrow(image, "image")?.0;
        let cfg = &borrow(sensor, "sensor")?.0;
        let mask = if cfg.prnu_strength > 0.0 {
            Some(cfg.prnu_mask(img.width(), img.height())?)
        } else {
            None
        };
        put(out, QisFrame(simulate_frame(img, cfg, mask.as_ref(), seed)?))
    })
}

/// # Safety
/// `frame` must be null or a live frame handle.
#[no_mangle]
pub unsafe extern "C" fn qis_frame_free(frame: *mut QisFrame) {
    release(frame)
}

/// Frame width, height and ADC ceiling `2^bits - 1`.
///
/// # Safety
/// `frame` must be live; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_frame_dims(
    frame: *const QisFrame,
    width: *mut usize,
    height: *mut usize,
    max_level: *mut u32,
) -> QisStatus {
    guard(|| {
        let f = &borrow(frame, "frame")?.0;
        *borrow_mut(width, "width")? = f.width;
        *borrow_mut(height, "height")? = f.height;
        *borrow_mut(max_level, "max_level")? = f.max_level();
        Ok(())
    })
}

/// Copy the row-major counts into `buf`, which must hold `width*height` values.
///
/// # Safety
/// `frame` must be live; `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn qis_frame_counts(frame: *const QisFrame, buf: *mut u16, len: usize) -> QisStatus {
    guard(|| {
        let f = &borrow(frame, "frame")?.0;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < f.counts.len() {
            return Err(Fail(
                QisStatus::BufferTooSmall,
                format!("buffer holds {len} values, frame has {}", f.counts.len()),
            ));
        }
        ptr::copy_nonoverlapping(f.counts.as_ptr(), buf, f.counts.len());
        Ok(())
    })
}

/// Write a frame in the `QRF1` raw format.
///
/// # Safety
/// `frame` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qis_frame_write_qrf(frame: *const QisFrame, path: *const c_char) -> QisStatus {
    guard(|| {
        let f = &borrow(frame, "frame")?.0;
        f.write_qrf(&path_arg(path)?)?;
        Ok(())
    })
}

/// Read a `QRF1` raw frame.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_frame_read_qrf(path: *const c_char, out: *mut *mut QisFrame) -> QisStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, QisFrame(RawFrame::read_qrf(&p)?))
    })
}

/// Estimate photons per pixel from `n` frames (dark-current corrected).
///
/// # Safety
/// `frames` must point to `n` live frame handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_measure_ppp(frames: *const *const QisFrame, n: usize, out: *mut f64) -> QisStatus {
    guard(|| {
        if frames.is_null() {
            return Err(null("frames"));
        }
        let fs = std::slice::from_raw_parts(frames, n)
            .iter()
            .map(|&h| borrow(h, "frame").map(|f| f.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        *borrow_mut(out, "output pointer")? = measure_ppp(&fs)?;
        Ok(())
    })
}

/// Write softmax probabilities into `probs` and the argmax class into `class`.
fn classify(logits: &[f32], probs: *mut f32, len: usize, class: *mut usize) -> Result<(), Fail> {
    if len < logits.len() {
        return Err(Fail(
            QisStatus::BufferTooSmall,
            format!("probability buffer holds {len}, model has {} classes", logits.len()),
        ));
    }
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f32> = logits.iter().map(|v| (v - m).exp()).collect();
    let z: f32 = e.iter().sum();
    let mut best = 0;
    for (i, v) in e.iter().enumerate() {
        if *v > e[best] {
            best = i;
        }
    }
    unsafe {
        if !probs.is_null() {
            for (i, v) in e.iter().enumerate() {
                *probs.add(i) = v / z;
            }
        }
        *class.as_mut().ok_or_else(|| null("class"))? = best;
    }
    Ok(())
}

/// Load a teacher checkpoint (frozen).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_teacher_load(path: *const c_char, out: *mut *mut QisTeacher) -> QisStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, QisTeacher(Teacher::load(&p)?))
    })
}

/// # Safety
/// `teacher` must be null or a live teacher handle.
#[no_mangle]
pub unsafe extern "C" fn qis_teacher_free(teacher: *mut QisTeacher) {
    release(teacher)
}

/// Number of classes a teacher predicts.
///
/// # Safety
/// `teacher` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_teacher_classes(teacher: *const QisTeacher, out: *mut usize) -> QisStatus {
    guard(|| {
        *borrow_mut(out, "output pointer")? = borrow(teacher, "teacher")?.0.n_classes();
        Ok(())
    })
}

/// Classify a clean image. `probs` may be null; otherwise it must hold at
/// least `len` >= class-count floats.
///
/// # Safety
/// Handles must be live; `probs` null or `len` writable floats; `class` writable.
#[no_mangle]
pub unsafe extern "C" fn qis_teacher_classify(
    teacher: *const QisTeacher,
    image: *const QisImage,
    probs: *mut f32,
    len: usize,
    class: *mut usize,
) -> QisStatus {
    guard(|| {
        let t = &borrow(teacher, "teacher")?.0;
        let img = &borrow(image, "image")?.0;
        let logits = t.logits(&[img])?;
        let len = if probs.is_null() { usize::MAX } else { len };
        classify(logits.data(), probs, len, class)
    })
}

/// Load a student checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qis_student_load(path: *const c_char, out: *mut *mut QisStudent) -> QisStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, QisStudent(Student::load(&p)?))
    })
}

/// # Safety
/// `student` must be null or a live student handle.
#[no_mangle]
pub unsafe extern "C" fn qis_student_free(student: *mut QisStudent) {
    release(student)
}

/// Classify a raw frame with a student.
///
/// # Safety
/// Handles must be live; `probs` null or `len` writable floats; `class` writable.
#[no_mangle]
pub unsafe extern "C" fn qis_student_classify(
    student: *const QisStudent,
    frame: *const QisFrame,
    probs: *mut f32,
    len: usize,
    class: *mut usize,
) -> QisStatus {
    guard(|| {
        let s = &borrow(student, "student")?.0;
        let f = &borrow(frame, "frame")?.0;
        let logits = s.logits(&[f])?;
        let len = if probs.is_null() { usize::MAX } else { len };
        classify(logits.data(), probs, len, class)
    })
}

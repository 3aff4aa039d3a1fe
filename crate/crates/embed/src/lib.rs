//! C ABI exports of the engine for in-browser deployment.
//!
//! Built as a `cdylib` for `wasm32-unknown-unknown`, the UI loads weights
//! once and then calls the same three operations the HTTP service offers,
//! exchanging raw byte buffers:
//!
//! ```text
//! ptr = cnn_lens_alloc(n); <copy weights into ptr>; cnn_lens_load_model(ptr, n)
//! resp = cnn_lens_classify(ptr, n)      // image bytes or {"preset": "..."}
//! cnn_lens_response_status(resp)       // 0 ok, see STATUS_* below
//! cnn_lens_response_ptr(resp), cnn_lens_response_len(resp)
//! cnn_lens_response_free(resp)
//! ```
//!
//! Successful responses carry the same bytes the HTTP endpoints return.
//! Failed ones carry `{"error": "..."}`.

use std::sync::{Arc, RwLock};

use cnn_lens_core::{Engine, Error, Model};

pub const STATUS_OK: i32 = 0;
pub const STATUS_BAD_REQUEST: i32 = 1;
pub const STATUS_DECODE: i32 = 3;
pub const STATUS_MODEL: i32 = 4;

static ENGINE: RwLock<Option<Arc<Engine>>> = RwLock::new(None);

pub struct Response {
    status: i32,
    body: Vec<u8>,
}

impl Response {
    fn ok(body: Vec<u8>) -> Self {
        Response {
            status: STATUS_OK,
            body,
        }
    }

    fn error(status: i32, message: &str) -> Self {
        let body = serde_json_escape(message);
        Response { status, body }
    }

    fn from_result(result: Result<Vec<u8>, Error>) -> Self {
        match result {
            Ok(body) => Self::ok(body),
            Err(e) => Self::error(status_of(&e), &e.to_string()),
        }
    }

    pub fn status(&self) -> i32 {
        self.status
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }
}

fn status_of(err: &Error) -> i32 {
    match err {
        Error::Decode(_) => STATUS_DECODE,
        Error::Version { .. } | Error::ShapeMismatch { .. } => STATUS_MODEL,
        _ => STATUS_BAD_REQUEST,
    }
}

fn serde_json_escape(message: &str) -> Vec<u8> {
    let mut out = String::from("{\"error\":\"");
    for ch in message.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push_str("\"}");
    out.into_bytes()
}

fn current_engine() -> Option<Arc<Engine>> {
    ENGINE.read().ok().and_then(|g| g.clone())
}

fn install(engine: Engine) {
    if let Ok(mut slot) = ENGINE.write() {
        *slot = Some(Arc::new(engine));
    }
}

fn with_engine(f: impl FnOnce(&Engine) -> Result<Vec<u8>, Error>) -> Response {
    match current_engine() {
        Some(engine) => Response::from_result(f(&engine)),
        None => Response::error(STATUS_MODEL, "no model loaded"),
    }
}

/// Safe entry points behind the exported symbols.
pub mod calls {
    use super::*;

    pub fn load_model(weights: &[u8]) -> Result<(), Error> {
        install(Engine::new(Model::load(weights)?));
        Ok(())
    }

    pub fn load_seeded(seed: u64) {
        install(Engine::new(Model::seeded(seed)));
    }

    pub fn model_info() -> Response {
        with_engine(|e| Ok(e.model_info_json()))
    }

    pub fn classify(body: &[u8]) -> Response {
        with_engine(|e| e.classify_bytes(body))
    }

    pub fn conv_demo(body: &[u8]) -> Response {
        // Needs no weights, so it answers before any model is loaded.
        Response::from_result(cnn_lens_core::api::conv_demo_bytes(body))
    }
}

/// # Safety
/// `ptr` must point to `len` readable bytes, or be null with `len == 0`.
unsafe fn slice<'a>(ptr: *const u8, len: usize) -> &'a [u8] {
    if ptr.is_null() || len == 0 {
        &[]
    } else {
        // SAFETY: guaranteed by the caller.
        unsafe { std::slice::from_raw_parts(ptr, len) }
    }
}

/// Allocates `len` bytes for the host to fill. Release with [`cnn_lens_free`].
#[no_mangle]
pub extern "C" fn cnn_lens_alloc(len: usize) -> *mut u8 {
    let mut buf = vec![0u8; len].into_boxed_slice();
    let ptr = buf.as_mut_ptr();
    std::mem::forget(buf);
    ptr
}

/// # Safety
/// `ptr` and `len` must come from one [`cnn_lens_alloc`] call, freed once.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_free(ptr: *mut u8, len: usize) {
    if !ptr.is_null() {
        // SAFETY: reconstructs the boxed slice leaked by `cnn_lens_alloc`.
        drop(unsafe { Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len)) });
    }
}

/// Loads a weights file. Returns a `STATUS_*` code.
///
/// # Safety
/// `ptr` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_load_model(ptr: *const u8, len: usize) -> i32 {
    match calls::load_model(unsafe { slice(ptr, len) }) {
        Ok(()) => STATUS_OK,
        Err(_) => STATUS_MODEL,
    }
}

#[no_mangle]
pub extern "C" fn cnn_lens_load_seeded(seed: u64) -> i32 {
    calls::load_seeded(seed);
    STATUS_OK
}

#[no_mangle]
pub extern "C" fn cnn_lens_model_info() -> *mut Response {
    Box::into_raw(Box::new(calls::model_info()))
}

/// # Safety
/// `ptr` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_classify(ptr: *const u8, len: usize) -> *mut Response {
    Box::into_raw(Box::new(calls::classify(unsafe { slice(ptr, len) })))
}

/// # Safety
/// `ptr` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_conv_demo(ptr: *const u8, len: usize) -> *mut Response {
    Box::into_raw(Box::new(calls::conv_demo(unsafe { slice(ptr, len) })))
}

/// # Safety
/// `resp` must be a live pointer returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_response_status(resp: *const Response) -> i32 {
    unsafe { (*resp).status }
}

/// # Safety
/// `resp` must be a live pointer returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_response_ptr(resp: *const Response) -> *const u8 {
    unsafe { (*resp).body.as_ptr() }
}

/// # Safety
/// `resp` must be a live pointer returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_response_len(resp: *const Response) -> usize {
    unsafe { (*resp).body.len() }
}

/// # Safety
/// `resp` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnn_lens_response_free(resp: *mut Response) {
    if !resp.is_null() {
        drop(unsafe { Box::from_raw(resp) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_body_is_escaped_json() {
        let r = Response::error(1, "bad \"quote\"\n");
        assert_eq!(r.body(), br#"{"error":"bad \"quote\"\u000a"}"#);
    }
}

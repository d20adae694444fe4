use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use forta_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let need = unsafe { forta_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(need > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn codec(n: usize, k: usize) -> *mut FortaCodec {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { forta_codec_new(n, k, &mut c) }, FortaStatus::Ok);
    assert!(!c.is_null());
    c
}

#[test]
fn codec_roundtrip_with_errors() {
    let c = codec(30, 10);
    assert_eq!(unsafe { forta_codec_max_errors(c) }, 10);
    let re: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
    let im: Vec<f64> = (0..10).map(|i| 0.3 * i as f64).collect();
    let (mut wr, mut wi) = (vec![0.0; 30], vec![0.0; 30]);
    let st = unsafe { forta_codec_encode(c, re.as_ptr(), im.as_ptr(), 10, wr.as_mut_ptr(), wi.as_mut_ptr(), 30) };
    assert_eq!(st, FortaStatus::Ok);
    wr[2] += 3.0;
    wi[16] -= 1.5;
    wr[28] += 0.5;

    let mut res = ptr::null_mut();
    let st = unsafe { forta_codec_decode(c, wr.as_ptr(), wi.as_ptr(), 30, ptr::null(), 0, &mut res) };
    assert_eq!(st, FortaStatus::Ok);
    let (mut mr, mut mi) = (vec![0.0; 10], vec![0.0; 10]);
    assert_eq!(unsafe { forta_decode_result_message(res, mr.as_mut_ptr(), mi.as_mut_ptr(), 10) }, FortaStatus::Ok);
    for i in 0..10 {
        assert!((mr[i] - re[i]).abs() < 1e-8 && (mi[i] - im[i]).abs() < 1e-8);
    }
    let mut count = 0;
    let mut small = [0usize; 2];
    let st = unsafe { forta_decode_result_error_positions(res, small.as_mut_ptr(), 2, &mut count) };
    assert_eq!((st, count), (FortaStatus::BufferTooSmall, 3));
    let mut pos = [0usize; 3];
    let st = unsafe { forta_decode_result_error_positions(res, pos.as_mut_ptr(), 3, &mut count) };
    assert_eq!(st, FortaStatus::Ok);
    assert_eq!(pos, [3, 17, 29]);
    let mut residual = -1.0;
    assert_eq!(unsafe { forta_decode_result_residual(res, &mut residual) }, FortaStatus::Ok);
    assert!((0.0..1e-9).contains(&residual));
    unsafe {
        forta_decode_result_free(res);
        forta_codec_free(c);
    }
}

#[test]
fn hinted_decode_and_unreliable_partial() {
    let c = codec(10, 4);
    let (mut wr, wi) = (vec![0.0; 10], vec![0.0; 10]);
    // 4 errors exceed the 3 correctable without hints
    for p in [0, 3, 5, 8] {
        wr[p] = 2.0 + p as f64;
    }
    let mut res = ptr::null_mut();
    let st = unsafe { forta_codec_decode(c, wr.as_ptr(), wi.as_ptr(), 10, ptr::null(), 0, &mut res) };
    assert_ne!(st, FortaStatus::Ok);
    if st == FortaStatus::DecodeUnreliable {
        assert!(!res.is_null());
        assert!(last_error().contains("unreliable"));
    } else {
        assert!(res.is_null());
    }
    unsafe { forta_decode_result_free(res) };

    let hints = [1usize, 4, 6, 9];
    let st = unsafe { forta_codec_decode(c, wr.as_ptr(), wi.as_ptr(), 10, hints.as_ptr(), 4, &mut res) };
    assert_eq!(st, FortaStatus::Ok);
    let (mut mr, mut mi) = (vec![1.0; 4], vec![1.0; 4]);
    unsafe { forta_decode_result_message(res, mr.as_mut_ptr(), mi.as_mut_ptr(), 4) };
    assert!(mr.iter().chain(&mi).all(|v| v.abs() < 1e-8), "{mr:?} {mi:?}");
    unsafe {
        forta_decode_result_free(res);
        forta_codec_free(c);
    }
}

#[test]
fn errors_are_reported() {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { forta_codec_new(5, 5, &mut c) }, FortaStatus::InvalidConfiguration);
    assert!(c.is_null());
    assert!(last_error().contains("n > k"));
    assert_eq!(unsafe { forta_codec_new(5, 2, ptr::null_mut()) }, FortaStatus::NullPointer);

    let c = codec(6, 2);
    let v = [0.0; 6];
    let mut out = [0.0; 6];
    let st = unsafe { forta_codec_encode(c, v.as_ptr(), v.as_ptr(), 3, out.as_mut_ptr(), out.as_mut_ptr(), 6) };
    assert_eq!(st, FortaStatus::InvalidArgument);
    assert!(last_error().contains("length 3"));
    let st = unsafe { forta_codec_encode(c, ptr::null(), v.as_ptr(), 2, out.as_mut_ptr(), out.as_mut_ptr(), 6) };
    assert_eq!(st, FortaStatus::NullPointer);
    unsafe { forta_codec_free(c) };
    unsafe { forta_codec_free(ptr::null_mut()) };

    let mut eta = 0.0;
    assert_eq!(unsafe { forta_eta(20, 10, &mut eta) }, FortaStatus::InvalidConfiguration);
    assert!(last_error().contains("2A + 2 < N"));
    // truncation keeps the terminator
    let mut tiny = [1 as std::ffi::c_char; 4];
    let need = unsafe { forta_last_error_message(tiny.as_mut_ptr(), 4) };
    assert!(need > 4);
    assert_eq!(tiny[3], 0);
}

#[test]
fn theory_entry_points() {
    let mut eta = 0.0;
    assert_eq!(unsafe { forta_eta(30, 10, &mut eta) }, FortaStatus::Ok);
    assert!((eta - 280f64.sqrt()).abs() < 1e-12);

    let p = FortaTheoryParams { n: 30, a: 10, d: 68, sigma_g: 0.01, sigma_eps: 0.0, g_norm: 50.0 };
    let mut b = FortaBound::default();
    assert_eq!(unsafe { forta_sin_alpha(&p, &mut b) }, FortaStatus::Ok);
    assert!((b.value - 0.05519).abs() < 1e-4 && b.valid);

    let s = FortaFeedbackStats { mu_t: 1.2, sigma_t: 0.1, mu_q: 0.3, sigma_q: 0.1, c1: 3.0 };
    let mut m = FortaBound::default();
    assert_eq!(unsafe { forta_sin_alpha_mod(&p, &s, &mut m) }, FortaStatus::Ok);
    let mut holds = true;
    assert_eq!(unsafe { forta_corollary_condition(&p, &s, &mut holds) }, FortaStatus::Ok);
    assert_eq!(holds, m.value < b.value);
    assert_eq!(unsafe { forta_sin_alpha(ptr::null(), &mut b) }, FortaStatus::NullPointer);
}

#[test]
fn krum_and_select() {
    // four clustered points and one far outlier
    let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 10.0, 10.0];
    let mut scores = [0.0; 5];
    assert_eq!(unsafe { forta_krum_scores(pts.as_ptr(), 5, 2, 1, scores.as_mut_ptr()) }, FortaStatus::Ok);
    // N − A − 2 = 2 nearest: point 1 has distances 1, 1
    assert_eq!(scores[0], 2.0);
    assert!(scores[4] > 100.0);
    let mut users = [0usize; 3];
    assert_eq!(unsafe { forta_select(scores.as_ptr(), 5, 3, users.as_mut_ptr()) }, FortaStatus::Ok);
    assert_eq!(users, [1, 2, 3]);
    assert_eq!(unsafe { forta_select(scores.as_ptr(), 5, 0, users.as_mut_ptr()) }, FortaStatus::InvalidArgument);
    assert_eq!(
        unsafe { forta_krum_scores(pts.as_ptr(), 3, 2, 1, scores.as_mut_ptr()) },
        FortaStatus::InvalidConfiguration
    );
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/forta.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["forta_codec_decode", "forta_last_error_message", "FORTA_STATUS_DECODE_UNRELIABLE", "forta_select"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"forta.h\"\n\
         int main(void) {\n\
           FortaCodec *c = NULL;\n\
           FortaStatus s = forta_codec_new(30, 10, &c);\n\
           double eta = 0.0;\n\
           s = forta_eta(30, 10, &eta);\n\
           forta_codec_free(c);\n\
           return s == FORTA_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = match Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-c"])
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&src)
        .arg("-o")
        .arg(tmp.path().join("use.o"))
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping C compile: {e}");
            return;
        }
    };
    assert!(status.success());
}

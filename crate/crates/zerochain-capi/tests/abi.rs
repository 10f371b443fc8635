//! ABI-level tests: every call goes through the exported extern "C"
//! functions with raw pointers, exactly as a C caller would, and results
//! are cross-checked against the underlying library.

use std::ffi::CString;
use std::os::raw::c_char;
use std::ptr;

use zerochain::instance::{self, InstanceConfig};
use zerochain::linops::{self, OperatorTag};
use zerochain::oracle::Oracle;
use zerochain::{BlockVector, InstanceParams, YVector};
use zerochain_capi::*;

fn params() -> InstanceParams {
    InstanceParams::new(&InstanceConfig::default()).unwrap()
}

fn create_default() -> *mut ZcInstance {
    let mut h: *mut ZcInstance = ptr::null_mut();
    let st = unsafe { zc_instance_create(0.1, 1.0, 2, 2, 5, -1.0, &mut h) };
    assert_eq!(st, ZcStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let need = unsafe { zc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(need <= buf.len(), "error message truncated");
    let bytes: Vec<u8> = buf[..need - 1].iter().map(|&b| b as u8).collect();
    String::from_utf8(bytes).unwrap()
}

// deterministic fill that exercises both signs and several magnitudes
fn fill(v: &mut [f64], seed: u64) {
    let mut s = seed | 1;
    for (k, slot) in v.iter_mut().enumerate() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = (s >> 11) as f64 / (1u64 << 53) as f64;
        *slot = (u - 0.5) * (2.0 + (k % 3) as f64);
    }
}

#[test]
fn create_info_destroy() {
    let p = params();
    let h = create_default();
    let mut info = ZcInstanceInfo {
        m: 0,
        dbar: 0,
        d: 0,
        n: 0,
        nbar: 0,
        eps: 0.0,
        lf: 0.0,
        beta: 0.0,
        scale: 0.0,
        a_norm: 0.0,
        abar_norm: 0.0,
        h_norm: 0.0,
    };
    assert_eq!(unsafe { zc_instance_info(h, &mut info) }, ZcStatus::Ok);
    assert_eq!(info.m, p.m);
    assert_eq!(info.dbar, p.dbar);
    assert_eq!(info.d, p.d);
    assert_eq!(info.n, p.n);
    assert_eq!(info.nbar, p.nbar);
    assert_eq!(info.beta, p.beta); // beta <= 0 selected the default rule
    assert_eq!(info.a_norm, p.a_norm);
    unsafe { zc_instance_destroy(h) };
    unsafe { zc_instance_destroy(ptr::null_mut()) }; // null is a no-op
}

#[test]
fn explicit_beta_is_respected() {
    let mut h: *mut ZcInstance = ptr::null_mut();
    let beta = 80.0;
    assert_eq!(
        unsafe { zc_instance_create(0.1, 1.0, 2, 2, 5, beta, &mut h) },
        ZcStatus::Ok
    );
    let mut out = 0.0;
    let x = vec![0.0; params().d];
    assert_eq!(
        unsafe { zc_g_value(h, x.as_ptr(), x.len(), &mut out) },
        ZcStatus::Ok
    );
    let mut info = unsafe { std::mem::zeroed::<ZcInstanceInfo>() };
    unsafe { zc_instance_info(h, &mut info) };
    assert_eq!(info.beta, beta);
    unsafe { zc_instance_destroy(h) };
}

#[test]
fn bad_configs_are_rejected_with_messages() {
    let mut h: *mut ZcInstance = ptr::null_mut();
    // even block width
    assert_eq!(
        unsafe { zc_instance_create(0.1, 1.0, 2, 2, 4, -1.0, &mut h) },
        ZcStatus::BadConfig
    );
    assert!(!last_error().is_empty());
    // beta below its lower bound
    assert_eq!(
        unsafe { zc_instance_create(0.1, 1.0, 2, 2, 5, 1e-3, &mut h) },
        ZcStatus::BadConfig
    );
    assert!(last_error().contains("beta"));
    // null out-pointer
    assert_eq!(
        unsafe { zc_instance_create(0.1, 1.0, 2, 2, 5, -1.0, ptr::null_mut()) },
        ZcStatus::NullArg
    );
}

#[test]
fn json_create_layers_over_defaults() {
    let mut h: *mut ZcInstance = ptr::null_mut();
    let text = CString::new(r#"{"m2": 4}"#).unwrap();
    assert_eq!(
        unsafe { zc_instance_create_json(text.as_ptr(), &mut h) },
        ZcStatus::Ok
    );
    let mut info = unsafe { std::mem::zeroed::<ZcInstanceInfo>() };
    unsafe { zc_instance_info(h, &mut info) };
    assert_eq!(info.m, 24); // 3 * 2 * 4
    assert_eq!(info.dbar, 5);
    unsafe { zc_instance_destroy(h) };

    let bad = CString::new(r#"{"m2": 4, "widgets": 1}"#).unwrap();
    assert_eq!(
        unsafe { zc_instance_create_json(bad.as_ptr(), &mut h) },
        ZcStatus::BadConfig
    );
    assert!(last_error().contains("widgets"));

    // invalid UTF-8
    let raw: [c_char; 3] = [0xFFu8 as c_char, 0xFEu8 as c_char, 0];
    assert_eq!(
        unsafe { zc_instance_create_json(raw.as_ptr(), &mut h) },
        ZcStatus::BadConfig
    );
}

#[test]
fn values_and_gradient_match_library() {
    let p = params();
    let h = create_default();
    let mut x = vec![0.0; p.d];
    fill(&mut x, 7);
    let bx = BlockVector::from_vec(p.dbar, x.clone());

    let mut val = 0.0;
    assert_eq!(
        unsafe { zc_f0(h, x.as_ptr(), x.len(), &mut val) },
        ZcStatus::Ok
    );
    assert_eq!(val, instance::f0(&p, &bx));

    let mut grad = vec![0.0; p.d];
    assert_eq!(
        unsafe { zc_grad_f0(h, x.as_ptr(), x.len(), grad.as_mut_ptr(), grad.len()) },
        ZcStatus::Ok
    );
    assert_eq!(grad, instance::grad_f0(&p, &bx).data);

    let mut g = 0.0;
    assert_eq!(
        unsafe { zc_g_value(h, x.as_ptr(), x.len(), &mut g) },
        ZcStatus::Ok
    );
    assert_eq!(g, instance::g_val(&p, &bx));

    let mut y = vec![0.0; p.nbar];
    fill(&mut y, 9);
    let mut gb = 0.0;
    assert_eq!(
        unsafe { zc_gbar_value(h, y.as_ptr(), y.len(), &mut gb) },
        ZcStatus::Ok
    );
    assert_eq!(gb, instance::gbar_val(&p, &YVector::from_vec(p.dbar, y)));

    unsafe { zc_instance_destroy(h) };
}

#[test]
fn operators_and_spectra_match_library() {
    let p = params();
    let h = create_default();
    let mut x = vec![0.0; p.d];
    fill(&mut x, 21);

    let mut out = vec![0.0; p.nbar];
    assert_eq!(
        unsafe {
            zc_apply(
                h,
                ZcOp::Abar as u32,
                x.as_ptr(),
                x.len(),
                out.as_mut_ptr(),
                out.len(),
            )
        },
        ZcStatus::Ok
    );
    assert_eq!(out, linops::apply(&p, OperatorTag::Abar, &x).unwrap());

    // wrong output length
    assert_eq!(
        unsafe {
            zc_apply(
                h,
                ZcOp::Abar as u32,
                x.as_ptr(),
                x.len(),
                out.as_mut_ptr(),
                out.len() - 1,
            )
        },
        ZcStatus::BadDimension
    );
    // unknown operator id
    assert_eq!(
        unsafe { zc_apply(h, 99, x.as_ptr(), x.len(), out.as_mut_ptr(), out.len()) },
        ZcStatus::OutOfRange
    );

    let mut norm = 0.0;
    assert_eq!(
        unsafe { zc_opnorm(h, ZcOp::A as u32, &mut norm) },
        ZcStatus::Ok
    );
    assert_eq!(norm, linops::opnorm(&p, OperatorTag::A).unwrap());

    let mut lam = 0.0;
    assert_eq!(unsafe { zc_eig_hht(h, 1, &mut lam) }, ZcStatus::Ok);
    assert_eq!(lam, linops::eig_hht(&p, 1).unwrap());
    assert_eq!(
        unsafe { zc_eig_hht(h, p.m, &mut lam) },
        ZcStatus::OutOfRange
    );

    let (mut kj, mut ka) = (0.0, 0.0);
    assert_eq!(unsafe { zc_kappa_joint(h, &mut kj) }, ZcStatus::Ok);
    assert_eq!(unsafe { zc_kappa_a(h, &mut ka) }, ZcStatus::Ok);
    assert_eq!(kj, linops::kappa_joint(&p));
    assert_eq!(ka, linops::kappa_a(&p).unwrap());

    unsafe { zc_instance_destroy(h) };
}

#[test]
fn prox_and_certificates_match_library() {
    let p = params();
    let h = create_default();
    let eta = 0.05;
    let mut x = vec![0.0; p.d];
    fill(&mut x, 33);
    let bx = BlockVector::from_vec(p.dbar, x.clone());

    let mut out = vec![0.0; p.d];
    assert_eq!(
        unsafe { zc_prox_g(h, x.as_ptr(), x.len(), eta, out.as_mut_ptr(), out.len()) },
        ZcStatus::Ok
    );
    assert_eq!(out, zerochain::prox::prox_g(&p, &bx, eta).unwrap().data);

    let mut y = vec![0.0; p.nbar];
    fill(&mut y, 35);
    let mut yout = vec![0.0; p.nbar];
    assert_eq!(
        unsafe { zc_prox_gbar(h, y.as_ptr(), y.len(), eta, yout.as_mut_ptr(), yout.len()) },
        ZcStatus::Ok
    );
    let by = YVector::from_vec(p.dbar, y.clone());
    assert_eq!(yout, zerochain::prox::prox_gbar(&p, &by, eta).unwrap().data);

    let mut r = 0.0;
    assert_eq!(
        unsafe { zc_residual_ap(h, x.as_ptr(), x.len(), &mut r) },
        ZcStatus::Ok
    );
    assert_eq!(r, zerochain::stationarity::residual_ap(&p, &bx).residual);

    let mut c = 0.0;
    assert_eq!(
        unsafe { zc_certificate_lb(h, x.as_ptr(), x.len(), &mut c) },
        ZcStatus::Ok
    );
    assert_eq!(c, zerochain::stationarity::certificate_lb(&p, &bx));

    let mut front = 0usize;
    assert_eq!(
        unsafe { zc_support_front(h, x.as_ptr(), x.len(), &mut front) },
        ZcStatus::Ok
    );
    assert_eq!(front, zerochain::oracle::support_front(&bx));

    unsafe { zc_instance_destroy(h) };
}

#[test]
fn oracle_bundles_match_library_and_count() {
    let p = params();
    let h = create_default();
    let mut o: *mut ZcOracle = ptr::null_mut();
    assert_eq!(unsafe { zc_oracle_create(h, &mut o) }, ZcStatus::Ok);

    let mut count = 99usize;
    assert_eq!(unsafe { zc_oracle_count(o, &mut count) }, ZcStatus::Ok);
    assert_eq!(count, 0);

    let eta = 0.02;
    let mut x = vec![0.0; p.d];
    let mut z = vec![0.0; p.n];
    let mut y = vec![0.0; p.nbar];
    fill(&mut x, 41);
    fill(&mut z, 43);
    fill(&mut y, 45);

    let mut grad = vec![0.0; p.d];
    let mut ax = vec![0.0; p.n];
    let mut atz = vec![0.0; p.d];
    let mut prox = vec![0.0; p.d];
    assert_eq!(
        unsafe {
            zc_oracle1(
                o,
                x.as_ptr(),
                x.len(),
                z.as_ptr(),
                z.len(),
                eta,
                grad.as_mut_ptr(),
                grad.len(),
                ax.as_mut_ptr(),
                ax.len(),
                atz.as_mut_ptr(),
                atz.len(),
                prox.as_mut_ptr(),
                prox.len(),
            )
        },
        ZcStatus::Ok
    );

    let bx = BlockVector::from_vec(p.dbar, x.clone());
    let mut reference = Oracle::new(p.clone());
    let b1 = reference.oracle1(&bx, &z, eta).unwrap();
    assert_eq!(grad, b1.grad_f0.data);
    assert_eq!(ax, b1.ax);
    assert_eq!(atz, b1.at_z.data);
    assert_eq!(prox, b1.prox.data);

    let mut abar_x = vec![0.0; p.nbar];
    let mut abar_t_y = vec![0.0; p.d];
    let mut prox_y = vec![0.0; p.nbar];
    assert_eq!(
        unsafe {
            zc_oracle2(
                o,
                x.as_ptr(),
                x.len(),
                y.as_ptr(),
                y.len(),
                z.as_ptr(),
                z.len(),
                eta,
                grad.as_mut_ptr(),
                grad.len(),
                abar_x.as_mut_ptr(),
                abar_x.len(),
                ax.as_mut_ptr(),
                ax.len(),
                abar_t_y.as_mut_ptr(),
                abar_t_y.len(),
                atz.as_mut_ptr(),
                atz.len(),
                prox_y.as_mut_ptr(),
                prox_y.len(),
            )
        },
        ZcStatus::Ok
    );
    let by = YVector::from_vec(p.dbar, y.clone());
    let b2 = reference.oracle2(&bx, &by, &z, eta).unwrap();
    assert_eq!(grad, b2.grad_f0.data);
    assert_eq!(abar_x, b2.abar_x.data);
    assert_eq!(ax, b2.ax);
    assert_eq!(abar_t_y, b2.abar_t_y.data);
    assert_eq!(atz, b2.at_z.data);
    assert_eq!(prox_y, b2.prox.data);

    assert_eq!(unsafe { zc_oracle_count(o, &mut count) }, ZcStatus::Ok);
    assert_eq!(count, 2);

    // null x pointer with nonzero length
    assert_eq!(
        unsafe {
            zc_oracle1(
                o,
                ptr::null(),
                p.d,
                z.as_ptr(),
                z.len(),
                eta,
                grad.as_mut_ptr(),
                grad.len(),
                ax.as_mut_ptr(),
                ax.len(),
                atz.as_mut_ptr(),
                atz.len(),
                prox.as_mut_ptr(),
                prox.len(),
            )
        },
        ZcStatus::NullArg
    );
    // failed calls are not metered
    assert_eq!(unsafe { zc_oracle_count(o, &mut count) }, ZcStatus::Ok);
    assert_eq!(count, 2);

    unsafe { zc_oracle_destroy(o) };
    unsafe { zc_oracle_destroy(ptr::null_mut()) };
    unsafe { zc_instance_destroy(h) };
}

#[test]
fn error_message_roundtrip_and_sizing() {
    let mut h: *mut ZcInstance = ptr::null_mut();
    assert_eq!(
        unsafe { zc_instance_create(0.1, 1.0, 2, 2, 4, -1.0, &mut h) },
        ZcStatus::BadConfig
    );
    // query size with a null buffer, then fetch exactly
    let need = unsafe { zc_last_error_message(ptr::null_mut(), 0) };
    assert!(need > 1);
    let mut buf = vec![0 as c_char; need];
    let need2 = unsafe { zc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(need, need2);
    assert_eq!(buf[need - 1], 0);
    let msg: String = buf[..need - 1].iter().map(|&b| b as u8 as char).collect();
    assert!(msg.contains("odd"), "unexpected message: {msg}");
}

#[test]
fn committed_header_tracks_the_abi() {
    let header = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/zerochain.h"),
    )
    .expect("committed header present");
    for symbol in [
        "zc_instance_create_json",
        "zc_oracle2",
        "zc_last_error_message",
        "ZC_STATUS_PANIC",
        "ZC_OP_ABAR_ABAR_T",
        "ZcInstanceInfo",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}

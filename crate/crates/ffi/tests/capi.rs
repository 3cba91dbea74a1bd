use std::ffi::{CStr, CString};
use std::ptr;

use nnverif_ffi::*;

const NET: &str = r#"{"format":1,"layer_sizes":[2,3,2],
"weights":[[[1,0],[0,1],[1,1]],[[1,0,0.5],[0,1,0.2]]],
"biases":[[0,0,0],[0,0.1]],"input_mean":[0,0],"input_range":[1,1]}"#;

const NNET: &str = "// tiny
1,1,1,1,
1,1,
0,
-10,
10,
0,0,
1,1,
2.0,
0.5,
";

fn load() -> *mut NnvNetwork {
    let text = CString::new(NET).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { nnv_network_from_json(text.as_ptr(), &mut net) }, NnvStatus::Ok);
    assert!(!net.is_null());
    net
}

fn last_error() -> String {
    let p = nnv_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn forward_and_classify() {
    let net = load();
    unsafe {
        let (mut i, mut o, mut params) = (0, 0, 0);
        assert_eq!(nnv_network_sizes(net, &mut i, &mut o), NnvStatus::Ok);
        assert_eq!((i, o), (2, 2));
        assert_eq!(nnv_network_param_count(net, &mut params), NnvStatus::Ok);
        assert_eq!(params, 6 + 3 + 6 + 2);

        let x = [1.0, 0.5];
        let mut y = [0.0; 2];
        assert_eq!(nnv_forward(net, x.as_ptr(), 2, y.as_mut_ptr(), 2), NnvStatus::Ok);
        assert_eq!(y, [1.75, 0.9]);
        let mut class = 9;
        assert_eq!(nnv_classify(net, x.as_ptr(), 2, &mut class), NnvStatus::Ok);
        assert_eq!(class, 0);
        assert_eq!(nnv_network_set_convention(net, NnvConvention::Argmin), NnvStatus::Ok);
        assert_eq!(nnv_classify(net, x.as_ptr(), 2, &mut class), NnvStatus::Ok);
        assert_eq!(class, 1);

        assert_eq!(nnv_forward(net, x.as_ptr(), 2, y.as_mut_ptr(), 1), NnvStatus::BufferTooSmall);
        assert_eq!(nnv_forward(net, x.as_ptr(), 1, y.as_mut_ptr(), 2), NnvStatus::Dimension);
        assert!(last_error().contains("expected 2"));
        nnv_network_free(net);
    }
}

#[test]
fn robustness_verdicts_and_witness() {
    let net = load();
    unsafe {
        let seed = [1.0, 0.5];
        let mut v = ptr::null_mut();
        let s = nnv_verify_robustness(net, seed.as_ptr(), 2, 10.0, NnvEngine::Reduced, 5.0, &mut v);
        assert_eq!(s, NnvStatus::Ok);
        assert_eq!(nnv_verdict_kind(v), NnvVerdictKind::Unsat);
        let mut n = 7;
        assert_eq!(nnv_verdict_witness(v, ptr::null_mut(), 0, &mut n), NnvStatus::Ok);
        assert_eq!(n, 0);
        nnv_verdict_free(v);

        let s = nnv_verify_robustness(net, seed.as_ptr(), 2, 90.0, NnvEngine::Explicit, 5.0, &mut v);
        assert_eq!(s, NnvStatus::Ok);
        assert_eq!(nnv_verdict_kind(v), NnvVerdictKind::Sat);
        let mut w = [0.0; 2];
        assert_eq!(nnv_verdict_witness(v, w.as_mut_ptr(), 2, &mut n), NnvStatus::Ok);
        assert_eq!(n, 2);
        let mut class = 0;
        assert_eq!(nnv_classify(net, w.as_ptr(), 2, &mut class), NnvStatus::Ok);
        assert_eq!(class, 1);

        let json = nnv_verdict_to_json(v);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"kind\":\"SAT\""));
        nnv_string_free(json);
        nnv_verdict_free(v);

        let s = nnv_verify_robustness(net, seed.as_ptr(), 2, 10.0, NnvEngine::Reduced, 0.0, &mut v);
        assert_eq!(s, NnvStatus::Ok);
        assert_eq!(nnv_verdict_kind(v), NnvVerdictKind::Timeout);
        nnv_verdict_free(v);
        nnv_network_free(net);
    }
}

#[test]
fn safety_property_from_json() {
    let net = load();
    unsafe {
        assert_eq!(nnv_network_set_convention(net, NnvConvention::Raw), NnvStatus::Ok);
        let prop = CString::new(
            r#"{"kind":"safety","input_box":{"lower":[0,0],"upper":[1,1]},"constraint":{"op":"le","index":0,"value":2.5}}"#,
        )
        .unwrap();
        let mut v = ptr::null_mut();
        let s = nnv_verify_property_json(net, prop.as_ptr(), NnvEngine::Reduced, 5.0, &mut v);
        assert_eq!(s, NnvStatus::Ok);
        assert_eq!(nnv_verdict_kind(v), NnvVerdictKind::Unsat);
        nnv_verdict_free(v);

        let bad = CString::new(r#"{"kind":"safety"}"#).unwrap();
        let s = nnv_verify_property_json(net, bad.as_ptr(), NnvEngine::Reduced, 5.0, &mut v);
        assert_eq!(s, NnvStatus::Parse);
        nnv_network_free(net);
    }
}

#[test]
fn nnet_text_and_errors() {
    unsafe {
        let text = CString::new(NNET).unwrap();
        let mut net = ptr::null_mut();
        assert_eq!(nnv_network_from_nnet(text.as_ptr(), &mut net), NnvStatus::Ok);
        let mut y = [0.0];
        assert_eq!(nnv_forward(net, [2.0].as_ptr(), 1, y.as_mut_ptr(), 1), NnvStatus::Ok);
        assert_eq!(y, [4.5]);
        nnv_network_free(net);

        let garbage = CString::new("1,2,3").unwrap();
        assert_eq!(nnv_network_from_nnet(garbage.as_ptr(), &mut net), NnvStatus::Parse);
        assert!(last_error().starts_with("line"));
        assert_eq!(nnv_network_from_json(ptr::null(), &mut net), NnvStatus::NullPointer);
        assert_eq!(nnv_classify(ptr::null(), ptr::null(), 0, ptr::null_mut()), NnvStatus::NullPointer);
        nnv_network_free(ptr::null_mut());
        nnv_verdict_free(ptr::null_mut());
        nnv_string_free(ptr::null_mut());
        assert_eq!(nnv_verdict_kind(ptr::null()), NnvVerdictKind::Timeout);
    }
}

#[test]
fn optimality_predicate() {
    let mut out = false;
    unsafe {
        assert_eq!(nnv_ris_optimal(5, 1, 4, 2, &mut out), NnvStatus::Ok);
        assert!(out);
        assert_eq!(nnv_ris_optimal(2, 1, 1, 1, &mut out), NnvStatus::Ok);
        assert!(!out);
        assert_eq!(nnv_ris_optimal(5, 2, 2, 1, &mut out), NnvStatus::InvalidArgument);
    }
    let v = unsafe { CStr::from_ptr(nnv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nnverif.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct NnvNetwork NnvNetwork;"));
}

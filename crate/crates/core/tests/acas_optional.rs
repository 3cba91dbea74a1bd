//! Needs the public ACAS Xu `.nnet` files. Point `NNVERIF_ACAS_DIR` at the
//! directory holding `ACASXU_run2a_1_7_batch_2000.nnet` and friends, then
//! run `cargo test -p nnverif --test acas_optional -- --ignored`.

use std::time::Duration;

use nnverif::engine::{verify_reduced, EngineConfig, VerdictKind};
use nnverif::property::{acas_default_domain, acas_properties, Property};
use nnverif::{parse_nnet, OutputConvention};

#[test]
#[ignore = "requires public ACAS Xu networks"]
fn acas_p3_on_1_7_1_8_1_9() {
    let Some(dir) = std::env::var_os("NNVERIF_ACAS_DIR") else {
        eprintln!("NNVERIF_ACAS_DIR not set, skipping");
        return;
    };
    let dir = std::path::PathBuf::from(dir);
    let cfg = EngineConfig {
        timeout: Duration::from_secs(600),
        ..EngineConfig::default()
    };
    for name in ["1_7", "1_8", "1_9"] {
        let path = dir.join(format!("ACASXU_run2a_{name}_batch_2000.nnet"));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let net = parse_nnet(&text).unwrap().with_convention(OutputConvention::Argmin);
        let domain = net.input_domain().unwrap_or_else(acas_default_domain);
        let p3 = Property::Safety(acas_properties(&domain).unwrap().swap_remove(2));
        let v = verify_reduced(&net, &p3, &cfg).unwrap();
        match (&v.kind, &v.witness) {
            (VerdictKind::Sat, Some(w)) => {
                p3.revalidate(&net, w).unwrap();
                eprintln!("{name}: SAT, witness {:?}", w.input);
            }
            (k, _) => eprintln!("{name}: {} after {:.0} ms (no SAT within budget)", k.as_str(), v.stats.wall_ms),
        }
    }
}

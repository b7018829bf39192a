use gridrel::io::netfile::{parse_network, serialize_network};
use gridrel::io::scenario::{builtin_network, BUILTIN_NETWORKS};
use gridrel::model::NetworkSpec;
use proptest::prelude::*;

#[test]
fn bundled_networks_round_trip() {
    for name in BUILTIN_NETWORKS {
        let spec = builtin_network(name).unwrap().unwrap();
        let text = serialize_network(&spec);
        assert_eq!(parse_network(&text).unwrap(), spec, "{name}");
    }
}

fn base() -> NetworkSpec {
    builtin_network("ieee33").unwrap().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edited_networks_round_trip(
        loads in proptest::collection::vec((0.0f64..5.0, 0.0f64..2.0, 0u32..5000), 33),
        imp in proptest::collection::vec((1e-6f64..1.0, 1e-6f64..1.0, 0.01f64..1e3), 32),
        profile in "[a-z]([a-z _#=\"]{0,8}[a-z])?",
        drop_ict in any::<bool>(),
        drop_generation in any::<bool>(),
    ) {
        let mut spec = base();
        for (b, (p, q, c)) in spec.buses.iter_mut().zip(&loads) {
            b.load_mw = *p;
            b.load_mvar = *q;
            b.customers = *c;
        }
        for (l, (r, x, cap)) in spec.lines.iter_mut().zip(&imp) {
            l.r_pu = *r;
            l.x_pu = *x;
            l.capacity_mw = *cap;
        }
        spec.buses[4].profile = Some(profile.clone());
        spec.buses[5].category = Some(profile);
        if drop_ict {
            spec = spec.without_ict();
        }
        if drop_generation {
            spec = spec.without_generation();
        }
        let text = serialize_network(&spec);
        let back = parse_network(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, spec);
    }
}

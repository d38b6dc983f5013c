#![no_main]

use libfuzzer_sys::fuzz_target;
use malnet_core::graph::load_edge_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = load_edge_list(text) {
            let again = load_edge_list(&g.to_edge_list()).expect("written edge lists parse");
            assert_eq!(again, g);
        }
    }
});

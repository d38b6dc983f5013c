#![no_main]

use libfuzzer_sys::fuzz_target;
use malnet_core::uncertainty::{load_probabilities, write_probabilities};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = load_probabilities(text) {
            assert!(table.mu.iter().all(|p| (0.0..=1.0).contains(p)));
            let written = write_probabilities(&table.mu, table.labels.as_deref());
            let again = load_probabilities(&written).expect("written tables parse");
            assert_eq!(again.mu, table.mu);
            assert_eq!(again.labels, table.labels);
        }
    }
});

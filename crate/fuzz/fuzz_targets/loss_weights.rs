#![no_main]

use libfuzzer_sys::fuzz_target;
use malnet_core::LossWeights;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = text.parse::<LossWeights>() {
            w.validate().expect("parsed weights are valid");
            let _ = w.to_string();
        }
    }
});

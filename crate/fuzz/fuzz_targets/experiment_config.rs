#![no_main]

use libfuzzer_sys::fuzz_target;
use malnet_bench::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_json(text) {
            let _ = cfg.weight_grid().expect("validated configs have a weight grid");
        }
    }
});

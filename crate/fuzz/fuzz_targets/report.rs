#![no_main]

use libfuzzer_sys::fuzz_target;
use malnet_bench::parse_report;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = parse_report(text) {
            let _ = report.boxplot_csv();
            let _ = report.to_json();
        }
    }
});

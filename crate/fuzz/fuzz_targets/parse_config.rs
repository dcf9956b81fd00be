#![no_main]

use cablecap::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(c) = ExperimentConfig::from_toml_str(s) {
            // Anything accepted must serialize and parse back to itself.
            let text = c.to_toml_string().expect("valid config serializes");
            let again = ExperimentConfig::from_toml_str(&text).expect("round trip parses");
            assert_eq!(c, again);
        }
    }
});

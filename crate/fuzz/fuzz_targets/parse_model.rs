#![no_main]

use cablecap::harness::io::parse_model;
use cablecap::PowerProfile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(model) = parse_model(s) else { return };
    // A validated model must evaluate without panicking.
    let probe = PowerProfile::new(vec![0.0; model.channels()]).expect("flat probe");
    let _ = model.predict(&probe);
});

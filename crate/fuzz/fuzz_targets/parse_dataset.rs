#![no_main]

use cablecap::harness::io::{parse_dataset, write_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = parse_dataset(data) {
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).expect("accepted dataset writes");
        assert_eq!(parse_dataset(&buf).expect("written dataset parses"), d);
    }
});

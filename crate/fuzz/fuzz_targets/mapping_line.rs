#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec_core::io::parse_mapping_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(terms) = parse_mapping_line(line) {
        assert!(terms.len() >= 2);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec::wire::{parse_field_arg, parse_pair_arg};

fuzz_target!(|data: &[u8]| {
    let Ok(arg) = std::str::from_utf8(data) else { return };
    let _ = parse_pair_arg(arg);
    let _ = parse_field_arg(arg);
});

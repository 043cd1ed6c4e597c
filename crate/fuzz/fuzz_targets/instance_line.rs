#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec_core::io::parse_instance_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let Ok(parsed) = parse_instance_line(line) else { return };
    // Whatever survives validation must re-emit and re-parse unchanged.
    let emitted = serde_json::to_string(&parsed.instance.to_raw()).unwrap();
    let again = parse_instance_line(&emitted).unwrap_or_else(|e| panic!("{emitted}: {e:?}"));
    assert_eq!(again.instance, parsed.instance);
    assert_eq!(again.dropped_pairs, 0);
});

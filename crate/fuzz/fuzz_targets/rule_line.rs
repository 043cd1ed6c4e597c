#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec_core::io::{parse_rule_line, RuleDoc};
use valrec_core::mapping::MappingRepository;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let Ok(rule) = parse_rule_line(line) else { return };
    let emitted = serde_json::to_string(&RuleDoc::from_rule(&rule, &MappingRepository::default())).unwrap();
    let again = parse_rule_line(&emitted).unwrap_or_else(|e| panic!("{emitted}: {e}"));
    assert_eq!(again, rule);
});

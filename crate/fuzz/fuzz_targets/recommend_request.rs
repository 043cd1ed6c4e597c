#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec::wire::parse_recommend_request;

fuzz_target!(|data: &[u8]| {
    let Ok(query) = parse_recommend_request(data) else { return };
    if let Some(cutoff) = query.options.and_then(|o| o.score_cutoff) {
        assert!(cutoff.is_finite());
    }
});

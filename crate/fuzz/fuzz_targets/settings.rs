#![no_main]

use libfuzzer_sys::fuzz_target;
use valrec::config::Settings;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(settings) = toml::from_str::<Settings>(text) else { return };
    let _ = settings.mining_params();
    let _ = settings.recommend_options();
    let _ = settings.split();
    let _ = settings.eval_fields();
    let _ = settings.bind();
});

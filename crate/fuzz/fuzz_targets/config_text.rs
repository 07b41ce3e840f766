#![no_main]

use dicke_core::config::{parse_kv, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_kv(text);
    if let Ok(c) = RunConfig::from_text(text) {
        let echo = c.to_text(None);
        let again = RunConfig::from_text(&echo).expect("echo re-parses");
        assert_eq!(again.to_text(None), echo);
    }
});

#![no_main]

use dicke_core::io::{read_trace, write_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_trace(data) {
        let text = write_trace(Vec::new(), &rows).unwrap();
        let again = read_trace(&text[..]).expect("written trace re-reads");
        assert_eq!(write_trace(Vec::new(), &again).unwrap(), text);
    }
});

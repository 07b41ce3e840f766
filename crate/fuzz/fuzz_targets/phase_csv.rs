#![no_main]

use dicke_core::io::{read_phase, write_phase};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_phase(data) {
        let text = write_phase(Vec::new(), &rows).unwrap();
        let again = read_phase(&text[..]).expect("written phase rows re-read");
        assert_eq!(write_phase(Vec::new(), &again).unwrap(), text);
    }
});

#![no_main]

use dicke_core::io::{read_fixed_points, write_fixed_points};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(fps) = read_fixed_points(data) {
        let text = write_fixed_points(Vec::new(), &fps).unwrap();
        let again = read_fixed_points(&text[..]).expect("written fixed points re-read");
        assert_eq!(write_fixed_points(Vec::new(), &again).unwrap(), text);
    }
});

#![no_main]

use dicke_core::io::{read_pairs, write_pairs, AMPLITUDE_HEADER, PEAKS_HEADER, SPECTRUM_HEADER};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for header in [SPECTRUM_HEADER, PEAKS_HEADER, AMPLITUDE_HEADER] {
        if let Ok(rows) = read_pairs(data, header) {
            let text = write_pairs(Vec::new(), header, &rows).unwrap();
            let again = read_pairs(&text[..], header).expect("written pairs re-read");
            assert_eq!(write_pairs(Vec::new(), header, &again).unwrap(), text);
        }
    }
});

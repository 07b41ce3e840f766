#![no_main]

use dicke_core::io::{read_trajectory, trajectory_row, CsvOut, TRAJECTORY_HEADER};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_trajectory(data) {
        let mut out = CsvOut::new(Vec::new(), &TRAJECTORY_HEADER).unwrap();
        for (t, s) in &rows {
            out.row(&trajectory_row(*t, s)).unwrap();
        }
        let text = out.into_inner().unwrap();
        let again = read_trajectory(&text[..]).expect("written trajectory re-reads");
        assert_eq!(again.len(), rows.len());
        for ((ta, a), (tb, b)) in rows.iter().zip(&again) {
            assert_eq!(ta.to_bits(), tb.to_bits());
            assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        }
    }
});

#![no_main]

use hdcov::cli::io::{parse_matrix, write_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix(text) {
        assert!(m.values().iter().all(|v| v.is_finite()));
        assert_eq!(m.values().len(), m.n() * m.d());
        let again = parse_matrix(&write_matrix(&m)).expect("written matrix parses");
        assert_eq!(again, m);
    }
});

#![no_main]

use hdcov::cli::io::parse_alpha_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(alphas) = parse_alpha_list(text) {
        assert!(!alphas.is_empty());
        assert!(alphas.iter().all(|a| *a > 0.0 && *a < 1.0));
    }
});

#![no_main]

use hdcov::simlab::Example;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match text.parse::<Example>() {
        Ok(e) => assert_eq!(e.name().parse::<Example>().ok(), Some(e)),
        Err(err) => assert!(err.to_string().contains("ex1-i")),
    }
});

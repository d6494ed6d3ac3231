#![no_main]

use hdcov::kernels::Bandwidth;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(bw) = text.parse::<Bandwidth>() {
        if let Bandwidth::Fixed(g) = bw {
            assert!(g.is_finite() && g > 0.0);
        }
        assert_eq!(bw.to_string().parse::<Bandwidth>().ok(), Some(bw));
    }
});

#![no_main]

use gafhole::holes::parse_estimate_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_estimate_line(line) {
        assert!(e.p_low <= e.p_high);
        assert_eq!(parse_estimate_line(&e.to_line()).unwrap(), e);
    }
});

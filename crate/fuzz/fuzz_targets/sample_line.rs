#![no_main]

use gafhole::gaf::{parse_sample_line, sample_to_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_sample_line(line) {
        assert_eq!(parse_sample_line(&sample_to_line(&s)).unwrap(), s);
    }
});

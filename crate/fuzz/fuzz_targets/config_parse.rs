#![no_main]

use gafhole_cli::config::config_from_str;
use libfuzzer_sys::fuzz_target;

// Input: TOML text, then optional `key=value` override lines after a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (body, rest) = text.split_once('\0').unwrap_or((text, ""));
    let overrides: Vec<String> = rest.lines().map(str::to_string).collect();
    if let Ok(cfg) = config_from_str(body, &overrides, None) {
        let again = config_from_str(&cfg.to_toml(), &[], None).expect("printed config must parse");
        assert_eq!(again, cfg);
    }
});

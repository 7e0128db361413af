#![no_main]

use libfuzzer_sys::fuzz_target;
use scalc_core::io::{emit_config, parse_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&emit_config(&cfg)).expect("emitted config parses");
        assert_eq!(again, cfg);
    }
});

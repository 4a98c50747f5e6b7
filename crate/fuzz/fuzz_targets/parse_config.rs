#![no_main]

use fogfl_core::scenario::{parse_config, render_config};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Whatever is accepted must survive a render/parse round trip.
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&render_config(&cfg)).expect("rendered config parses");
        assert_eq!(again, cfg);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use magicflow::io::{parse_state, write_state, Repr};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rho) = parse_state(text) {
        // anything accepted must survive a round trip
        let again = parse_state(&write_state(&rho, Repr::Dense, None)).expect("re-parse");
        assert!(again.max_abs_diff(&rho) < 1e-9);
    }
});

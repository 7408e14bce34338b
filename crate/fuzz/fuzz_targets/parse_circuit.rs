#![no_main]

use libfuzzer_sys::fuzz_target;
use magicflow::io::{parse_circuit, write_circuit};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(circuit) = parse_circuit(text) {
        assert_eq!(parse_circuit(&write_circuit(&circuit)).expect("re-parse"), circuit);
    }
});

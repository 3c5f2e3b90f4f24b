#![no_main]

use dsrr::dualsolve::{parse_vector_dump, vector_dump};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_vector_dump(text) {
        let again = parse_vector_dump(&vector_dump(&v)).expect("dump must parse");
        assert_eq!(again.len(), v.len());
    }
});

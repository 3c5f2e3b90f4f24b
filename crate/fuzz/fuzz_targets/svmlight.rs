#![no_main]

use dsrr::dataset::{parse_svmlight, to_svmlight};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = parse_svmlight(text, None) {
        let again = parse_svmlight(&to_svmlight(&ds), Some(ds.d())).expect("written data must parse");
        assert_eq!(again.n(), ds.n());
        assert_eq!(again.labels(), ds.labels());
    }
    let _ = parse_svmlight(text, Some(16));
});

#![no_main]

use dsrr::sketch::OperatorSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<OperatorSpec>() {
        let round: OperatorSpec = spec.to_string().parse().expect("printed header must parse");
        assert_eq!(round, spec);
    }
});

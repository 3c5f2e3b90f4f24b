#![no_main]

use dsrr_exp::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.to_text()).expect("printed config must parse");
        assert_eq!(again, cfg);
        let _ = cfg.seeds_or(&[0]);
        let _ = cfg.list::<f64>("tau");
    }
});

#![no_main]

use dsrr::dualsolve::Loss;
use dsrr::sketch::OperatorKind;
use dsrr_exp::config::SynthShape;
use dsrr_exp::jl::ProbeSpec;
use dsrr_exp::suites::Suite;
use dsrr_exp::sweep::OpChoice;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = text.parse::<Loss>();
    let _ = text.parse::<OperatorKind>();
    let _ = text.parse::<OpChoice>();
    let _ = text.parse::<SynthShape>();
    let _ = text.parse::<ProbeSpec>();
    let _ = text.parse::<Suite>();
});

#![no_main]
use forcegrip_core::formats::{parse_curve, write_curve};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(curve) = parse_curve(text) {
        let again = parse_curve(&write_curve(&curve)).expect("written curve parses");
        assert_eq!(again, curve);
        let _ = curve.newton_to_norm(curve.norm_to_newton(1.0));
    }
});

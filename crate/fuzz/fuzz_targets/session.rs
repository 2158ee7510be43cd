#![no_main]
use forcegrip_core::formats::parse_session;
use forcegrip_core::tactile::fit_calibration;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(session) = parse_session(text) {
        if let Ok(fit) = fit_calibration(&session.pairs()) {
            let k = fit.curve.knots();
            assert!(k.windows(2).all(|w| w[1].1 >= w[0].1));
        }
    }
});

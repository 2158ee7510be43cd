#![no_main]
use forcegrip_core::formats::{parse_demo, write_demo};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(demo) = parse_demo(text) {
        let again = parse_demo(&write_demo(&demo)).expect("written demo parses");
        assert_eq!(again, demo);
    }
});

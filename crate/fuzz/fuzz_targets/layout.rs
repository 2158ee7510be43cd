#![no_main]
use forcegrip_core::formats::{parse_layout, write_layout};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(layout) = parse_layout(text) {
        parse_layout(&write_layout(&layout)).expect("written layout parses");
    }
});

#![no_main]
use forcegrip_core::formats::{parse_rig, write_rig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rig) = parse_rig(text) {
        parse_rig(&write_rig(&rig)).expect("written rig parses");
    }
});

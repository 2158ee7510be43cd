#![no_main]
use forcegrip_core::formats::{parse_task_spec, write_task_spec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_task_spec(text) {
        let again = parse_task_spec(&write_task_spec(&spec)).expect("written spec parses");
        assert_eq!(again, spec);
    }
});

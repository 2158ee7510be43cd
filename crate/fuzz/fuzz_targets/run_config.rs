#![no_main]
use forcegrip_cli::config::{ConfigFile, Overrides, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = toml::from_str::<ConfigFile>(text) else {
        return;
    };
    // referenced files are read from disk; keep the fuzzer off the filesystem
    if file.task_spec.is_some() || file.rig.is_some() || file.layout.is_some() {
        return;
    }
    let over = Overrides {
        seed: Some(1),
        out: Some("out".into()),
        ..Default::default()
    };
    let _ = RunConfig::resolve(file, std::path::Path::new(""), &over);
});

#![no_main]
use forcegrip_core::formats::{parse_hand_track, write_hand_track};
use forcegrip_core::geometry::CameraRig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(track) = parse_hand_track(text) {
        let again = parse_hand_track(&write_hand_track(&track)).expect("written track parses");
        assert_eq!(again, track);
        let _ = track.to_frames(&CameraRig::default_rig());
    }
});

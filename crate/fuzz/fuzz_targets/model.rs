#![no_main]
use forcegrip_core::policy::Policy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(policy) = Policy::from_bytes(data) {
        let again = Policy::from_bytes(&policy.to_bytes()).expect("written model loads");
        assert_eq!(again.net, policy.net);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::tvae::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::decode(data, "fuzz") {
        let bytes = ckpt.encode();
        let again = Checkpoint::decode(&bytes, "fuzz").expect("re-encoded checkpoint decodes");
        assert!(again.encode() == bytes);
    }
});

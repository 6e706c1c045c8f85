#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::spectral::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sums) = parse_manifest(text) {
        assert!(sums.values().all(|d| d.len() == 64 && d.bytes().all(|b| b.is_ascii_hexdigit())));
    }
});

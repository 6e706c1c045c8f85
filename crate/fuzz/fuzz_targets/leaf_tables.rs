#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::spectral::LeafCoefficientTables;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = LeafCoefficientTables::parse(text, "fuzz");
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::spectral::{parse_srf, SpectralGrid};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_srf(text, "fuzz", SpectralGrid::model(400.0, 2500.0).unwrap());
});

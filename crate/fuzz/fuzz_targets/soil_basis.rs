#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::spectral::{SoilBasis, SpectralGrid};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let grid = SpectralGrid::model(400.0, 2500.0).unwrap();
    if let Ok(basis) = SoilBasis::parse(text, "fuzz", grid) {
        assert_eq!(basis.dry.values.len(), grid.count);
        assert_eq!(basis.wet.values.len(), grid.count);
    }
});

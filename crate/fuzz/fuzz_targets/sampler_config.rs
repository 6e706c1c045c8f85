#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::sampler::{effective_bounds, SamplerConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = SamplerConfig::from_toml(text) else { return };
    if let Ok(s) = cfg.resolve() {
        for lai in [0.0, 3.5, 7.0, 10.0] {
            for (lo, hi) in effective_bounds(&s, lai) {
                assert!(lo <= hi);
            }
        }
    }
});

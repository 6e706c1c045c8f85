#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::tvae::{beta_at, TrainConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = TrainConfig::from_toml(text) {
        let beta = beta_at(&cfg, cfg.epochs.saturating_sub(1).min(1 << 20));
        assert!(beta.is_finite() && beta >= 0.0);
    }
});

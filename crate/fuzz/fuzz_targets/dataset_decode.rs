#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::sampler::Dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::decode(data, "fuzz") {
        for i in 0..ds.len().min(16) {
            let _ = ds.params(i);
            let _ = ds.noisy(i);
        }
        let _ = ds.write_csv(std::io::sink());
    }
});

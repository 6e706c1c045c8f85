#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::metrics::{parse_field_csv, write_field_csv};

fuzz_target!(|data: &[u8]| {
    let Some((&flag, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(parsed) = parse_field_csv(text, "fuzz", flag & 1 == 1) {
        let mut out = Vec::new();
        write_field_csv(&parsed.records, &mut out).unwrap();
        let back = parse_field_csv(std::str::from_utf8(&out).unwrap(), "fuzz", false).unwrap();
        assert_eq!(back.records.len(), parsed.records.len());
    }
});

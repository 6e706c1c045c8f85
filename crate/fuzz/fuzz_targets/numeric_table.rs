#![no_main]

use libfuzzer_sys::fuzz_target;
use prosail_tvae::spectral::NumericTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = NumericTable::parse(text, "fuzz") {
        let width = table.width();
        assert!(table.rows.iter().all(|(_, r)| r.len() == width));
        let _ = table.check_ascending("fuzz");
    }
});

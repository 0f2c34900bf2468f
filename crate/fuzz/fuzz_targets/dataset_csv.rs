#![no_main]

use drpolicy_core::LoggedDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = LoggedDataset::read_csv(data) {
        let mut out = Vec::new();
        ds.write_csv(&mut out).expect("in-memory write");
        let back = LoggedDataset::read_csv(out.as_slice()).expect("written dataset parses");
        assert_eq!(back, ds);
    }
});

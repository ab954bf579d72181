#![no_main]

use libfuzzer_sys::fuzz_target;
use whs::data::{DataSpec, ForcingSpec};

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = std::str::from_utf8(data) {
        let _ = DataSpec::parse(spec);
        let _ = ForcingSpec::parse(spec);
    }
});

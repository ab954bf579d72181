#![no_main]

use libfuzzer_sys::fuzz_target;
use whs::dump::FieldDump;

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = FieldDump::decode(data) {
        // Anything accepted must re-encode to a dump that decodes identically.
        let again = FieldDump::decode(&dump.encode()).expect("re-encoded dump decodes");
        assert_eq!(again.encode(), dump.encode());
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use whs::dump::CoefficientTable;
use whs::model::table_model;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = CoefficientTable::decode(data) {
        assert_eq!(CoefficientTable::decode(&table.encode()).unwrap(), table);
        let _ = table_model(table, None);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use whs::config::ConfigFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ConfigFile::from_bytes(data) {
        for key in cfg.keys() {
            let _ = cfg.get_parsed::<f64>(key);
            let _ = cfg.get_parsed::<usize>(key);
        }
    }
});

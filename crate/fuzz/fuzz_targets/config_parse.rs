#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = attrex::config::ConfigFile::parse(text) else {
        return;
    };
    // Typed lookups on whatever parsed must error cleanly, never panic.
    for key in config.keys() {
        let _ = config.get(key);
        let _ = config.get_parsed::<f64>(key);
        let _ = config.get_parsed::<usize>(key);
        let _ = config.get_bool(key);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = attrex::model_file::ModelFile::from_bytes(data) else {
        return;
    };
    // A file the loader accepts must serialize back to a loadable file.
    let round = model.to_bytes();
    attrex::model_file::ModelFile::from_bytes(&round).expect("serialized model reloads");
});

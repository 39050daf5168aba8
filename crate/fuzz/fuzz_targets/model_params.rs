#![no_main]

use appnet::model::ModelParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(params) = ModelParams::from_json(text) {
        let again = ModelParams::from_json(&params.to_json()).expect("serialized params parse");
        assert_eq!(again, params);
    }
});

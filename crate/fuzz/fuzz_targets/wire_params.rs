#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::adapters::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = wire::decode_params(data) {
        let text = wire::encode_params(&params);
        assert_eq!(wire::decode_params(text.as_bytes()).unwrap(), params);
    }
    let _ = wire::decode_box_prompt(data);
});

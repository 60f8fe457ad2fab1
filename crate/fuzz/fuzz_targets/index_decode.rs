#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::viewpoint::ViewpointIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = ViewpointIndex::from_bytes(data) {
        let bytes = index.to_bytes();
        let again = ViewpointIndex::from_bytes(&bytes).expect("encoded index decodes");
        assert_eq!(again.to_bytes(), bytes);
        if !index.is_empty() {
            let q = index.embedding(0).to_vec();
            let _ = index.query(&q, 3);
        }
    }
});

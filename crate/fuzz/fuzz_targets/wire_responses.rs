//! Embedding and segmentation response bodies from remote endpoints.

#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::adapters::{wire, Capability};

fuzz_target!(|data: &[u8]| {
    let _ = wire::decode_embedding_response(Capability::TextEmbedding, data);
    if let Ok(regions) = wire::decode_segmentation_response(data, (16, 16)) {
        for r in &regions {
            assert_eq!(r.mask.dims(), (16, 16));
        }
    }
});

//! JSON bodies accepted by the HTTP interface.

#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::compositor::StrokeSet;
use memovis_core::viewpoint::SamplingConfig;
use memovis_core::Viewpoint;
use memovis_service::ModifierRequest;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = ModifierRequest::from_json(data) {
        let _ = req.check(64, 64, false, "comment");
        let text = serde_json::to_vec(&req).unwrap();
        assert_eq!(ModifierRequest::from_json(&text).unwrap(), req);
    }
    if let Ok(v) = serde_json::from_slice::<Viewpoint>(data) {
        let _ = v.validate();
    }
    if let Ok(s) = serde_json::from_slice::<StrokeSet>(data) {
        let _ = s.validate(64, 64);
    }
    if let Ok(s) = serde_json::from_slice::<SamplingConfig>(data) {
        if s.validate().is_ok() {
            let _ = s.count();
        }
    }
});

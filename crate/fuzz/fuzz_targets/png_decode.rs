//! Reference, depth and mask PNG decoding.

#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::{DepthMap, MaskImage, RgbImage};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = RgbImage::from_png(data) {
        let png = img.to_png().expect("decoded image encodes");
        assert_eq!(RgbImage::from_png(&png).unwrap(), img);
    }
    if let Ok(depth) = DepthMap::from_png(data) {
        let _ = depth.coverage();
    }
    if let Ok(mask) = MaskImage::from_png(data) {
        let png = mask.to_png().expect("decoded mask encodes");
        assert_eq!(MaskImage::from_png(&png).unwrap(), mask);
    }
});

//! glTF and GLB scene loading.

#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_core::scene::{load_scene_from_slice, write_glb};

fuzz_target!(|data: &[u8]| {
    if let Ok(scene) = load_scene_from_slice(data) {
        // A loaded scene must survive our own writer unchanged.
        let again = load_scene_from_slice(&write_glb(&scene)).expect("written GLB loads");
        assert_eq!(again.fingerprint_hex(), scene.fingerprint_hex());
    }
});

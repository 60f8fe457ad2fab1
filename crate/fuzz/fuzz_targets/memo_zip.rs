#![no_main]

use libfuzzer_sys::fuzz_target;
use memovis_service::memo::Memo;

fuzz_target!(|data: &[u8]| {
    if let Ok(memo) = Memo::from_zip(data) {
        let zip = memo.to_zip().expect("parsed memo re-exports");
        assert_eq!(Memo::from_zip(&zip).expect("exported memo parses"), memo);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(f) = ember::slc::parse_slc(src) else {
        return;
    };
    let printed = ember::slc::print_slc(&f);
    let reparsed = ember::slc::parse_slc(&printed)
        .expect("printer output must reparse");
    assert_eq!(f, reparsed, "round trip must preserve structure");
    let _ = ember::slc::verify_slc(&f);
});

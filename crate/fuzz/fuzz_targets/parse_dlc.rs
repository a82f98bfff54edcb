#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(p) = ember::dlc::parse_dlc(src) else {
        return;
    };
    let printed = ember::dlc::print_dlc(&p);
    let reparsed = ember::dlc::parse_dlc(&printed)
        .expect("printer output must reparse");
    assert_eq!(p, reparsed, "round trip must preserve structure");
    let _ = ember::dlc::verify_dlc(&p);
});

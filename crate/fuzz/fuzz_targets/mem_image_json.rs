#![no_main]

use ember::types::ElemType;
use libfuzzer_sys::fuzz_target;

// Memory-image JSON decoder: arbitrary input must parse or fail cleanly;
// accepted images must survive a serialize/parse cycle bit-exactly.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let elem_of = |name: &str| {
        Some(match name.len() % 3 {
            0 => ElemType::Index,
            1 => ElemType::I32,
            _ => ElemType::F32,
        })
    };
    let Ok(img) = ember::mem::parse_mem_image(src, &elem_of) else {
        return;
    };
    let json = ember::mem::mem_image_to_json(&img, None);
    let reparsed = ember::mem::parse_mem_image(&json, &elem_of)
        .expect("serializer output must reparse");
    assert!(img.bit_eq(&reparsed), "round trip must be bit-exact");
});

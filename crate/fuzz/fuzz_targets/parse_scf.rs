#![no_main]

use libfuzzer_sys::fuzz_target;

// Front-end parser robustness plus the print/parse round-trip oracle: any
// accepted input must reprint to a fixpoint.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(f) = ember::scf::parse_scf(src) else {
        return;
    };
    let printed = ember::scf::print_scf(&f);
    let reparsed = ember::scf::parse_scf(&printed)
        .expect("printer output must reparse");
    assert_eq!(
        ember::scf::print_scf(&reparsed),
        printed,
        "print/parse must reach a fixpoint"
    );
    // The verifier must never panic, whatever it decides.
    let _ = ember::scf::verify_scf(&f);
});

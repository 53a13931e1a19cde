//! Fuzzes the certificate-record JSON parser. JSON numbers cannot encode
//! NaN, so any failure to reparse a printed record must come from number
//! overflow to infinity, which serializes as null; everything else must
//! round-trip byte-for-byte.

#![no_main]

use hybrid_dwell::config::CertificateRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(record) = CertificateRecord::from_json_str(text) else { return };

    let printed = record.to_json_string().expect("parsed records must print");
    match CertificateRecord::from_json_str(&printed) {
        Ok(reparsed) => {
            let reprinted = reparsed.to_json_string().expect("reparsed records must print");
            assert_eq!(printed, reprinted, "printing must reach a fixed point in one step");
        }
        Err(_) => {
            assert!(
                printed.contains("null"),
                "only overflow-to-infinity may break the round trip"
            );
        }
    }
});

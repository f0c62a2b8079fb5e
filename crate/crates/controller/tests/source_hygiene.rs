//! The controller talks only the unified southbound model; no vendor
//! dialect may leak into its sources.

use std::fs;
use std::path::Path;

#[test]
fn controller_sources_are_vendor_neutral() {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("src");
    let mut checked = 0;
    for entry in fs::read_dir(&src).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        for needle in ["Vendor", "vendor::", "Translator", "XC ", "/xc/"] {
            assert!(!text.contains(needle), "{} mentions {needle:?}", path.display());
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

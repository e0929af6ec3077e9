//! The surface-form fixture shared with the acceptance suite.

use coqex_core::parse_quantity;

const FORMS: &str = include_str!("../../../fixtures/quantity_forms.tsv");

#[test]
fn every_form_parses_to_its_expected_pair() {
    let mut failures = Vec::new();
    let mut positives = 0;
    for line in FORMS.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        let (surface, value, modifier) = (fields[0], fields[1], fields[2]);
        let got = parse_quantity(surface);
        let ok = match (&got, value) {
            (None, "-") => true,
            (Some(q), v) if v != "-" => {
                positives += 1;
                q.value.to_string() == v && serde_json::to_value(q.modifier).unwrap() == modifier
            }
            _ => false,
        };
        if !ok {
            failures.push(format!("{surface:?}: expected ({value}, {modifier}), got {got:?}"));
        }
    }
    assert!(positives >= 40, "fixture has only {positives} count forms");
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

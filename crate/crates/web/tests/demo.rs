use gmpda_web::{analyze_json, compare_json, simulate_json};
use serde_json::Value;

fn series() -> String {
    simulate_json(r#"{"model":"clock","periods":[40],"sigma":"1","n":150,"beta":0.2,"seed":11}"#).unwrap()
}

#[test]
fn simulate_then_analyze() {
    let s = series();
    let parsed: Value = serde_json::from_str(&s).unwrap();
    assert!(parsed["timestamps"].as_array().unwrap().len() >= 150);

    let out = analyze_json(&s, r#"{"model":"clock","sigma":"1","curve_fit":false}"#).unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["periods"][0], 40.0);
    let hist = v["histogram"].as_array().unwrap();
    assert_eq!(hist.len(), 401);
    assert_eq!(v["fitted"].as_array().unwrap().len(), hist.len());
    assert_eq!(v["noise"].as_array().unwrap().len(), hist.len());
}

#[test]
fn compare_lists_every_baseline() {
    let v: Value = serde_json::from_str(&compare_json(&series(), 2).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row["periods"].as_array().unwrap().len(), 2, "{row}");
    }
}

#[test]
fn bad_input_is_reported() {
    assert!(simulate_json("{}").is_err());
    assert!(simulate_json(r#"{"model":"rw","periods":[0],"sigma":"log","n":10}"#).is_err());
    let few = r#"{"timestamps":[3,9],"length":20}"#;
    assert!(analyze_json(few, "{}").unwrap_err().contains("too few events"));
    assert!(analyze_json(few, r#"{"nonsense":1}"#).is_err());
}

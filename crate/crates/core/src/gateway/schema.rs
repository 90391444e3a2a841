//! Registered structured-output schemas and their validators.
//!
//! Validators are deliberately small: they check the shape the pipeline
//! relies on (required fields, types, non-emptiness, numeric ranges) and
//! produce a message usable as a repair instruction.

use std::collections::BTreeMap;

use serde_json::Value;

/// Schema identifiers, one per structured response shape.
pub mod ids {
    pub const DOMAIN_LABEL: &str = "domain_label.v1";
    pub const DOMAIN_MERGE: &str = "domain_merge.v1";
    pub const PAPER_SUMMARY: &str = "paper_summary.v1";
    pub const ENTITY_EXTRACTION: &str = "entity_extraction.v1";
    pub const REF_METHOD: &str = "ref_method.v1";
    pub const COMMUNITY_REPORT: &str = "community_report.v1";
    pub const MAP_FINDINGS: &str = "map_findings.v1";
    pub const REDUCE_SYNTHESIS: &str = "reduce_synthesis.v1";
    pub const CANDIDATE_IDEA: &str = "candidate_idea.v1";
    pub const SUGGESTIONS: &str = "suggestions.v1";
    pub const REFINED_IDEA: &str = "refined_idea.v1";
    pub const MATURITY: &str = "maturity.v1";
}

type Validator = fn(&Value) -> Result<(), String>;

pub struct SchemaRegistry {
    validators: BTreeMap<&'static str, Validator>,
}

impl SchemaRegistry {
    pub fn builtin() -> Self {
        let mut validators: BTreeMap<&'static str, Validator> = BTreeMap::new();
        validators.insert(ids::DOMAIN_LABEL, validate_domain_label);
        validators.insert(ids::DOMAIN_MERGE, validate_domain_merge);
        validators.insert(ids::PAPER_SUMMARY, validate_paper_summary);
        validators.insert(ids::ENTITY_EXTRACTION, validate_entity_extraction);
        validators.insert(ids::REF_METHOD, validate_ref_method);
        validators.insert(ids::COMMUNITY_REPORT, validate_community_report);
        validators.insert(ids::MAP_FINDINGS, validate_map_findings);
        validators.insert(ids::REDUCE_SYNTHESIS, validate_reduce_synthesis);
        validators.insert(ids::CANDIDATE_IDEA, validate_candidate_idea);
        validators.insert(ids::SUGGESTIONS, validate_suggestions);
        validators.insert(ids::REFINED_IDEA, validate_refined_idea);
        validators.insert(ids::MATURITY, validate_maturity);
        SchemaRegistry { validators }
    }

    pub fn contains(&self, schema_id: &str) -> bool {
        self.validators.contains_key(schema_id)
    }

    pub fn validate(&self, schema_id: &str, value: &Value) -> Result<(), String> {
        match self.validators.get(schema_id) {
            Some(v) => v(value),
            None => Err(format!("unregistered schema `{schema_id}`")),
        }
    }
}

fn object<'v>(value: &'v Value) -> Result<&'v serde_json::Map<String, Value>, String> {
    value.as_object().ok_or_else(|| "expected a JSON object".to_string())
}

fn nonempty_str(map: &serde_json::Map<String, Value>, field: &str) -> Result<(), String> {
    match map.get(field).and_then(Value::as_str) {
        Some(s) if !s.trim().is_empty() => Ok(()),
        Some(_) => Err(format!("field `{field}` must be non-empty")),
        None => Err(format!("missing string field `{field}`")),
    }
}

fn string_array(
    map: &serde_json::Map<String, Value>,
    field: &str,
    min_len: usize,
    allow_empty_items: bool,
) -> Result<(), String> {
    let arr = map
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing array field `{field}`"))?;
    if arr.len() < min_len {
        return Err(format!("field `{field}` must have at least {min_len} item(s)"));
    }
    for (i, item) in arr.iter().enumerate() {
        match item.as_str() {
            Some(s) if allow_empty_items || !s.trim().is_empty() => {}
            Some(_) => return Err(format!("`{field}[{i}]` must be non-empty")),
            None => return Err(format!("`{field}[{i}]` must be a string")),
        }
    }
    Ok(())
}

fn validate_domain_label(value: &Value) -> Result<(), String> {
    nonempty_str(object(value)?, "label")
}

fn validate_domain_merge(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    let mapping = map
        .get("mapping")
        .and_then(Value::as_object)
        .ok_or_else(|| "missing object field `mapping`".to_string())?;
    for (raw, unified) in mapping {
        match unified.as_str() {
            Some(s) if !s.trim().is_empty() => {}
            _ => return Err(format!("mapping for `{raw}` must be a non-empty string")),
        }
    }
    Ok(())
}

fn validate_paper_summary(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    nonempty_str(map, "background")?;
    nonempty_str(map, "problem")?;
    nonempty_str(map, "design")
}

fn validate_entity_extraction(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    string_array(map, "problems", 1, false)?;
    string_array(map, "methods", 1, false)
}

fn validate_ref_method(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    nonempty_str(map, "method_name")?;
    nonempty_str(map, "summary")
}

fn validate_community_report(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    nonempty_str(map, "title")?;
    nonempty_str(map, "summary")
}

fn validate_score(entry: &serde_json::Map<String, Value>, field: &str) -> Result<(), String> {
    match entry.get(field).and_then(Value::as_f64) {
        Some(s) if (0.0..=100.0).contains(&s) => Ok(()),
        Some(s) => Err(format!("`{field}` = {s} outside [0, 100]")),
        None => Err(format!("missing numeric field `{field}`")),
    }
}

fn validate_map_findings(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    let findings = map
        .get("findings")
        .and_then(Value::as_array)
        .ok_or_else(|| "missing array field `findings`".to_string())?;
    for (i, finding) in findings.iter().enumerate() {
        let entry = finding
            .as_object()
            .ok_or_else(|| format!("`findings[{i}]` must be an object"))?;
        nonempty_str(entry, "method").map_err(|e| format!("findings[{i}]: {e}"))?;
        validate_score(entry, "score").map_err(|e| format!("findings[{i}]: {e}"))?;
        string_array(entry, "provenance", 0, false).map_err(|e| format!("findings[{i}]: {e}"))?;
    }
    Ok(())
}

fn validate_reduce_synthesis(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    let methods = map
        .get("methods")
        .and_then(Value::as_array)
        .ok_or_else(|| "missing array field `methods`".to_string())?;
    for (i, method) in methods.iter().enumerate() {
        let entry = method
            .as_object()
            .ok_or_else(|| format!("`methods[{i}]` must be an object"))?;
        nonempty_str(entry, "name").map_err(|e| format!("methods[{i}]: {e}"))?;
        if entry.get("orientation").and_then(Value::as_str).is_none() {
            return Err(format!("methods[{i}]: missing string field `orientation`"));
        }
        validate_score(entry, "relevance").map_err(|e| format!("methods[{i}]: {e}"))?;
        string_array(entry, "provenance", 0, false).map_err(|e| format!("methods[{i}]: {e}"))?;
    }
    Ok(())
}

fn validate_candidate_idea(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    nonempty_str(map, "title")?;
    nonempty_str(map, "design")?;
    string_array(map, "tasks", 1, false)?;
    string_array(map, "challenges", 1, false)?;
    nonempty_str(map, "reasoning")
}

fn validate_suggestions(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    let suggestions = map
        .get("suggestions")
        .and_then(Value::as_array)
        .ok_or_else(|| "missing array field `suggestions`".to_string())?;
    if suggestions.is_empty() {
        return Err("`suggestions` must have at least 1 item".to_string());
    }
    for (i, suggestion) in suggestions.iter().enumerate() {
        let entry = suggestion
            .as_object()
            .ok_or_else(|| format!("`suggestions[{i}]` must be an object"))?;
        if entry.get("challenge_index").and_then(Value::as_u64).is_none() {
            return Err(format!("suggestions[{i}]: missing integer `challenge_index`"));
        }
        nonempty_str(entry, "text").map_err(|e| format!("suggestions[{i}]: {e}"))?;
    }
    Ok(())
}

fn validate_refined_idea(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    nonempty_str(map, "design")?;
    string_array(map, "challenges", 0, false)?;
    string_array(map, "tasks", 1, false)
}

fn validate_maturity(value: &Value) -> Result<(), String> {
    let map = object(value)?;
    if map.get("verdict").and_then(Value::as_bool).is_none() {
        return Err("missing boolean field `verdict`".to_string());
    }
    nonempty_str(map, "rationale")
}

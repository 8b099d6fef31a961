//! Reading `{"Analysis": ..., "Decision": [...]}` replies.
//!
//! Model replies are often almost-JSON: LaTeX backslashes inside strings and
//! trailing commas copied from the template. Both are repaired before giving
//! up on a candidate object.

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub analysis: String,
    pub decision: Vec<f64>,
}

/// Byte ranges of balanced `{...}` blocks, in order of their opening brace.
fn candidate_objects(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for start in (0..bytes.len()).filter(|&i| bytes[i] == b'{') {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match (escaped, b) {
                    (true, _) => escaped = false,
                    (false, b'\\') => escaped = true,
                    (false, b'"') => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        out.push(&text[start..=i]);
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Doubles backslashes that do not start a valid JSON escape.
fn escape_stray_backslashes(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut i = 0;
    let mut in_string = false;
    while i < chars.len() {
        let c = chars[i];
        if !in_string {
            if c == '"' {
                in_string = true;
            }
            out.push(c);
            i += 1;
            continue;
        }
        match c {
            '"' => {
                in_string = false;
                out.push(c);
                i += 1;
            }
            '\\' => {
                let next = chars.get(i + 1).copied();
                let valid = match next {
                    Some('"' | '\\' | '/' | 'b' | 'f' | 'n' | 'r' | 't') => true,
                    Some('u') => chars.len() > i + 5 && chars[i + 2..i + 6].iter().all(|h| h.is_ascii_hexdigit()),
                    _ => false,
                };
                if valid {
                    out.push('\\');
                    out.push(next.unwrap());
                    i += 2;
                } else {
                    out.push_str("\\\\");
                    i += 1;
                }
            }
            '\n' => {
                out.push_str("\\n");
                i += 1;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// Drops commas directly before `}` or `]`, outside strings.
fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn parse_object(candidate: &str) -> Option<Value> {
    serde_json::from_str::<Value>(candidate).ok().or_else(|| {
        let repaired = strip_trailing_commas(&escape_stray_backslashes(candidate));
        serde_json::from_str::<Value>(&repaired).ok()
    })
}

fn extract(v: &Value) -> Option<Result<Decision>> {
    let obj = v.as_object()?;
    let analysis = obj.get("Analysis")?;
    let decision = obj.get("Decision")?;
    let analysis = match analysis {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let Some(items) = decision.as_array() else {
        return Some(Err(Error::Parse("\"Decision\" is not an array".into())));
    };
    let mut values = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        match item.as_f64() {
            Some(x) if x.is_finite() => values.push(x),
            _ => return Some(Err(Error::Parse(format!("decision entry {index} is not a number: {item}")))),
        }
    }
    Some(Ok(Decision {
        analysis,
        decision: values,
    }))
}

/// First object in `text` carrying both fields, without range checks.
pub fn parse_decision_raw(text: &str) -> Result<Decision> {
    for candidate in candidate_objects(text) {
        if let Some(found) = parse_object(candidate).as_ref().and_then(extract) {
            return found;
        }
    }
    Err(Error::Parse(
        "no JSON object with both \"Analysis\" and \"Decision\" found in the reply".into(),
    ))
}

/// Parses a reply whose decision is `arity` probabilities.
pub fn parse_decision(text: &str, arity: usize) -> Result<Decision> {
    let d = parse_decision_raw(text)?;
    if d.decision.len() != arity {
        return Err(Error::Arity {
            expected: arity,
            found: d.decision.len(),
        });
    }
    if let Some((index, &value)) = d.decision.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange { index, value });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_object() {
        let d = parse_decision(r#"{"Analysis": "ok", "Decision": [0.5, 1]}"#, 2).unwrap();
        assert_eq!(d.decision, vec![0.5, 1.0]);
        assert_eq!(d.analysis, "ok");
    }

    #[test]
    fn prose_and_template_comma() {
        let text = "Sure.\n{\n    \"Analysis\": \"a {b} c\", \n    \"Decision\": [0, 1],\n}\nDone.";
        assert_eq!(parse_decision(text, 2).unwrap().decision, vec![0.0, 1.0]);
    }

    #[test]
    fn latex_escapes() {
        let text = r#"{"Analysis": "$\varphi(\sigma=1 \mid s)$ \n ok \ n", "Decision": [0.25, 0.75]}"#;
        let d = parse_decision(text, 2).unwrap();
        assert!(d.analysis.contains("\\varphi"));
        assert!(d.analysis.contains('\n'));
    }

    #[test]
    fn skips_unrelated_objects() {
        let text = r#"{"note": 1} then {"Analysis": "x", "Decision": [1, 0]}"#;
        assert_eq!(parse_decision(text, 2).unwrap().decision, vec![1.0, 0.0]);
    }

    #[test]
    fn range_and_arity() {
        let err = parse_decision(r#"{"Analysis": "", "Decision": [1.2, 0.5]}"#, 2).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { index: 0, .. }));
        let err = parse_decision(r#"{"Analysis": "", "Decision": [0.5]}"#, 2).unwrap_err();
        assert!(matches!(err, Error::Arity { expected: 2, found: 1 }));
    }

    #[test]
    fn nothing_to_parse() {
        assert!(matches!(parse_decision("I refuse.", 2), Err(Error::Parse(_))));
        assert!(matches!(parse_decision(r#"{"Decision": [0, 1]}"#, 2), Err(Error::Parse(_))));
    }

    #[test]
    fn render_and_reparse() {
        for v in [vec![0.499, 1.0], vec![0.1 + 0.2, 1.0 / 3.0]] {
            let text = format!(
                "{{\n    \"Analysis\": \"x\", \n    \"Decision\": [{}],\n}}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            );
            assert_eq!(parse_decision(&text, 2).unwrap().decision, v);
        }
    }
}

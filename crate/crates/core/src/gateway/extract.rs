use serde_json::Value;

use crate::error::GatewayError;

/// Returns the first well-formed JSON object in `raw`.
///
/// Fenced blocks are tried first, then every `{` in the text in order, so
/// prose before or after the payload is ignored.
pub fn extract_json(raw: &str) -> Result<Value, GatewayError> {
    for block in fenced_blocks(raw) {
        if let Some(v) = first_object(block) {
            return Ok(v);
        }
    }
    first_object(raw).ok_or(GatewayError::Parse)
}

fn first_object(text: &str) -> Option<Value> {
    text.char_indices()
        .filter(|(_, c)| *c == '{')
        .find_map(|(i, _)| {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            match stream.next() {
                Some(Ok(v @ Value::Object(_))) => Some(v),
                _ => None,
            }
        })
}

/// Contents of ``` fenced blocks, with any language tag dropped.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |n| n + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                out.push(body);
                break;
            }
        }
    }
    out
}

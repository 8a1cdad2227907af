use serde::Serialize;
use thiserror::Error;

use super::template::OutputSchema;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredAnswer {
    pub reasoning: String,
    pub answer: serde_json::Value,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExtractError {
    #[error("no JSON object found in response")]
    NoJsonFound,
    #[error("answer does not match schema: {0}")]
    SchemaMismatch(String),
}

/// Splits a response into reasoning text and the last top-level JSON object.
///
/// Objects nested inside another object are not candidates. Text outside the
/// chosen object, minus code-fence markers, becomes the reasoning; if that is
/// empty and the object has a string `reasoning` field, that is used instead.
pub fn extract_structured(text: &str, schema: &OutputSchema) -> Result<StructuredAnswer, ExtractError> {
    let (start, end, answer) = last_object(text).ok_or(ExtractError::NoJsonFound)?;
    schema.validate(&answer).map_err(ExtractError::SchemaMismatch)?;

    let mut reasoning = strip_fences(&format!("{}\n{}", &text[..start], &text[end..]));
    if reasoning.is_empty() {
        if let Some(r) = answer.get("reasoning").and_then(|r| r.as_str()) {
            reasoning = r.trim().to_string();
        }
    }
    Ok(StructuredAnswer { reasoning, answer })
}

fn last_object(text: &str) -> Option<(usize, usize, serde_json::Value)> {
    let mut found = None;
    let mut pos = 0;
    while let Some(offset) = text[pos..].find('{') {
        let start = pos + offset;
        let mut stream =
            serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(value)) if value.is_object() => {
                let end = start + stream.byte_offset();
                found = Some((start, end, value));
                pos = end;
            }
            _ => pos = start + 1,
        }
    }
    found
}

fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Production,
    Demand,
    Supply,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Production => "production",
            Category::Demand => "demand",
            Category::Supply => "supply",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "production" => Some(Category::Production),
            "demand" => Some(Category::Demand),
            "supply" => Some(Category::Supply),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One passage's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub affected: u8,
    pub categories: BTreeSet<Category>,
    pub tags: Vec<String>,
    pub raw_output: String,
}

impl Classification {
    pub fn unaffected(raw_output: &str) -> Self {
        Self {
            affected: 0,
            categories: BTreeSet::new(),
            tags: Vec::new(),
            raw_output: raw_output.to_string(),
        }
    }

    /// Lowercase, trim and deduplicate tags; a zero score carries no
    /// categories or tags.
    pub fn normalized(mut self) -> Self {
        let mut tags: Vec<String> = Vec::new();
        for t in self.tags.iter().map(|t| t.trim().to_lowercase()) {
            if !t.is_empty() && !tags.contains(&t) {
                tags.push(t);
            }
        }
        self.tags = tags;
        if self.affected == 0 {
            self.categories.clear();
            self.tags.clear();
        }
        self
    }

    /// Output in the same shape the model is asked to produce.
    pub fn render(&self) -> String {
        let cats: Vec<&str> = self.categories.iter().map(|c| c.as_str()).collect();
        format!(
            "{{\"affected\": {}, \"affectedness_category\": {}, \"tags\": {}}}",
            self.affected,
            Value::String(cats.join(", ")),
            Value::String(self.tags.join(", ")),
        )
    }
}

fn split_list(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::String(s)) => s.split(',').map(str::to_string).collect(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|i| i.as_str().map(str::to_string))
            .collect(),
        _ => Vec::new(),
    }
}

fn parse_object(raw: &str, body: &str) -> Result<Classification, String> {
    let value: Value = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("output is not a JSON object")?;
    let affected = match obj.get("affected") {
        Some(Value::Number(n)) => n.as_u64(),
        Some(Value::String(s)) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or("missing or non-integer `affected`")?;
    if affected > 3 {
        return Err(format!("`affected` {affected} outside 0..3"));
    }
    let mut categories = BTreeSet::new();
    for c in split_list(obj.get("affectedness_category")) {
        if c.trim().is_empty() {
            continue;
        }
        match Category::parse(&c) {
            Some(cat) => {
                categories.insert(cat);
            }
            None => warn!(category = %c.trim(), "dropping unknown affectedness category"),
        }
    }
    Ok(Classification {
        affected: affected as u8,
        categories,
        tags: split_list(obj.get("tags")),
        raw_output: raw.to_string(),
    }
    .normalized())
}

/// Parse a model completion. Two truncations caused by the stop sequences
/// are repaired: a bare `{"affected": ` (the score `0` was the stop) reads as
/// unaffected, and a missing closing brace is supplied.
pub fn parse_model_output(raw: &str) -> Result<Classification, ClassifyError> {
    let fail = |message: String| ClassifyError::Parse {
        raw: raw.to_string(),
        message,
    };
    let start = raw.find('{').ok_or_else(|| fail("no JSON object".into()))?;
    let body = raw[start..].trim();
    let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "{\"affected\":" {
        return Ok(Classification::unaffected(raw));
    }
    match parse_object(raw, body) {
        Ok(c) => Ok(c),
        Err(first) if !body.ends_with('}') => {
            parse_object(raw, &format!("{body}}}")).map_err(|_| fail(first))
        }
        Err(e) => Err(fail(e)),
    }
}

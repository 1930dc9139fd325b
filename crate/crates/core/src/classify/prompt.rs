use super::ClassifyError;

/// Few-shot instruction template; `PLACEHOLDER` marks where the passage goes.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");
pub const PLACEHOLDER: &str = "<Input paragraph>";

/// The template with the placeholder replaced by `paragraph`. Nothing else
/// is substituted.
pub fn build_prompt(paragraph: &str) -> Result<String, ClassifyError> {
    build_prompt_from(PROMPT_TEMPLATE, paragraph)
}

pub fn build_prompt_from(template: &str, paragraph: &str) -> Result<String, ClassifyError> {
    if paragraph.trim().is_empty() {
        return Err(ClassifyError::EmptyParagraph);
    }
    if !template.contains(PLACEHOLDER) {
        return Err(ClassifyError::Template(format!("template lacks {PLACEHOLDER:?}")));
    }
    // Substitute the last occurrence: the template's trailing slot.
    let at = template.rfind(PLACEHOLDER).expect("checked above");
    let mut out = String::with_capacity(template.len() + paragraph.len());
    out.push_str(&template[..at]);
    out.push_str(paragraph);
    out.push_str(&template[at + PLACEHOLDER.len()..]);
    Ok(out)
}

/// The worked examples embedded in the template as `(passage, output)`
/// pairs, with the passage's surrounding quotes removed.
pub fn template_examples(template: &str) -> Vec<(String, String)> {
    let lines: Vec<&str> = template.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let Some(input) = line.strip_prefix("Input: ") else {
            continue;
        };
        let Some(quoted) = input.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
            continue;
        };
        let output = lines[i + 1..]
            .iter()
            .find(|l| !l.trim().is_empty())
            .and_then(|l| l.strip_prefix("Output: "));
        if let Some(output) = output {
            out.push((quoted.to_string(), output.trim().to_string()));
        }
    }
    out
}

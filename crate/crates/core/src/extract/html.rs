use ego_tree::iter::Edge;
use scraper::{Html, Node};

const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "template", "head", "svg", "iframe", "object",
];

const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "caption", "center", "dd", "details",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3",
    "h4", "h5", "h6", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section",
    "summary", "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul",
];

fn flush(buf: &mut String, out: &mut Vec<String>) {
    let text = buf.split_whitespace().collect::<Vec<_>>().join(" ");
    if !text.is_empty() {
        out.push(text);
    }
    buf.clear();
}

/// Plain-text blocks of an HTML document in document order. Every block-level
/// element boundary ends the current block, so text directly inside a `div`
/// forms its own block separate from nested paragraphs.
pub fn extract_paragraphs(body: &str) -> Vec<String> {
    let doc = Html::parse_document(body);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut skip_depth = 0usize;
    for edge in doc.tree.root().traverse() {
        match edge {
            Edge::Open(node) => match node.value() {
                Node::Element(el) => {
                    let name = el.name();
                    if skip_depth > 0 || SKIPPED.contains(&name) {
                        skip_depth += 1;
                    } else if BLOCKS.contains(&name) {
                        flush(&mut buf, &mut out);
                    } else if name == "br" {
                        buf.push(' ');
                    }
                }
                Node::Text(t) if skip_depth == 0 => buf.push_str(t),
                _ => {}
            },
            Edge::Close(node) => {
                if let Node::Element(el) = node.value() {
                    if skip_depth > 0 {
                        skip_depth -= 1;
                    } else if BLOCKS.contains(&el.name()) {
                        flush(&mut buf, &mut out);
                    }
                }
            }
        }
    }
    flush(&mut buf, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scripts_and_comments_removed() {
        assert_eq!(
            extract_paragraphs("<p>Hello</p><script>x</script><p>World</p>"),
            ["Hello", "World"]
        );
        assert_eq!(extract_paragraphs("<p>a<!-- hidden -->b</p>"), ["ab"]);
        assert_eq!(
            extract_paragraphs("<html><head><title>T</title><style>p{}</style></head><body><p>x</p></body></html>"),
            ["x"]
        );
    }

    #[test]
    fn div_direct_text_is_its_own_block() {
        assert_eq!(extract_paragraphs("<div>A<p>B</p></div>"), ["A", "B"]);
        assert_eq!(extract_paragraphs("<div>A<p>B</p>C</div>"), ["A", "B", "C"]);
    }

    #[test]
    fn inline_and_whitespace() {
        assert_eq!(
            extract_paragraphs("<p>  Due to <b>COVID-19</b>,\n  we&nbsp;are &amp; remain<br>closed. </p>"),
            ["Due to COVID-19, we are & remain closed."]
        );
        assert_eq!(extract_paragraphs("<ul><li>one</li><li>two</li></ul><h2>three</h2>"), ["one", "two", "three"]);
        assert_eq!(extract_paragraphs("<table><tr><td>a</td><td>b</td></tr></table>"), ["a", "b"]);
    }

    #[test]
    fn empty_and_malformed() {
        assert!(extract_paragraphs("").is_empty());
        assert_eq!(extract_paragraphs("<p>unclosed <div>x"), ["unclosed", "x"]);
        assert_eq!(extract_paragraphs("plain text"), ["plain text"]);
    }

    fn html_fragment() -> impl Strategy<Value = String> {
        let leaf = "[a-zA-Z0-9 ]{0,8}".prop_map(|s| s);
        leaf.prop_recursive(3, 24, 4, |inner| {
            (
                prop::sample::select(vec!["p", "div", "span", "b", "li", "script", "td", "h3"]),
                prop::collection::vec(inner, 0..4),
            )
                .prop_map(|(tag, kids)| format!("<{tag}>{}</{tag}>", kids.concat()))
        })
    }

    fn strip_tags_and_scripts(html: &str) -> String {
        let mut s = html.to_string();
        while let Some(start) = s.find("<script>") {
            let end = s[start..].find("</script>").map_or(s.len(), |i| start + i + 9);
            s.replace_range(start..end, "");
        }
        let mut out = String::new();
        let mut in_tag = false;
        for c in s.chars() {
            match c {
                '<' => in_tag = true,
                '>' => in_tag = false,
                c if !in_tag && !c.is_whitespace() => out.push(c),
                _ => {}
            }
        }
        out
    }

    proptest! {
        #[test]
        fn output_is_subsequence_of_stripped_input(html in html_fragment()) {
            let blocks = extract_paragraphs(&html);
            let got: String = blocks.concat().chars().filter(|c| !c.is_whitespace()).collect();
            let want = strip_tags_and_scripts(&html);
            let mut it = want.chars();
            prop_assert!(got.chars().all(|c| it.any(|w| w == c)), "{got:?} vs {want:?}");
            prop_assert!(blocks.iter().all(|b| !b.trim().is_empty()));
            prop_assert_eq!(blocks, extract_paragraphs(&html));
        }
    }
}

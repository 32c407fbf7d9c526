//! Main-text extraction by block scoring.
//!
//! The document is segmented into text blocks at block-level elements, with
//! script/style/nav/footer/aside subtrees and comments removed first. Each
//! block is scored by length, link density, and punctuation; the best
//! contiguous cluster of scoring blocks becomes the body.

use scraper::node::Node;
use scraper::{Html, Selector};

use super::collapse_ws;

/// Per-block score threshold for cluster membership.
const BLOCK_SCORE_MIN: f64 = 10.0;
/// Minimum cluster score sum below which the page has no body.
const CLUSTER_SCORE_MIN: f64 = 50.0;
/// Punctuation contribution saturates at this count.
const PUNCTUATION_CAP: usize = 20;

const PUNCTUATION: &[char] = &[
    '.', ',', '!', '?', ';', ':', '。', '、', '，', '！', '？', '；', '：',
];

/// One scored text block in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScore {
    /// Whitespace-collapsed text of the block.
    pub block_text: String,
    /// Character count of `block_text`.
    pub text_len: usize,
    /// Linked-character count divided by max(1, total character count),
    /// clamped to [0, 1].
    pub link_density: f64,
    pub punctuation_count: usize,
    /// `text_len * (1 - link_density)^2 * (1 + min(punctuation_count, 20)/20)`.
    pub score: f64,
}

fn is_block_tag(name: &str) -> bool {
    matches!(
        name,
        "address"
            | "article"
            | "blockquote"
            | "body"
            | "dd"
            | "details"
            | "div"
            | "dl"
            | "dt"
            | "fieldset"
            | "figcaption"
            | "figure"
            | "form"
            | "h1"
            | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "header"
            | "hr"
            | "li"
            | "main"
            | "ol"
            | "p"
            | "pre"
            | "section"
            | "table"
            | "td"
            | "th"
            | "tr"
            | "ul"
    )
}

fn is_stripped_tag(name: &str) -> bool {
    matches!(
        name,
        "script" | "style" | "nav" | "footer" | "aside" | "noscript" | "template"
    )
}

#[derive(Default)]
struct Segmenter {
    blocks: Vec<BlockScore>,
    text: String,
    linked_chars: usize,
}

impl Segmenter {
    fn push_text(&mut self, text: &str, in_link: bool) {
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        self.text.push_str(text);
        if in_link {
            self.linked_chars += collapse_ws(text).chars().count();
        }
    }

    fn flush(&mut self) {
        let block_text = collapse_ws(&self.text);
        self.text.clear();
        let linked = std::mem::take(&mut self.linked_chars);
        if block_text.is_empty() {
            return;
        }
        let text_len = block_text.chars().count();
        let link_density = (linked as f64 / text_len.max(1) as f64).min(1.0);
        let punctuation_count = block_text.chars().filter(|c| PUNCTUATION.contains(c)).count();
        let score = text_len as f64
            * (1.0 - link_density).powi(2)
            * (1.0 + punctuation_count.min(PUNCTUATION_CAP) as f64 / PUNCTUATION_CAP as f64);
        self.blocks.push(BlockScore {
            block_text,
            text_len,
            link_density,
            punctuation_count,
            score,
        });
    }

    fn walk(&mut self, node: ego_tree::NodeRef<'_, Node>, in_link: bool) {
        match node.value() {
            Node::Element(el) => {
                let name = el.name();
                if is_stripped_tag(name) {
                    return;
                }
                let block = is_block_tag(name);
                if block {
                    self.flush();
                }
                let in_link = in_link || name == "a";
                for child in node.children() {
                    self.walk(child, in_link);
                }
                if block {
                    self.flush();
                }
            }
            Node::Text(text) => self.push_text(&text.text, in_link),
            Node::Document | Node::Fragment => {
                for child in node.children() {
                    self.walk(child, in_link);
                }
            }
            // Comments, doctype, processing instructions carry no content.
            _ => {}
        }
    }
}

/// Segments the document into scored text blocks in document order.
pub fn score_blocks(html: &[u8]) -> Vec<BlockScore> {
    let doc = Html::parse_document(&String::from_utf8_lossy(html));
    let body_sel = Selector::parse("body").unwrap();
    let mut seg = Segmenter::default();
    if let Some(body) = doc.select(&body_sel).next() {
        seg.walk(*body, false);
    } else {
        seg.walk(doc.tree.root(), false);
    }
    seg.flush();
    seg.blocks
}

/// Concatenated text of the highest-scoring contiguous cluster of blocks;
/// empty when nothing scores above the threshold. Deterministic for fixed
/// input and invariant under inserted comments, scripts, and styles.
pub fn extract_body(html: &[u8]) -> String {
    let blocks = score_blocks(html);
    let mut best_range: Option<(usize, usize)> = None;
    let mut best_sum = 0.0f64;
    let mut i = 0;
    while i < blocks.len() {
        if blocks[i].score <= BLOCK_SCORE_MIN {
            i += 1;
            continue;
        }
        let start = i;
        let mut sum = 0.0;
        while i < blocks.len() && blocks[i].score > BLOCK_SCORE_MIN {
            sum += blocks[i].score;
            i += 1;
        }
        if sum > best_sum {
            best_sum = sum;
            best_range = Some((start, i));
        }
    }
    match best_range {
        Some((start, end)) if best_sum >= CLUSTER_SCORE_MIN => blocks[start..end]
            .iter()
            .map(|b| b.block_text.as_str())
            .collect::<Vec<_>>()
            .join("\n"),
        _ => String::new(),
    }
}

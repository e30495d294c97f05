use once_cell::sync::Lazy;
use regex::Regex;

// URLs are ASCII on the platforms we care about; stopping at the first
// non-ASCII scalar keeps CJK text glued to a link intact.
static URL: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)(?:https?://|www\.)[\x21-\x7E]*").expect("url regex"));

static TOPIC: Lazy<Regex> = Lazy::new(|| Regex::new(r"#[^#\n]*#").expect("topic regex"));

// Handles may contain `_` and `-`; any other punctuation, whitespace or
// symbol ends the name.
static USERNAME: Lazy<Regex> = Lazy::new(|| Regex::new(r"@[\w-]*").expect("username regex"));

static PUNCTUATION: Lazy<Regex> = Lazy::new(|| {
    Regex::new(concat!(
        r"[\p{P}",
        r"\x{FF01}-\x{FF0F}\x{FF1A}-\x{FF20}\x{FF3B}-\x{FF40}\x{FF5B}-\x{FF65}",
        r"\x{FFE0}-\x{FFE6}]"
    ))
    .expect("punctuation regex")
});

static WHITESPACE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\s+").expect("whitespace regex"));

/// Strips URLs, `#topic#` spans, `@user` mentions and punctuation, then
/// collapses whitespace to single spaces.
///
/// Punctuation means the Unicode `P*` general categories plus the
/// full-width ASCII-punctuation and currency forms (`＄`, `～`, `￥`, ...).
/// Every removal leaves a space behind so that words on either side of a
/// removed span stay separate tokens. The function is idempotent.
pub fn clean_text(raw: &str) -> String {
    let text = URL.replace_all(raw, " ");
    let text = TOPIC.replace_all(&text, " ");
    let text = USERNAME.replace_all(&text, " ");
    let text = PUNCTUATION.replace_all(&text, " ");
    let text = WHITESPACE.replace_all(&text, " ");
    text.trim().to_string()
}

/// True for characters [`clean_text`] treats as punctuation.
pub fn is_punctuation(c: char) -> bool {
    let mut buf = [0u8; 4];
    PUNCTUATION.is_match(c.encode_utf8(&mut buf))
}

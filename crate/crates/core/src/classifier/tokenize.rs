/// Terms dropped from every document.
pub const STOPWORDS: [&str; 18] = [
    "a", "an", "the", "i", "is", "am", "are", "my", "to", "of", "and", "or", "in", "on", "for",
    "this", "that", "it",
];

const MIN_TERM_CHARS: usize = 2;

/// Lowercases, splits on runs of non-alphanumeric characters and drops
/// short tokens and stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= MIN_TERM_CHARS && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

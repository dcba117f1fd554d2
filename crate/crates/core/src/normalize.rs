/// Case-folds and collapses runs of whitespace, trimming both ends.
///
/// Every name the service compares (GN divisions, streets, vocabulary
/// tokens) goes through this so that `"Chundikul  North"` and
/// `"chundikul north"` are the same key.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_and_whitespace() {
        assert_eq!(normalize("  Chundikul \t North "), "chundikul north");
        assert_eq!(normalize("chundikul north"), normalize("Chundikul  North"));
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("ÄRZTE"), "ärzte");
    }
}

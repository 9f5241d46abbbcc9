//! String similarity primitives used for name-based features.

use std::collections::{BTreeSet, HashMap};

use crate::table::tokenize_name;

/// Jaccard similarity between two token sets.
pub fn token_jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(|s| s.as_str()).collect();
    let sb: BTreeSet<&str> = b.iter().map(|s| s.as_str()).collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    if union == 0.0 { 0.0 } else { inter / union }
}

/// Containment of the smaller token set in the larger one.
pub fn token_containment(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(|s| s.as_str()).collect();
    let sb: BTreeSet<&str> = b.iter().map(|s| s.as_str()).collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let denom = sa.len().min(sb.len()).max(1) as f64;
    inter / denom
}

/// Levenshtein distance.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// 1 - edit/maxlen similarity.
pub fn normalized_edit_similarity(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / max_len as f64
}

/// Jaro similarity.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut matches = 0usize;
    let mut a_matched = Vec::new();
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_used[j] && b[j] == *ca {
                b_used[j] = true;
                matches += 1;
                a_matched.push((i, j));
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    // transpositions: matched characters out of order
    let a_seq: Vec<char> = a_matched.iter().map(|&(i, _)| a[i]).collect();
    let mut b_idx: Vec<usize> = a_matched.iter().map(|&(_, j)| j).collect();
    b_idx.sort_unstable();
    let b_seq: Vec<char> = b_idx.into_iter().map(|j| b[j]).collect();
    let transpositions = a_seq.iter().zip(&b_seq).filter(|(x, y)| x != y).count();
    let t = transpositions as f64 / 2.0;
    let m = matches as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler similarity with the standard prefix scale 0.1 (prefix up to 4).
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let j = jaro(a, b);
    let prefix = a
        .chars()
        .zip(b.chars())
        .take(4)
        .take_while(|(x, y)| x == y)
        .count() as f64;
    (j + prefix * 0.1 * (1.0 - j)).min(1.0)
}

fn trigrams(s: &str) -> HashMap<String, f64> {
    let chars: Vec<char> = s.chars().collect();
    let mut counts = HashMap::new();
    if chars.len() < 3 {
        if !chars.is_empty() {
            *counts.entry(s.to_string()).or_insert(0.0) += 1.0;
        }
        return counts;
    }
    for w in chars.windows(3) {
        let g: String = w.iter().collect();
        *counts.entry(g).or_insert(0.0) += 1.0;
    }
    counts
}

/// Cosine similarity of character-trigram count vectors over lowercase
/// tokenized names. Stand-in for a pre-trained sentence encoder; the slot is
/// pluggable so an external pair-score file can override it.
pub fn trigram_cosine(a: &str, b: &str) -> f64 {
    let na = tokenize_name(a).join(" ");
    let nb = tokenize_name(b).join(" ");
    if na == nb {
        return if na.is_empty() { 0.0 } else { 1.0 };
    }
    let ta = trigrams(&na);
    let tb = trigrams(&nb);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let dot: f64 = ta
        .iter()
        .filter_map(|(g, ca)| tb.get(g).map(|cb| ca * cb))
        .sum();
    let norm_a: f64 = ta.values().map(|c| c * c).sum::<f64>().sqrt();
    let norm_b: f64 = tb.values().map(|c| c * c).sum::<f64>().sqrt();
    (dot / (norm_a * norm_b)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaro_winkler_basics() {
        assert!((jaro_winkler("abc", "abc") - 1.0).abs() < 1e-12);
        assert_eq!(jaro_winkler("abc", "xyz"), 0.0);
        // classic reference value
        let jw = jaro_winkler("martha", "marhta");
        assert!((jw - 0.9611111111).abs() < 1e-6, "got {jw}");
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert!((normalized_edit_similarity("abc", "abc") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trigram_cosine_examples() {
        assert_eq!(trigram_cosine("customer", "customer"), 1.0);
        assert_eq!(trigram_cosine("abc", "xyz"), 0.0);
        let s = trigram_cosine("customer", "customers");
        assert!(s > 0.8 && s < 1.0, "got {s}");
    }

    #[test]
    fn token_jaccard_disjoint() {
        let a = tokenize_name("abc");
        let b = tokenize_name("xyz");
        assert_eq!(token_jaccard(&a, &b), 0.0);
    }
}

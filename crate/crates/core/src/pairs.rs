//! Lexicographic enumeration of unordered item pairs `(i, j)`, `i < j`.
//!
//! Every pair-indexed structure in the crate (co-interest counts, feature
//! columns, hybrid scores) uses this one ordering over catalog indices.

pub fn pair_count(items: usize) -> usize {
    items * items.saturating_sub(1) / 2
}

/// Position of the pair `{i, j}` among all pairs of `items` elements.
///
/// Panics if `i == j` or either index is out of range.
pub fn pair_index(i: usize, j: usize, items: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    assert!(i != j && j < items, "invalid pair ({i}, {j}) for {items} items");
    // pairs whose first element precedes i, then the offset within row i
    i * (2 * items - i - 1) / 2 + (j - i - 1)
}

pub fn pairs(items: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..items).flat_map(move |i| (i + 1..items).map(move |j| (i, j)))
}

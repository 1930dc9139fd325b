use std::collections::BTreeSet;

/// |A∩B| / |A∪B|; two empty sets count as identical.
pub fn jaccard_overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// `(changes, analyzed)` for one firm's per-snapshot digest sets in snapshot
/// order. `None` marks a snapshot where the firm was not captured; such
/// snapshots are skipped and adjacency is taken between captured ones.
pub fn heartbeat_counts<T: Ord>(digests: &[Option<BTreeSet<T>>]) -> (usize, usize) {
    let present: Vec<&BTreeSet<T>> = digests.iter().flatten().collect();
    let changes = present.windows(2).filter(|w| w[0] != w[1]).count();
    (changes, present.len())
}

/// Changes divided by analyzed crawls (not by transitions); 0 when nothing
/// was analyzed.
pub fn heartbeat_ratio(changes: usize, analyzed: usize) -> f64 {
    if analyzed == 0 {
        0.0
    } else {
        changes as f64 / analyzed as f64
    }
}

pub fn content_heartbeat<T: Ord>(digests: &[Option<BTreeSet<T>>]) -> f64 {
    let (changes, analyzed) = heartbeat_counts(digests);
    heartbeat_ratio(changes, analyzed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard_overlap(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard_overlap(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard_overlap(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard_overlap(&set(&[]), &set(&[])), 1.0);
    }

    #[test]
    fn heartbeat_examples() {
        assert_eq!(heartbeat_ratio(18, 24), 0.75);
        let constant: Vec<_> = (0..24).map(|_| Some(set(&["X"]))).collect();
        assert_eq!(content_heartbeat(&constant), 0.0);
        assert_eq!(content_heartbeat(&[Some(set(&["X"]))]), 0.0);
        let seq = [Some(set(&["A"])), None, Some(set(&["B"])), Some(set(&["B"]))];
        assert_eq!(heartbeat_counts(&seq), (1, 3));
    }

    fn digest_seq() -> impl Strategy<Value = Vec<Option<BTreeSet<u8>>>> {
        prop::collection::vec(
            prop::option::of(prop::collection::btree_set(0u8..4, 0..3)),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_identity(
            a in prop::collection::btree_set(0u8..8, 0..6),
            b in prop::collection::btree_set(0u8..8, 0..6),
        ) {
            let ab = jaccard_overlap(&a, &b);
            prop_assert_eq!(ab, jaccard_overlap(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b);
        }

        #[test]
        fn heartbeat_ignores_absent_snapshots(seq in digest_seq(), extra in 0usize..5) {
            let mut padded = seq.clone();
            padded.extend(std::iter::repeat_n(None, extra));
            prop_assert_eq!(content_heartbeat(&seq), content_heartbeat(&padded));
            let h = content_heartbeat(&seq);
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }
}

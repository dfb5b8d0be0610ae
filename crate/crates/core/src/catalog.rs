//! Offline 1-gram and 2-gram edge-label statistics.
//!
//! Counting is exact, not sampled. 2-grams are stored sparsely: only
//! predicate pairs with at least one joinable triple pair appear.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::store::{NodeId, PredId, TripleStore};

/// Which positions of two triples are equated.
///
/// `p1`'s role comes first: `Os` means `p1`'s object joins `p2`'s subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JoinType {
    Ss,
    So,
    Os,
    Oo,
}

impl JoinType {
    pub const ALL: [JoinType; 4] = [JoinType::Ss, JoinType::So, JoinType::Os, JoinType::Oo];

    pub fn as_str(self) -> &'static str {
        match self {
            JoinType::Ss => "ss",
            JoinType::So => "so",
            JoinType::Os => "os",
            JoinType::Oo => "oo",
        }
    }

    pub fn parse(s: &str) -> Option<JoinType> {
        match s {
            "ss" => Some(JoinType::Ss),
            "so" => Some(JoinType::So),
            "os" => Some(JoinType::Os),
            "oo" => Some(JoinType::Oo),
            _ => None,
        }
    }

    /// The same statistic with the predicate order flipped.
    pub fn flip(self) -> JoinType {
        match self {
            JoinType::Ss => JoinType::Ss,
            JoinType::So => JoinType::Os,
            JoinType::Os => JoinType::So,
            JoinType::Oo => JoinType::Oo,
        }
    }
}

/// Per-predicate triple count and role-distinct node counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneGram {
    pub count: u64,
    pub d_subj: u64,
    pub d_obj: u64,
}

/// Join statistics for an ordered predicate pair at one join type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoGram {
    /// Triple pairs (t1 of p1, t2 of p2) agreeing on the joined positions.
    pub pair_count: u64,
    /// Distinct join-key nodes realizing at least one pair.
    pub key_count: u64,
}

/// Which sides of a scan pattern are constrained by earlier bindings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    None,
    Subject,
    Object,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogError {
    Parse { line: usize, reason: String },
}

impl fmt::Display for CatalogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogError::Parse { line, reason } => {
                write!(f, "catalog parse error on line {line}: {reason}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    onegrams: BTreeMap<PredId, OneGram>,
    twograms: BTreeMap<(PredId, PredId, JoinType), TwoGram>,
    total_triples: u64,
}

impl Catalog {
    /// Exact offline counting pass over the whole store.
    pub fn build(store: &TripleStore) -> Catalog {
        // Per predicate: subject -> #triples and object -> #triples.
        let mut subj: BTreeMap<PredId, BTreeMap<NodeId, u64>> = BTreeMap::new();
        let mut obj: BTreeMap<PredId, BTreeMap<NodeId, u64>> = BTreeMap::new();
        let mut counts: BTreeMap<PredId, u64> = BTreeMap::new();
        for t in store.triples() {
            *counts.entry(t.p).or_default() += 1;
            *subj.entry(t.p).or_default().entry(t.s).or_default() += 1;
            *obj.entry(t.p).or_default().entry(t.o).or_default() += 1;
        }
        let mut onegrams = BTreeMap::new();
        let mut total = 0u64;
        for (&p, &count) in &counts {
            total += count;
            onegrams.insert(
                p,
                OneGram {
                    count,
                    d_subj: subj[&p].len() as u64,
                    d_obj: obj[&p].len() as u64,
                },
            );
        }
        let mut twograms = BTreeMap::new();
        let preds: Vec<PredId> = counts.keys().copied().collect();
        for &p1 in &preds {
            for &p2 in &preds {
                for jt in JoinType::ALL {
                    let (m1, m2) = match jt {
                        JoinType::Ss => (&subj[&p1], &subj[&p2]),
                        JoinType::So => (&subj[&p1], &obj[&p2]),
                        JoinType::Os => (&obj[&p1], &subj[&p2]),
                        JoinType::Oo => (&obj[&p1], &obj[&p2]),
                    };
                    let mut pairs = 0u64;
                    let mut keys = 0u64;
                    let (small, large) = if m1.len() <= m2.len() {
                        (m1, m2)
                    } else {
                        (m2, m1)
                    };
                    for (node, &c_small) in small {
                        if let Some(&c_large) = large.get(node) {
                            pairs += c_small * c_large;
                            keys += 1;
                        }
                    }
                    if pairs > 0 {
                        twograms.insert(
                            (p1, p2, jt),
                            TwoGram {
                                pair_count: pairs,
                                key_count: keys,
                            },
                        );
                    }
                }
            }
        }
        Catalog {
            onegrams,
            twograms,
            total_triples: total,
        }
    }

    pub fn total_triples(&self) -> u64 {
        self.total_triples
    }

    pub fn onegram(&self, p: PredId) -> Option<OneGram> {
        self.onegrams.get(&p).copied()
    }

    pub fn onegrams(&self) -> impl Iterator<Item = (PredId, OneGram)> + '_ {
        self.onegrams.iter().map(|(&p, &g)| (p, g))
    }

    pub fn twogram(&self, p1: PredId, p2: PredId, jt: JoinType) -> Option<TwoGram> {
        self.twograms.get(&(p1, p2, jt)).copied()
    }

    pub fn twograms(&self) -> impl Iterator<Item = ((PredId, PredId, JoinType), TwoGram)> + '_ {
        self.twograms.iter().map(|(&k, &g)| (k, g))
    }

    /// Distinct join keys between `p1` and `p2` at `jt`, or `None` when the
    /// join is provably empty (no 2-gram recorded).
    pub fn key_count(&self, p1: PredId, p2: PredId, jt: JoinType) -> u64 {
        self.twogram(p1, p2, jt).map_or(0, |g| g.key_count)
    }

    /// Uniformity-model cardinality estimate for one edge extension.
    pub fn estimate_pattern_cardinality(
        &self,
        p: PredId,
        side: BoundSide,
        bound_set_size: f64,
    ) -> f64 {
        let Some(g) = self.onegram(p) else { return 0.0 };
        let count = g.count as f64;
        let est = match side {
            BoundSide::None => count,
            BoundSide::Subject => bound_set_size * count / g.d_subj as f64,
            BoundSide::Object => bound_set_size * count / g.d_obj as f64,
            BoundSide::Both => bound_set_size * count / (g.d_subj as f64 * g.d_obj as f64),
        };
        est.max(0.0)
    }

    /// TSV dump; predicates are written as dictionary text.
    pub fn to_tsv(&self, store: &TripleStore) -> String {
        let mut out = String::new();
        out.push_str("# agq catalog v1\n");
        out.push_str("# 1G\tpred\tcount\tdsubj\tdobj\n");
        out.push_str("# 2G\tp1\tp2\tjt\tpairs\tkeys\n");
        for (p, g) in &self.onegrams {
            out.push_str(&format!(
                "1G\t{}\t{}\t{}\t{}\n",
                store.pred_text(*p),
                g.count,
                g.d_subj,
                g.d_obj
            ));
        }
        for ((p1, p2, jt), g) in &self.twograms {
            out.push_str(&format!(
                "2G\t{}\t{}\t{}\t{}\t{}\n",
                store.pred_text(*p1),
                store.pred_text(*p2),
                jt.as_str(),
                g.pair_count,
                g.key_count
            ));
        }
        out
    }

    /// Parses a TSV dump back; predicate text is resolved through the
    /// store's dictionary.
    pub fn from_tsv(text: &str, store: &TripleStore) -> Result<Catalog, CatalogError> {
        let err = |line: usize, reason: &str| CatalogError::Parse {
            line,
            reason: String::from(reason),
        };
        let mut cat = Catalog::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let n = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let uint = |s: &str| s.parse::<u64>().ok();
            match f.first().copied() {
                Some("1G") => {
                    if f.len() != 5 {
                        return Err(err(n, "expected 1G pred count dsubj dobj"));
                    }
                    let p = store
                        .pred(f[1])
                        .ok_or_else(|| err(n, "unknown predicate"))?;
                    let (count, d_subj, d_obj) = match (uint(f[2]), uint(f[3]), uint(f[4])) {
                        (Some(a), Some(b), Some(c)) => (a, b, c),
                        _ => return Err(err(n, "non-negative integer expected")),
                    };
                    if count > 0 && (d_subj < 1 || d_subj > count || d_obj < 1 || d_obj > count) {
                        return Err(err(n, "distinct counts out of range"));
                    }
                    cat.total_triples += count;
                    cat.onegrams.insert(
                        p,
                        OneGram {
                            count,
                            d_subj,
                            d_obj,
                        },
                    );
                }
                Some("2G") => {
                    if f.len() != 6 {
                        return Err(err(n, "expected 2G p1 p2 jt pairs keys"));
                    }
                    let p1 = store
                        .pred(f[1])
                        .ok_or_else(|| err(n, "unknown predicate"))?;
                    let p2 = store
                        .pred(f[2])
                        .ok_or_else(|| err(n, "unknown predicate"))?;
                    let jt = JoinType::parse(f[3]).ok_or_else(|| err(n, "bad join type"))?;
                    let (pairs, keys) = match (uint(f[4]), uint(f[5])) {
                        (Some(a), Some(b)) => (a, b),
                        _ => return Err(err(n, "non-negative integer expected")),
                    };
                    if (pairs == 0) != (keys == 0) {
                        return Err(err(n, "pairCount and keyCount must be zero together"));
                    }
                    cat.twograms.insert(
                        (p1, p2, jt),
                        TwoGram {
                            pair_count: pairs,
                            key_count: keys,
                        },
                    );
                }
                _ => return Err(err(n, "expected 1G or 2G record")),
            }
        }
        Ok(cat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::fixtures;

    #[test]
    fn chain_onegrams() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let a = st.pred("A").unwrap();
        let b = st.pred("B").unwrap();
        assert_eq!(
            cat.onegram(a).unwrap(),
            OneGram {
                count: 3,
                d_subj: 3,
                d_obj: 1
            }
        );
        assert_eq!(
            cat.onegram(b).unwrap(),
            OneGram {
                count: 1,
                d_subj: 1,
                d_obj: 1
            }
        );
        assert_eq!(cat.total_triples(), 8);
    }

    #[test]
    fn chain_twogram_a_meets_b() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let a = st.pred("A").unwrap();
        let b = st.pred("B").unwrap();
        let g = cat.twogram(a, b, JoinType::Os).unwrap();
        assert_eq!(
            g,
            TwoGram {
                pair_count: 3,
                key_count: 1
            }
        );
    }

    #[test]
    fn empty_store_empty_catalog() {
        let st = crate::store::TripleStore::load_ntriples("").unwrap();
        let cat = Catalog::build(&st);
        assert_eq!(cat.total_triples(), 0);
        assert_eq!(cat.onegrams().count(), 0);
    }

    #[test]
    fn estimates_on_chain() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let a = st.pred("A").unwrap();
        let b = st.pred("B").unwrap();
        assert_eq!(
            cat.estimate_pattern_cardinality(a, BoundSide::None, 0.0),
            3.0
        );
        assert_eq!(
            cat.estimate_pattern_cardinality(b, BoundSide::Subject, 1.0),
            1.0
        );
        assert_eq!(
            cat.estimate_pattern_cardinality(PredId(99), BoundSide::None, 0.0),
            0.0
        );
    }

    #[test]
    fn twogram_symmetry() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        for ((p1, p2, jt), g) in cat.twograms() {
            let flipped = cat.twogram(p2, p1, jt.flip()).unwrap();
            assert_eq!(g.pair_count, flipped.pair_count);
            assert_eq!(g.key_count, flipped.key_count);
        }
    }

    #[test]
    fn tsv_round_trip() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let tsv = cat.to_tsv(&st);
        let back = Catalog::from_tsv(&tsv, &st).unwrap();
        assert_eq!(cat, back);
    }

    #[test]
    fn tsv_empty_catalog_headers_only() {
        let st = crate::store::TripleStore::load_ntriples("").unwrap();
        let cat = Catalog::build(&st);
        let tsv = cat.to_tsv(&st);
        assert!(tsv.lines().all(|l| l.starts_with('#')));
        assert_eq!(Catalog::from_tsv(&tsv, &st).unwrap(), cat);
    }

    #[test]
    fn tsv_negative_count_rejected() {
        let st = fixtures::g_chain();
        let bad = "1G\tA\t-3\t1\t1\n";
        assert!(Catalog::from_tsv(bad, &st).is_err());
    }
}

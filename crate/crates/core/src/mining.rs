//! Antecedent mining.
//!
//! Antecedents are frequent itemsets over the binary item columns, mined with
//! FP-Growth under a minimum-support and maximum-cardinality constraint. The
//! output is exhaustive, so it is independent of the miner; it is returned in
//! a canonical order (cardinality, then lexicographic item indices) together
//! with a precomputed cover bitset per antecedent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::bitset::Bitset;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Antecedent {
    /// Sorted, duplicate-free item column indices.
    pub items: Vec<usize>,
    pub support_count: usize,
}

impl Antecedent {
    pub fn cardinality(&self) -> usize {
        self.items.len()
    }
}

/// The pre-mined antecedent collection and its covers.
#[derive(Debug, Clone)]
pub struct AntecedentPool {
    antecedents: Vec<Antecedent>,
    covers: Vec<Bitset>,
    by_cardinality: BTreeMap<usize, Vec<usize>>,
    max_cardinality: usize,
    n: usize,
}

/// Observations satisfying every item of `items`.
pub fn cover(items: &[usize], dataset: &Dataset) -> Bitset {
    let mut bits = Bitset::ones(dataset.n());
    for &item in items {
        bits.and_assign(dataset.column(item));
    }
    bits
}

impl AntecedentPool {
    /// Builds a pool from explicit item sets. Item sets are sorted and
    /// deduplicated internally; the given order of antecedents is kept.
    pub fn from_itemsets(dataset: &Dataset, itemsets: Vec<Vec<usize>>) -> Result<Self> {
        let mut antecedents = Vec::with_capacity(itemsets.len());
        let mut covers = Vec::with_capacity(itemsets.len());
        let mut seen = std::collections::BTreeSet::new();
        for mut items in itemsets {
            items.sort_unstable();
            items.dedup();
            if items.is_empty() {
                return Err(Error::InvalidArgument("empty antecedent".into()));
            }
            if let Some(&bad) = items.iter().find(|&&i| i >= dataset.n_items()) {
                return Err(Error::InvalidArgument(format!(
                    "item index {bad} out of range for {} items",
                    dataset.n_items()
                )));
            }
            if !seen.insert(items.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate antecedent {items:?}"
                )));
            }
            let bits = cover(&items, dataset);
            antecedents.push(Antecedent {
                support_count: bits.count_ones(),
                items,
            });
            covers.push(bits);
        }
        Self::assemble(antecedents, covers, dataset.n())
    }

    /// One antecedent per item column, in column order.
    pub fn singletons(dataset: &Dataset) -> Result<Self> {
        Self::from_itemsets(dataset, (0..dataset.n_items()).map(|i| vec![i]).collect())
    }

    fn assemble(antecedents: Vec<Antecedent>, covers: Vec<Bitset>, n: usize) -> Result<Self> {
        if antecedents.is_empty() {
            return Err(Error::InvalidArgument("empty antecedent pool".into()));
        }
        let mut by_cardinality: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, a) in antecedents.iter().enumerate() {
            by_cardinality.entry(a.cardinality()).or_default().push(i);
        }
        let max_cardinality = *by_cardinality.keys().next_back().expect("nonempty");
        Ok(AntecedentPool {
            antecedents,
            covers,
            by_cardinality,
            max_cardinality,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.antecedents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antecedents.is_empty()
    }

    pub fn antecedents(&self) -> &[Antecedent] {
        &self.antecedents
    }

    pub fn antecedent(&self, id: usize) -> &Antecedent {
        &self.antecedents[id]
    }

    pub fn cover(&self, id: usize) -> &Bitset {
        &self.covers[id]
    }

    pub fn cardinality(&self, id: usize) -> usize {
        self.antecedents[id].cardinality()
    }

    pub fn by_cardinality(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.by_cardinality
    }

    pub fn max_cardinality(&self) -> usize {
        self.max_cardinality
    }

    /// Observation count the covers were built over.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `item1 AND item2<TAB>support`, one antecedent per line.
    pub fn dump(&self, dataset: &Dataset) -> String {
        let mut out = String::new();
        for a in &self.antecedents {
            let text: Vec<String> = a
                .items
                .iter()
                .map(|&i| dataset.items()[i].to_string())
                .collect();
            let _ = writeln!(out, "{}\t{}", text.join(" AND "), a.support_count);
        }
        out
    }

    /// Rendered conjunction for one antecedent.
    pub fn describe(&self, id: usize, dataset: &Dataset) -> String {
        self.antecedents[id]
            .items
            .iter()
            .map(|&i| dataset.items()[i].to_string())
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

/// Smallest integer count satisfying `count >= min_support * n`.
pub fn min_support_count(min_support: f64, n: usize) -> usize {
    ((min_support * n as f64) - 1e-9).ceil().max(1.0) as usize
}

// FP-tree with an arena of nodes. Items are renumbered by rank in the global
// frequency order so every transaction is inserted as an increasing rank path.
struct FpTree {
    nodes: Vec<FpNode>,
    // rank -> nodes carrying that rank
    header: Vec<Vec<usize>>,
}

struct FpNode {
    rank: usize,
    count: usize,
    parent: usize,
    children: Vec<usize>,
}

const ROOT: usize = 0;

impl FpTree {
    fn new(n_ranks: usize) -> Self {
        FpTree {
            nodes: vec![FpNode {
                rank: usize::MAX,
                count: 0,
                parent: ROOT,
                children: Vec::new(),
            }],
            header: vec![Vec::new(); n_ranks],
        }
    }

    fn insert(&mut self, path: &[usize], count: usize) {
        let mut at = ROOT;
        for &rank in path {
            let existing = self.nodes[at]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].rank == rank);
            at = match existing {
                Some(child) => {
                    self.nodes[child].count += count;
                    child
                }
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(FpNode {
                        rank,
                        count,
                        parent: at,
                        children: Vec::new(),
                    });
                    self.nodes[at].children.push(id);
                    self.header[rank].push(id);
                    id
                }
            };
        }
    }

    fn support(&self, rank: usize) -> usize {
        self.header[rank].iter().map(|&n| self.nodes[n].count).sum()
    }

    /// Prefix paths (root-to-parent, increasing rank) of every node with
    /// `rank`, weighted by that node's count.
    fn conditional_base(&self, rank: usize) -> Vec<(Vec<usize>, usize)> {
        self.header[rank]
            .iter()
            .map(|&node| {
                let mut path = Vec::new();
                let mut at = self.nodes[node].parent;
                while at != ROOT {
                    path.push(self.nodes[at].rank);
                    at = self.nodes[at].parent;
                }
                path.reverse();
                (path, self.nodes[node].count)
            })
            .collect()
    }

    fn from_base(base: &[(Vec<usize>, usize)], n_ranks: usize, min_count: usize) -> Self {
        let mut counts = vec![0; n_ranks];
        for (path, c) in base {
            for &r in path {
                counts[r] += c;
            }
        }
        let mut tree = FpTree::new(n_ranks);
        let mut filtered = Vec::new();
        for (path, c) in base {
            filtered.clear();
            filtered.extend(path.iter().copied().filter(|&r| counts[r] >= min_count));
            if !filtered.is_empty() {
                tree.insert(&filtered, *c);
            }
        }
        tree
    }
}

/// Mines everything frequent that ends with `rank` (plus the suffix), i.e.
/// the `rank` branch of the FP-Growth recursion.
fn grow(
    tree: &FpTree,
    rank: usize,
    suffix: &[usize],
    min_count: usize,
    max_cardinality: usize,
    out: &mut Vec<(Vec<usize>, usize)>,
) {
    let support = tree.support(rank);
    if support < min_count {
        return;
    }
    let mut itemset = Vec::with_capacity(suffix.len() + 1);
    itemset.push(rank);
    itemset.extend_from_slice(suffix);
    out.push((itemset.clone(), support));
    if itemset.len() >= max_cardinality {
        return;
    }
    let base = tree.conditional_base(rank);
    let cond = FpTree::from_base(&base, rank, min_count);
    for r in (0..rank).rev() {
        if !cond.header[r].is_empty() {
            grow(&cond, r, &itemset, min_count, max_cardinality, out);
        }
    }
}

/// Exhaustive frequent-itemset mining.
///
/// Returns every itemset with `support_count >= ceil(min_support * n)` and at
/// most `max_cardinality` items, in canonical order.
pub fn mine_antecedents(
    dataset: &Dataset,
    min_support: f64,
    max_cardinality: usize,
    exec: Execution,
) -> Result<AntecedentPool> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "min_support must lie in (0, 1], got {min_support}"
        )));
    }
    if max_cardinality == 0 {
        return Err(Error::InvalidArgument(
            "max_cardinality must be at least 1".into(),
        ));
    }
    let n = dataset.n();
    let min_count = min_support_count(min_support, n);

    // Frequent single items, ranked by descending support (ties by index).
    let mut frequent: Vec<(usize, usize)> = (0..dataset.n_items())
        .map(|i| (i, dataset.column(i).count_ones()))
        .filter(|&(_, s)| s >= min_count)
        .collect();
    if frequent.is_empty() {
        return Err(Error::NoFrequentItemsets { min_support });
    }
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let rank_to_item: Vec<usize> = frequent.iter().map(|&(i, _)| i).collect();
    let n_ranks = rank_to_item.len();

    let mut tree = FpTree::new(n_ranks);
    let mut path = Vec::with_capacity(n_ranks);
    for row in 0..n {
        path.clear();
        path.extend((0..n_ranks).filter(|&r| dataset.value(row, rank_to_item[r])));
        if !path.is_empty() {
            tree.insert(&path, 1);
        }
    }

    let branches = par::map_range(exec, n_ranks, |rank| {
        let mut out = Vec::new();
        grow(&tree, rank, &[], min_count, max_cardinality, &mut out);
        out
    });

    let mut found: Vec<(Vec<usize>, usize)> = branches
        .into_iter()
        .flatten()
        .map(|(ranks, support)| {
            let mut items: Vec<usize> = ranks.iter().map(|&r| rank_to_item[r]).collect();
            items.sort_unstable();
            (items, support)
        })
        .collect();
    found.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));

    let covers = par::map_slice(exec, &found, |(items, _)| cover(items, dataset));
    let antecedents = found
        .into_iter()
        .zip(&covers)
        .map(|((items, support_count), bits)| {
            debug_assert_eq!(bits.count_ones(), support_count);
            Antecedent {
                items,
                support_count,
            }
        })
        .collect();
    AntecedentPool::assemble(antecedents, covers, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Condition, Item};
    use proptest::prelude::*;

    fn transactions(rows: &[&[usize]], n_items: usize) -> Dataset {
        let items = (0..n_items)
            .map(|i| Item::new(format!("i{i}"), Condition::Equals("1".into())).unwrap())
            .collect();
        let bool_rows: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| (0..n_items).map(|i| r.contains(&i)).collect())
            .collect();
        let labels = (0..rows.len()).map(|i| i % 2).collect();
        Dataset::from_rows(items, &bool_rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    /// Brute-force enumeration of every item subset up to `max_card`.
    fn brute_force(ds: &Dataset, min_support: f64, max_card: usize) -> Vec<(Vec<usize>, usize)> {
        let m = ds.n_items();
        let min_count = min_support_count(min_support, ds.n());
        let mut out = Vec::new();
        for mask in 1u32..(1 << m) {
            let items: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            if items.len() > max_card {
                continue;
            }
            let support = (0..ds.n())
                .filter(|&r| items.iter().all(|&i| ds.value(r, i)))
                .count();
            if support >= min_count {
                out.push((items, support));
            }
        }
        out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    fn as_pairs(pool: &AntecedentPool) -> Vec<(Vec<usize>, usize)> {
        pool.antecedents()
            .iter()
            .map(|a| (a.items.clone(), a.support_count))
            .collect()
    }

    // A=0, B=1, C=2
    fn abc() -> Dataset {
        transactions(&[&[0, 1], &[0, 2], &[0, 1, 2]], 3)
    }

    #[test]
    fn three_transaction_example() {
        let pool = mine_antecedents(&abc(), 2.0 / 3.0, 2, Execution::Sequential).unwrap();
        assert_eq!(
            as_pairs(&pool),
            vec![
                (vec![0], 3),
                (vec![1], 2),
                (vec![2], 2),
                (vec![0, 1], 2),
                (vec![0, 2], 2),
            ]
        );
        assert_eq!(as_pairs(&pool), brute_force(&abc(), 2.0 / 3.0, 2));
    }

    #[test]
    fn full_support_and_cardinality_cap() {
        let pool = mine_antecedents(&abc(), 1.0, 3, Execution::Sequential).unwrap();
        assert_eq!(as_pairs(&pool), vec![(vec![0], 3)]);

        let pool = mine_antecedents(&abc(), 0.1, 1, Execution::Sequential).unwrap();
        assert!(pool.antecedents().iter().all(|a| a.cardinality() == 1));
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn no_frequent_itemsets() {
        let ds = transactions(&[&[0], &[1], &[2]], 3);
        let err = mine_antecedents(&ds, 0.9, 2, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::NoFrequentItemsets { .. }));
        assert!(err.to_string().contains("lower threshold"));
    }

    #[test]
    fn covers() {
        let ds = abc();
        assert_eq!(cover(&[0, 2], &ds).iter_ones().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(&cover(&[0], &ds), ds.column(0));
        let ds = transactions(&[&[0], &[0, 2]], 3);
        assert_eq!(cover(&[0, 1], &ds).count_ones(), 0);
    }

    #[test]
    fn support_threshold_is_ceiling() {
        assert_eq!(min_support_count(2.0 / 3.0, 3), 2);
        assert_eq!(min_support_count(0.05, 766), 39);
        assert_eq!(min_support_count(0.5, 10), 5);
        assert_eq!(min_support_count(1e-9, 10), 1);
    }

    #[test]
    fn dump_format() {
        let pool = mine_antecedents(&abc(), 2.0 / 3.0, 2, Execution::Sequential).unwrap();
        let dump = pool.dump(&abc());
        assert_eq!(dump.lines().nth(3).unwrap(), "i0=1 AND i1=1\t2");
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..=15, 1usize..40).prop_flat_map(|(m, n)| {
            proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.6), m), n)
                .prop_map(move |rows| {
                    let items = (0..m)
                        .map(|i| Item::new(format!("i{i}"), Condition::Equals("1".into())).unwrap())
                        .collect();
                    let labels = (0..rows.len()).map(|i| i % 2).collect();
                    Dataset::from_rows(items, &rows, labels, vec!["a".into(), "b".into()]).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_brute_force(ds in arb_dataset(), support in 0.05f64..0.9, card in 1usize..4) {
            let expected = brute_force(&ds, support, card);
            match mine_antecedents(&ds, support, card, Execution::Parallel) {
                Ok(pool) => {
                    prop_assert_eq!(as_pairs(&pool), expected);
                    // covers are the AND of single-item columns
                    for (id, a) in pool.antecedents().iter().enumerate() {
                        prop_assert_eq!(pool.cover(id), &cover(&a.items, &ds));
                        prop_assert_eq!(pool.cover(id).count_ones(), a.support_count);
                    }
                    // anti-monotonicity across the pool
                    for a in pool.antecedents() {
                        for b in pool.antecedents() {
                            if a.items.len() < b.items.len() && a.items.iter().all(|i| b.items.contains(i)) {
                                prop_assert!(b.support_count <= a.support_count);
                            }
                        }
                    }
                    let total: usize = pool.by_cardinality().values().map(Vec::len).sum();
                    prop_assert_eq!(total, pool.len());
                }
                Err(Error::NoFrequentItemsets { .. }) => prop_assert!(expected.is_empty()),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}

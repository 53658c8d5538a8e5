#![allow(dead_code)]

use brl::{AntecedentPool, Condition, Dataset, Item};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn binary_dataset(rows: &[Vec<bool>], labels: &[usize], n_labels: usize) -> Dataset {
    let items = (0..rows[0].len())
        .map(|i| Item::new(format!("f{i}"), Condition::Equals("1".into())).unwrap())
        .collect();
    let names = (0..n_labels).map(|l| format!("y{l}")).collect();
    Dataset::from_rows(items, rows, labels.to_vec(), names).unwrap()
}

pub fn random_rows(n: usize, n_items: usize, p: f64, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    (0..n)
        .map(|_| (0..n_items).map(|_| rng.random_bool(p)).collect())
        .collect()
}

/// 50 observations over three items with a pool of cardinalities 1, 1, 2, 2:
/// `{f0}`, `{f1}`, `{f0, f2}`, `{f1, f2}`.
pub fn four_antecedent_problem(n: usize, seed: u64) -> (Dataset, AntecedentPool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = random_rows(n, 3, 0.5, &mut rng);
    let labels: Vec<usize> = rows
        .iter()
        .map(|r| {
            let p = if r[0] && r[2] { 0.9 } else if r[1] { 0.3 } else { 0.6 };
            usize::from(rng.random_bool(p))
        })
        .collect();
    let ds = binary_dataset(&rows, &labels, 2);
    let pool = AntecedentPool::from_itemsets(&ds, vec![vec![0], vec![1], vec![0, 2], vec![1, 2]]).unwrap();
    (ds, pool)
}

/// Every ordered, duplicate-free list over `0..k`, the empty list included.
pub fn enumerate_lists(k: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        out.push(prefix.clone());
        for id in 0..k {
            if !prefix.contains(&id) {
                prefix.push(id);
                extend(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), k, &mut out);
    out
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `eps`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), eps, 50)
}

/// Every ordered, duplicate-free list over `0..pool_size`, including the
/// empty list.
pub(crate) fn enumerate_lists(pool_size: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, pool_size: usize, out: &mut Vec<Vec<usize>>) {
        out.push(prefix.clone());
        for id in 0..pool_size {
            if !prefix.contains(&id) {
                prefix.push(id);
                extend(prefix, pool_size, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), pool_size, &mut out);
    out
}

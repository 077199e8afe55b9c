use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;

/// Progressive edge growth: variable nodes are connected one edge at a
/// time to the lowest-degree check node that is farthest away in the
/// current Tanner graph. Ties are broken uniformly at random.
///
/// Returns the variable list of each check node.
pub fn progressive_edge_growth<R: Rng + ?Sized>(n: usize, m: usize, var_degree: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for e in 0..var_degree {
            let candidates = if e == 0 { (0..m).collect() } else { farthest_checks(j, &vars, &checks) };
            let min_deg = candidates.iter().map(|&c| checks[c].len()).min().expect("a free check node exists");
            let lowest: Vec<usize> = candidates.into_iter().filter(|&c| checks[c].len() == min_deg).collect();
            let c = *lowest.choose(rng).expect("non-empty");
            checks[c].push(j);
            vars[j].push(c);
        }
    }
    for c in checks.iter_mut() {
        c.sort_unstable();
    }
    checks
}

/// Check nodes outside the deepest BFS level reachable from `root`, or,
/// if the whole graph is reachable, those first reached at the last level.
fn farthest_checks(root: usize, vars: &[Vec<usize>], checks: &[Vec<usize>]) -> Vec<usize> {
    let m = checks.len();
    let mut check_seen = vec![false; m];
    let mut var_seen = vec![false; vars.len()];
    var_seen[root] = true;
    let mut frontier: VecDeque<usize> = VecDeque::new();
    let mut reached = 0;
    for &c in &vars[root] {
        if !check_seen[c] {
            check_seen[c] = true;
            reached += 1;
            frontier.push_back(c);
        }
    }
    loop {
        let before = check_seen.clone();
        let mut next = VecDeque::new();
        while let Some(c) = frontier.pop_front() {
            for &v in &checks[c] {
                if var_seen[v] {
                    continue;
                }
                var_seen[v] = true;
                for &c2 in &vars[v] {
                    if !check_seen[c2] {
                        check_seen[c2] = true;
                        reached += 1;
                        next.push_back(c2);
                    }
                }
            }
        }
        if next.is_empty() {
            // tree stopped growing: anything unreached is infinitely far
            return (0..m).filter(|&c| !check_seen[c]).collect();
        }
        if reached == m {
            return (0..m).filter(|&c| !before[c]).collect();
        }
        frontier = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regular_variable_degree_and_no_double_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let checks = progressive_edge_growth(60, 30, 3, &mut rng);
        let mut deg = vec![0; 60];
        for c in &checks {
            let mut s = c.clone();
            s.dedup();
            assert_eq!(s.len(), c.len());
            c.iter().for_each(|&v| deg[v] += 1);
        }
        assert!(deg.iter().all(|&d| d == 3));
        let total: usize = checks.iter().map(Vec::len).sum();
        assert_eq!(total, 180);
    }
}

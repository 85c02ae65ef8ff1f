//! Progressive edge growth.
//!
//! Each variable node gets its edges one at a time. The first edge goes to
//! a check of lowest current degree; later edges go to a check as far as
//! possible from the variable in the current graph (unreachable if
//! possible), breaking ties by lowest degree and then at random. Check
//! degrees are capped so that the result is row-regular whenever
//! `n · column_weight` is a multiple of `m`.

use rand::Rng;

/// Runs PEG and returns the check-node neighbourhoods (one list of variable
/// indices per row), or `None` if the degree caps made an edge impossible.
pub fn peg_checks<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    column_weight: usize,
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    if m == 0 || column_weight == 0 || column_weight > m {
        return None;
    }
    let cap = (n * column_weight).div_ceil(m);
    let mut checks: Vec<Vec<usize>> = vec![Vec::with_capacity(cap); m];
    let mut vars: Vec<Vec<usize>> = vec![Vec::with_capacity(column_weight); n];
    let mut dist = vec![usize::MAX; m];
    let mut seen_var = vec![false; n];

    for v in 0..n {
        for edge in 0..column_weight {
            let eligible = |c: usize, checks: &Vec<Vec<usize>>, vars: &Vec<Vec<usize>>| {
                checks[c].len() < cap && !vars[v].contains(&c)
            };
            let candidates: Vec<usize> = if edge == 0 {
                (0..m).filter(|&c| eligible(c, &checks, &vars)).collect()
            } else {
                bfs_depths(v, &checks, &vars, &mut dist, &mut seen_var);
                let unreached: Vec<usize> = (0..m)
                    .filter(|&c| dist[c] == usize::MAX && eligible(c, &checks, &vars))
                    .collect();
                if !unreached.is_empty() {
                    unreached
                } else {
                    let reached: Vec<usize> =
                        (0..m).filter(|&c| eligible(c, &checks, &vars)).collect();
                    let far = reached.iter().map(|&c| dist[c]).max()?;
                    reached.into_iter().filter(|&c| dist[c] == far).collect()
                }
            };
            let min_deg = candidates.iter().map(|&c| checks[c].len()).min()?;
            let lightest: Vec<usize> =
                candidates.into_iter().filter(|&c| checks[c].len() == min_deg).collect();
            let c = lightest[rng.random_range(0..lightest.len())];
            checks[c].push(v);
            vars[v].push(c);
        }
    }
    for row in checks.iter_mut() {
        row.sort_unstable();
    }
    Some(checks)
}

/// Breadth-first distances (in check layers) from variable `root`.
fn bfs_depths(
    root: usize,
    checks: &[Vec<usize>],
    vars: &[Vec<usize>],
    dist: &mut [usize],
    seen_var: &mut [bool],
) {
    dist.fill(usize::MAX);
    seen_var.fill(false);
    seen_var[root] = true;
    let mut frontier = vec![root];
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for &c in &vars[v] {
                if dist[c] != usize::MAX {
                    continue;
                }
                dist[c] = depth;
                for &u in &checks[c] {
                    if !seen_var[u] {
                        seen_var[u] = true;
                        next.push(u);
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }
}

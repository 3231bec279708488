//! Integer relative homology of cubical pairs.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::grid::CubicalSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HomologyResult {
    /// Rank of `H_k(N, L)` for `k = 0..=dim`.
    pub betti: Vec<usize>,
    /// Elementary divisors greater than one of `H_k(N, L)`.
    pub torsion: Vec<Vec<u64>>,
    /// Number of relative cells per dimension.
    pub cell_counts: Vec<usize>,
}

impl HomologyResult {
    pub fn euler_from_betti(&self) -> i64 {
        alternating(&self.betti)
    }

    pub fn euler_from_cells(&self) -> i64 {
        alternating(&self.cell_counts)
    }
}

fn alternating(v: &[usize]) -> i64 {
    v.iter()
        .enumerate()
        .map(|(k, &x)| if k % 2 == 0 { x as i64 } else { -(x as i64) })
        .sum()
}

type Cell = [u32; 3];

fn cell_dim(c: &Cell) -> usize {
    c.iter().filter(|&&u| u % 2 == 1).count()
}

/// All faces of the closed cube with grid coordinates `coords`, in
/// doubled coordinates (odd entries span an interval).
fn cube_faces(coords: &[usize], out: &mut Vec<Cell>) {
    let n = coords.len();
    let total = 3usize.pow(n as u32);
    for mut k in 0..total {
        let mut c = [0u32; 3];
        for i in 0..n {
            c[i] = 2 * coords[i] as u32 + (k % 3) as u32;
            k /= 3;
        }
        out.push(c);
    }
}

fn boundary(c: &Cell, n: usize) -> Vec<(Cell, i64)> {
    let mut out = Vec::new();
    let mut sign = 1;
    for i in 0..n {
        if c[i] % 2 == 1 {
            let mut hi = *c;
            hi[i] += 1;
            let mut lo = *c;
            lo[i] -= 1;
            out.push((hi, sign));
            out.push((lo, -sign));
            sign = -sign;
        }
    }
    out
}

/// `H_*(N, L)` with integer coefficients, from the relative cubical chain
/// complex of the closed cube unions.
pub fn relative_homology(n: &CubicalSet, l: &CubicalSet) -> HomologyResult {
    let grid = &n.grid;
    let dim = grid.dim();
    let mut buf = Vec::new();
    let mut l_cells: HashSet<Cell> = HashSet::new();
    for id in l.iter() {
        buf.clear();
        cube_faces(&grid.coords(id), &mut buf);
        l_cells.extend(buf.iter().copied());
    }
    let mut cells: Vec<Vec<Cell>> = vec![Vec::new(); dim + 1];
    let mut seen: HashSet<Cell> = HashSet::new();
    for id in n.iter() {
        buf.clear();
        cube_faces(&grid.coords(id), &mut buf);
        for c in &buf {
            if !l_cells.contains(c) && seen.insert(*c) {
                cells[cell_dim(c)].push(*c);
            }
        }
    }
    for v in &mut cells {
        v.sort_unstable();
    }
    let index: Vec<HashMap<Cell, usize>> = cells
        .iter()
        .map(|v| v.iter().enumerate().map(|(k, c)| (*c, k)).collect())
        .collect();

    // rank and divisors of ∂_k : C_k → C_{k-1}
    let mut ranks = vec![0usize; dim + 2];
    let mut divisors: Vec<Vec<u64>> = vec![Vec::new(); dim + 2];
    for k in 1..=dim {
        let cols: Vec<Vec<(usize, i64)>> = cells[k]
            .iter()
            .map(|c| {
                let mut col: Vec<(usize, i64)> = boundary(c, dim)
                    .into_iter()
                    .filter_map(|(f, s)| index[k - 1].get(&f).map(|&r| (r, s)))
                    .collect();
                col.sort_unstable();
                col
            })
            .collect();
        let (r, d) = smith_ranks(cols, cells[k - 1].len());
        ranks[k] = r;
        divisors[k] = d;
    }
    let cell_counts: Vec<usize> = cells.iter().map(Vec::len).collect();
    let betti = (0..=dim)
        .map(|k| cell_counts[k] - ranks[k] - ranks[k + 1])
        .collect();
    let torsion = (0..=dim).map(|k| divisors[k + 1].clone()).collect();
    HomologyResult {
        betti,
        torsion,
        cell_counts,
    }
}

/// Rank and the elementary divisors `> 1` of a sparse integer matrix given
/// by columns of `(row, value)` entries.
pub fn smith_ranks(cols: Vec<Vec<(usize, i64)>>, nrows: usize) -> (usize, Vec<u64>) {
    let mut cols: Vec<HashMap<usize, i64>> =
        cols.into_iter().map(|c| c.into_iter().filter(|e| e.1 != 0).collect()).collect();
    let mut rows: Vec<HashSet<usize>> = vec![HashSet::new(); nrows];
    for (j, c) in cols.iter().enumerate() {
        for &r in c.keys() {
            rows[r].insert(j);
        }
    }
    let mut alive = vec![true; cols.len()];
    let mut rank = 0;
    loop {
        let mut progress = false;
        for j in 0..cols.len() {
            if !alive[j] || cols[j].is_empty() {
                continue;
            }
            let pivot = cols[j]
                .iter()
                .filter(|(_, v)| v.abs() == 1)
                .min_by_key(|(r, _)| (rows[**r].len(), **r))
                .map(|(&r, &v)| (r, v));
            let Some((r, u)) = pivot else { continue };
            let pivot_col = cols[j].clone();
            let others: Vec<usize> = rows[r].iter().copied().filter(|&c| c != j).collect();
            for c in others {
                let factor = cols[c][&r] * u;
                for (&pr, &pv) in &pivot_col {
                    let e = cols[c].entry(pr).or_insert(0);
                    *e -= factor * pv;
                    if *e == 0 {
                        cols[c].remove(&pr);
                        rows[pr].remove(&c);
                    } else {
                        rows[pr].insert(c);
                    }
                }
            }
            for &pr in pivot_col.keys() {
                rows[pr].remove(&j);
            }
            cols[j].clear();
            alive[j] = false;
            rank += 1;
            progress = true;
        }
        if !progress {
            break;
        }
    }
    // Dense Smith form of what is left.
    let rest: Vec<usize> = (0..cols.len()).filter(|&j| alive[j] && !cols[j].is_empty()).collect();
    if rest.is_empty() {
        return (rank, Vec::new());
    }
    let mut row_ids: Vec<usize> = rest.iter().flat_map(|&j| cols[j].keys().copied()).collect();
    row_ids.sort_unstable();
    row_ids.dedup();
    let row_pos: HashMap<usize, usize> = row_ids.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let mut m = vec![vec![0i128; rest.len()]; row_ids.len()];
    for (cj, &j) in rest.iter().enumerate() {
        for (&r, &v) in &cols[j] {
            m[row_pos[&r]][cj] = v as i128;
        }
    }
    let diag = dense_smith(m);
    let mut divs = Vec::new();
    for d in diag {
        rank += 1;
        if d > 1 {
            divs.push(d as u64);
        }
    }
    (rank, divs)
}

/// Nonzero diagonal of the Smith normal form, each entry dividing the next.
pub fn dense_smith(mut m: Vec<Vec<i128>>) -> Vec<i128> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // Smallest nonzero entry of the trailing block as pivot.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if m[i][j] != 0
                    && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..rows {
                let q = m[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        m[i][j] -= q * m[t][j];
                    }
                }
                if m[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = m[t][j] / p;
                if q != 0 {
                    for row in m.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                if m[t][j] != 0 {
                    clean = false;
                }
            }
            if clean {
                // Enforce divisibility of the remaining block.
                let bad = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| m[i][j] % p != 0);
                match bad {
                    Some((i, _)) => {
                        for j in t..cols {
                            m[t][j] += m[i][j];
                        }
                        continue;
                    }
                    None => break,
                }
            }
            // Move the smallest entry of row/column t to the pivot.
            let mut bi = (t, t);
            for i in t..rows {
                if m[i][t] != 0 && m[i][t].abs() < m[bi.0][bi.1].abs() {
                    bi = (i, t);
                }
            }
            for j in t..cols {
                if m[t][j] != 0 && m[t][j].abs() < m[bi.0][bi.1].abs() {
                    bi = (t, j);
                }
            }
            m.swap(t, bi.0);
            for row in m.iter_mut() {
                row.swap(t, bi.1);
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conley::grid::CubicalGrid;
    use crate::system::DomainBox;

    fn grid(r: usize) -> CubicalGrid {
        CubicalGrid::uniform(&DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]), r).unwrap()
    }

    #[test]
    fn single_cube() {
        let g = grid(4);
        let n = CubicalSet::new(&g, vec![5]);
        let h = relative_homology(&n, &CubicalSet::empty(&g));
        assert_eq!(h.betti, vec![1, 0, 0]);
        assert_eq!(h.cell_counts, vec![4, 4, 1]);
    }

    #[test]
    fn hollow_square() {
        let g = grid(4);
        let ring: Vec<usize> = (0..16)
            .filter(|&i| {
                let c = g.coords(i);
                c[0].min(c[1]) == 0 || c[0].max(c[1]) == 2
            })
            .filter(|&i| g.coords(i).iter().all(|&v| v <= 2))
            .collect();
        let n = CubicalSet::new(&g, ring);
        assert_eq!(n.len(), 8);
        let h = relative_homology(&n, &CubicalSet::empty(&g));
        assert_eq!(h.betti, vec![1, 1, 0]);
        assert!(h.torsion.iter().all(Vec::is_empty));
        assert_eq!(h.euler_from_betti(), h.euler_from_cells());
    }

    #[test]
    fn square_mod_edge_strip() {
        let g = grid(4);
        let n = CubicalSet::full(&g);
        let l = CubicalSet::new(&g, (0..4).map(|i| g.id(&[i, 3])).collect());
        let h = relative_homology(&n, &l);
        assert_eq!(h.betti, vec![0, 0, 0]);
    }

    #[test]
    fn square_mod_two_ends() {
        let g = grid(4);
        let n = CubicalSet::new(&g, (0..4).map(|i| g.id(&[i, 0])).collect());
        let l = CubicalSet::new(&g, vec![g.id(&[0, 0]), g.id(&[3, 0])]);
        let h = relative_homology(&n, &l);
        assert_eq!(h.betti, vec![0, 1, 0]);
    }

    #[test]
    fn smith_of_known_matrix() {
        let m = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        assert_eq!(dense_smith(m), vec![2, 6, 12]);
        let (r, d) = smith_ranks(vec![vec![(0, 2)], vec![(0, 3)]], 1);
        assert_eq!((r, d), (1, vec![]));
        let (r, d) = smith_ranks(vec![vec![(0, 2), (1, 2)], vec![(0, 2), (1, -2)]], 2);
        assert_eq!((r, d), (2, vec![2, 4]));
    }
}

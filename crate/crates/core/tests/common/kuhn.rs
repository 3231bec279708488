//! Simplicial homology of unions of unit cubes through the Kuhn
//! triangulation, with ranks over prime fields.

use std::collections::{BTreeSet, HashMap};

type Vertex = [i64; 3];
type Simplex = Vec<Vertex>;

pub struct Simplicial {
    pub betti: Vec<usize>,
    /// Ranks agree over GF(2), GF(3) and a large prime field.
    pub torsion_free: bool,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every face of the Kuhn simplices of the cubes with the given lower corners.
fn complex(cubes: &[Vec<usize>], dim: usize) -> BTreeSet<Simplex> {
    let perms = permutations(dim);
    let mut out = BTreeSet::new();
    for c in cubes {
        let mut base = [0i64; 3];
        for i in 0..dim {
            base[i] = c[i] as i64;
        }
        for p in &perms {
            let mut verts = vec![base];
            let mut v = base;
            for &axis in p {
                v[axis] += 1;
                verts.push(v);
            }
            let k = verts.len();
            for mask in 1u32..(1 << k) {
                let mut s: Simplex = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| verts[i]).collect();
                s.sort();
                out.insert(s);
            }
        }
    }
    out
}

fn rank_mod(mut rows: Vec<Vec<u64>>, p: u64) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col] % p != 0) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = pow_mod(rows[rank][col], p - 2, p);
        for j in col..ncols {
            rows[rank][j] = rows[rank][j] * inv % p;
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let f = rows[r][col];
                for j in col..ncols {
                    rows[r][j] = (rows[r][j] + p - f * rows[rank][j] % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// `H_*(N, L)` for cube unions given by lower-corner coordinates.
pub fn relative(n: &[Vec<usize>], l: &[Vec<usize>], dim: usize) -> Simplicial {
    let kn = complex(n, dim);
    let kl = complex(l, dim);
    let rel: Vec<&Simplex> = kn.iter().filter(|s| !kl.contains(*s)).collect();
    let mut by_dim: Vec<Vec<&Simplex>> = vec![Vec::new(); dim + 1];
    for s in &rel {
        by_dim[s.len() - 1].push(s);
    }
    let index: Vec<HashMap<&Simplex, usize>> = by_dim
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, s)| (*s, i)).collect())
        .collect();
    let primes = [2u64, 3, 1_000_000_007];
    let mut ranks = vec![[0usize; 3]; dim + 2];
    for k in 1..=dim {
        for (pi, &p) in primes.iter().enumerate() {
            let mut m = vec![vec![0u64; by_dim[k].len()]; by_dim[k - 1].len()];
            for (j, s) in by_dim[k].iter().enumerate() {
                for i in 0..s.len() {
                    let mut face = (*s).clone();
                    face.remove(i);
                    if let Some(&r) = index[k - 1].get(&face) {
                        m[r][j] = if i % 2 == 0 { 1 } else { p - 1 };
                    }
                }
            }
            ranks[k][pi] = rank_mod(m, p);
        }
    }
    let torsion_free = ranks.iter().all(|r| r[0] == r[2] && r[1] == r[2]);
    let betti = (0..=dim)
        .map(|k| by_dim[k].len() - ranks[k][2] - ranks[k + 1][2])
        .collect();
    Simplicial {
        betti,
        torsion_free,
    }
}

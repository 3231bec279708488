//! Sampled outer approximation of the time-τ map on a cubical set.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::grid::{CubicalGrid, CubicalSet};
use super::ConleyError;
use crate::semiflow::{flow_point, Flow, FlowOutcome};

/// Samples sit this fraction of a side inside their cube so that each
/// one belongs to a single cube.
const INSET: f64 = 1e-6;

/// Combinatorial multivalued map on the cubes of `domain`. Not a rigorous
/// enclosure: images come from a finite sample lattice plus a bloat collar.
#[derive(Debug, Clone)]
pub struct OuterMap {
    pub domain: CubicalSet,
    /// Sorted image ids, aligned with `domain.ids`.
    pub images: Vec<Vec<usize>>,
    /// Set when some sample left the grid or the flow's domain.
    pub exits: Vec<bool>,
    pub tau: f64,
    pub samples_per_axis: usize,
    pub bloat: usize,
}

impl OuterMap {
    pub fn grid(&self) -> &CubicalGrid {
        &self.domain.grid
    }

    pub fn image(&self, id: usize) -> Option<&[usize]> {
        self.domain.index_of(id).map(|k| self.images[k].as_slice())
    }

    pub fn exits(&self, id: usize) -> bool {
        self.domain.index_of(id).is_some_and(|k| self.exits[k])
    }

    /// True when the image of `id` is not contained in `n`.
    pub fn leaves(&self, id: usize, n: &CubicalSet) -> bool {
        match self.domain.index_of(id) {
            Some(k) => self.exits[k] || self.images[k].iter().any(|&j| !n.contains(j)),
            None => true,
        }
    }

    /// Restriction to the cubes of `sub`, which must lie in the domain.
    pub fn restrict(&self, sub: &CubicalSet) -> OuterMap {
        let mut images = Vec::with_capacity(sub.len());
        let mut exits = Vec::with_capacity(sub.len());
        for id in sub.iter() {
            let k = self.domain.index_of(id).expect("restriction outside the map domain");
            images.push(self.images[k].clone());
            exits.push(self.exits[k]);
        }
        OuterMap {
            domain: sub.clone(),
            images,
            exits,
            tau: self.tau,
            samples_per_axis: self.samples_per_axis,
            bloat: self.bloat,
        }
    }
}

/// Sample lattice of one cube: `s` points per axis spanning the cube
/// (corners, face midpoints and centre for `s = 3`).
pub fn sample_lattice(grid: &CubicalGrid, id: usize, s: usize) -> Vec<Vec<f64>> {
    let b = grid.cube_box(id);
    let n = grid.dim();
    let s = s.max(2);
    let mut out = Vec::with_capacity(s.pow(n as u32));
    let mut k = vec![0usize; n];
    loop {
        out.push(
            (0..n)
                .map(|i| {
                    let side = b.hi[i] - b.lo[i];
                    let frac = INSET + (1.0 - 2.0 * INSET) * k[i] as f64 / (s - 1) as f64;
                    b.lo[i] + side * frac
                })
                .collect(),
        );
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            k[i] += 1;
            if k[i] < s {
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

fn cube_image(
    flow: &dyn Flow,
    grid: &CubicalGrid,
    id: usize,
    tau: f64,
    samples: usize,
    bloat: usize,
) -> Result<(Vec<usize>, bool), ConleyError> {
    let mut hits = Vec::new();
    let mut exit = false;
    for p in sample_lattice(grid, id, samples) {
        match flow_point(flow, &p, tau) {
            FlowOutcome::Reached { point } => match grid.cube_of(&point) {
                Some(c) => hits.push(c),
                None => exit = true,
            },
            FlowOutcome::Exited { .. } => exit = true,
            FlowOutcome::Failed { reason } => {
                return Err(ConleyError::Engine(format!("cube {id} sample {p:?}: {reason}")))
            }
        }
    }
    hits.sort_unstable();
    hits.dedup();
    let mut image: Vec<usize> = hits.iter().flat_map(|&c| grid.neighbors(c, bloat)).collect();
    image.sort_unstable();
    image.dedup();
    Ok((image, exit))
}

fn images_for(
    flow: &dyn Flow,
    grid: &CubicalGrid,
    ids: &[usize],
    tau: f64,
    samples: usize,
    bloat: usize,
) -> Result<Vec<(Vec<usize>, bool)>, ConleyError> {
    ids.par_iter()
        .map(|&id| cube_image(flow, grid, id, tau, samples, bloat))
        .collect()
}

fn check_args(flow: &dyn Flow, grid: &CubicalGrid, tau: f64) -> Result<(), ConleyError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ConleyError::Grid(format!("tau must be positive, got {tau}")));
    }
    if flow.dim() != grid.dim() {
        return Err(ConleyError::Grid("grid and flow dimensions differ".into()));
    }
    Ok(())
}

/// Outer map of `φ_τ` on the cubes of `n`, evaluated in parallel.
pub fn build_outer_map(
    flow: &dyn Flow,
    n: &CubicalSet,
    tau: f64,
    samples_per_axis: usize,
    bloat: usize,
) -> Result<OuterMap, ConleyError> {
    check_args(flow, &n.grid, tau)?;
    let imgs = images_for(flow, &n.grid, &n.ids, tau, samples_per_axis, bloat)?;
    let (images, exits) = imgs.into_iter().unzip();
    Ok(OuterMap {
        domain: n.clone(),
        images,
        exits,
        tau,
        samples_per_axis,
        bloat,
    })
}

/// Grows `seed` by forward images until closed (or `max_cubes` is hit)
/// and returns the closed set with its outer map. Cubes whose samples
/// leave the grid are kept with their exit flag.
pub fn forward_closure(
    flow: &dyn Flow,
    seed: &CubicalSet,
    tau: f64,
    samples_per_axis: usize,
    bloat: usize,
    max_cubes: usize,
) -> Result<OuterMap, ConleyError> {
    let grid = &seed.grid;
    check_args(flow, grid, tau)?;
    let mut known: HashMap<usize, (Vec<usize>, bool)> = HashMap::new();
    let mut frontier: Vec<usize> = seed.ids.clone();
    while !frontier.is_empty() {
        if known.len() + frontier.len() > max_cubes {
            return Err(ConleyError::Grid(format!(
                "forward closure exceeded {max_cubes} cubes"
            )));
        }
        let imgs = images_for(flow, grid, &frontier, tau, samples_per_axis, bloat)?;
        let mut next = Vec::new();
        for (&id, img) in frontier.iter().zip(imgs) {
            for &j in &img.0 {
                if !known.contains_key(&j) {
                    next.push(j);
                }
            }
            known.insert(id, img);
        }
        next.sort_unstable();
        next.dedup();
        next.retain(|j| !known.contains_key(j));
        frontier = next;
    }
    let domain = CubicalSet::new(grid, known.keys().copied().collect());
    let (images, exits) = domain
        .iter()
        .map(|id| known.remove(&id).unwrap())
        .unzip();
    Ok(OuterMap {
        domain,
        images,
        exits,
        tau,
        samples_per_axis,
        bloat,
    })
}

/// Largest subset `S ⊆ n` in which every cube has an image cube and a
/// preimage cube inside `S`.
pub fn invariant_part(f: &OuterMap, n: &CubicalSet) -> CubicalSet {
    let members: Vec<usize> = n.iter().filter(|&i| f.domain.contains(i)).collect();
    let pos: HashMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let m = members.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (k, &id) in members.iter().enumerate() {
        for j in f.image(id).unwrap() {
            if let Some(&q) = pos.get(j) {
                succ[k].push(q);
                pred[q].push(k);
            }
        }
    }
    let mut out_deg: Vec<usize> = succ.iter().map(Vec::len).collect();
    let mut in_deg: Vec<usize> = pred.iter().map(Vec::len).collect();
    let mut alive = vec![true; m];
    let mut queue: VecDeque<usize> = (0..m).filter(|&k| out_deg[k] == 0 || in_deg[k] == 0).collect();
    while let Some(k) = queue.pop_front() {
        if !alive[k] {
            continue;
        }
        alive[k] = false;
        for &q in &succ[k] {
            if alive[q] {
                in_deg[q] -= 1;
                if in_deg[q] == 0 {
                    queue.push_back(q);
                }
            }
        }
        for &p in &pred[k] {
            if alive[p] {
                out_deg[p] -= 1;
                if out_deg[p] == 0 {
                    queue.push_back(p);
                }
            }
        }
    }
    let ids = members
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(&i, _)| i)
        .collect();
    CubicalSet::new(&n.grid, ids)
}

/// True iff the invariant part of `n` avoids the boundary collar of `n`.
pub fn check_isolating(f: &OuterMap, n: &CubicalSet) -> bool {
    let inv = invariant_part(f, n);
    let collar = n.boundary_collar();
    let isolated = inv.iter().all(|i| !collar.contains(i));
    isolated
}

/// Combinatorial index pair `(n, L)`: `L` is the forward closure inside
/// `n` of the cubes whose image leaves `n`.
pub fn index_pair(f: &OuterMap, n: &CubicalSet) -> Result<(CubicalSet, CubicalSet), ConleyError> {
    let mut in_l: HashMap<usize, ()> = HashMap::new();
    let mut stack: Vec<usize> = n.iter().filter(|&i| f.leaves(i, n)).collect();
    while let Some(id) = stack.pop() {
        if in_l.insert(id, ()).is_some() {
            continue;
        }
        for &j in f.image(id).unwrap_or(&[]) {
            if n.contains(j) && !in_l.contains_key(&j) {
                stack.push(j);
            }
        }
    }
    let l = CubicalSet::new(&n.grid, in_l.into_keys().collect());
    let inv = invariant_part(f, n);
    if inv.iter().any(|i| l.contains(i)) {
        return Err(ConleyError::PairConstructionFailed(format!(
            "exit set reaches {} invariant cubes",
            inv.iter().filter(|&i| l.contains(i)).count()
        )));
    }
    Ok((n.clone(), l))
}

/// Independent check of the index-pair conditions.
pub fn verify_index_pair(f: &OuterMap, n: &CubicalSet, l: &CubicalSet) -> Result<(), String> {
    if !l.is_subset(n) {
        return Err("L is not contained in N".into());
    }
    let inv = invariant_part(f, &n.difference(l));
    let collar = n.boundary_collar();
    let touching = inv.iter().filter(|&i| collar.contains(i)).count();
    if touching > 0 {
        return Err(format!("{touching} invariant cubes of N∖L touch the boundary of N"));
    }
    for id in l.iter() {
        for &j in f.image(id).ok_or("L cube outside the map domain")? {
            if n.contains(j) && !l.contains(j) {
                return Err(format!("L is not positively invariant: {id} -> {j}"));
            }
        }
    }
    for id in n.iter() {
        if f.leaves(id, n) && !l.contains(id) {
            return Err(format!("cube {id} exits N without passing through L"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiflow::{PolynomialField, SmoothFlow};
    use crate::system::{DomainBox, SmoothField};

    fn flow(text: &str) -> SmoothFlow<PolynomialField> {
        SmoothFlow::new(
            PolynomialField(SmoothField::parse(text, 2).unwrap()),
            DomainBox::new(vec![0.0, 0.0], vec![8.0, 4.0]),
        )
    }

    fn grid() -> CubicalGrid {
        CubicalGrid::new(&DomainBox::new(vec![0.0, 0.0], vec![8.0, 4.0]), &[8, 4]).unwrap()
    }

    #[test]
    fn zero_field_maps_to_collar() {
        let g = grid();
        let n = CubicalSet::full(&g);
        let f = build_outer_map(&flow("0, 0"), &n, 1.0, 3, 1).unwrap();
        for id in n.iter() {
            let mut expect = g.neighbors(id, 1);
            expect.sort_unstable();
            assert_eq!(f.image(id).unwrap(), expect.as_slice());
        }
        assert_eq!(invariant_part(&f, &n), n);
        assert!(!check_isolating(&f, &n));
    }

    #[test]
    fn translation_moves_one_cube() {
        let g = grid();
        let n = CubicalSet::full(&g);
        let f = build_outer_map(&flow("1, 0"), &n, 1.0, 3, 1).unwrap();
        let c = g.id(&[2, 1]);
        let mut expect = g.neighbors(g.id(&[3, 1]), 1);
        expect.sort_unstable();
        assert_eq!(f.image(c).unwrap(), expect.as_slice());
        assert!(f.exits(g.id(&[7, 0])));
        assert!(!f.exits(g.id(&[6, 0])));
    }

    #[test]
    fn translation_strip_has_empty_invariant_part() {
        let g = grid();
        let strip = CubicalSet::new(&g, (0..8).map(|i| g.id(&[i, 1])).collect());
        let f = build_outer_map(&flow("1, 0"), &strip, 1.0, 3, 0).unwrap();
        assert!(invariant_part(&f, &strip).is_empty());
        assert!(check_isolating(&f, &strip));
        let (_, l) = index_pair(&f, &strip).unwrap();
        assert_eq!(l.ids, vec![g.id(&[7, 1])]);
        verify_index_pair(&f, &strip, &l).unwrap();
    }
}

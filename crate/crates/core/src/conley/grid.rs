//! Uniform cubical grids over a box and sets of their cubes.

use serde::Serialize;

use super::ConleyError;
use crate::system::DomainBox;

/// Cap on the total number of cubes in a grid.
pub const MAX_CUBES: usize = 1 << 24;

/// Uniform grid of `res[i]` cubes per axis. Ids are row-major: the last
/// axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CubicalGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub res: Vec<usize>,
}

impl CubicalGrid {
    pub fn new(bounds: &DomainBox, res: &[usize]) -> Result<Self, ConleyError> {
        let n = bounds.dim();
        if res.len() != n || !(1..=3).contains(&n) {
            return Err(ConleyError::Grid(format!(
                "resolution has {} entries for a {n}-dimensional box",
                res.len()
            )));
        }
        if res.iter().any(|&r| r < 4) {
            return Err(ConleyError::Grid("resolution must be at least 4 per axis".into()));
        }
        if bounds.is_empty() || (0..n).any(|i| !(bounds.hi[i] > bounds.lo[i])) {
            return Err(ConleyError::Grid("grid box has empty interior".into()));
        }
        let total = res.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        match total {
            Some(t) if t <= MAX_CUBES => {}
            _ => {
                return Err(ConleyError::Grid(format!(
                    "grid exceeds the {MAX_CUBES}-cube memory guard"
                )))
            }
        }
        Ok(CubicalGrid {
            lo: bounds.lo.clone(),
            hi: bounds.hi.clone(),
            res: res.to_vec(),
        })
    }

    pub fn uniform(bounds: &DomainBox, per_axis: usize) -> Result<Self, ConleyError> {
        Self::new(bounds, &vec![per_axis; bounds.dim()])
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn side(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.res[axis] as f64
    }

    pub fn bounds(&self) -> DomainBox {
        DomainBox::new(self.lo.clone(), self.hi.clone())
    }

    pub fn id(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.res)
            .fold(0, |acc, (&c, &r)| acc * r + c)
    }

    pub fn coords(&self, mut id: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            c[i] = id % self.res[i];
            id /= self.res[i];
        }
        c
    }

    /// Cube containing `p` (half-open cells, closed on the upper grid face).
    pub fn cube_of(&self, p: &[f64]) -> Option<usize> {
        let mut c = Vec::with_capacity(self.dim());
        for (i, &x) in p.iter().enumerate() {
            if !(x >= self.lo[i] && x <= self.hi[i]) {
                return None;
            }
            let k = ((x - self.lo[i]) / self.side(i)).floor() as usize;
            c.push(k.min(self.res[i] - 1));
        }
        Some(self.id(&c))
    }

    pub fn cube_box(&self, id: usize) -> DomainBox {
        let c = self.coords(id);
        let lo: Vec<f64> = (0..self.dim())
            .map(|i| self.lo[i] + c[i] as f64 * self.side(i))
            .collect();
        let hi: Vec<f64> = (0..self.dim()).map(|i| lo[i] + self.side(i)).collect();
        DomainBox::new(lo, hi)
    }

    pub fn center(&self, id: usize) -> Vec<f64> {
        let c = self.coords(id);
        (0..self.dim())
            .map(|i| self.lo[i] + (c[i] as f64 + 0.5) * self.side(i))
            .collect()
    }

    /// Cubes within sup-distance `radius` of `id`, clipped to the grid,
    /// including `id` itself.
    pub fn neighbors(&self, id: usize, radius: usize) -> Vec<usize> {
        let c = self.coords(id);
        let r = radius as isize;
        let mut out = Vec::new();
        let n = self.dim();
        let mut off = vec![-r; n];
        loop {
            let mut ok = true;
            let mut q = vec![0; n];
            for i in 0..n {
                let v = c[i] as isize + off[i];
                if v < 0 || v >= self.res[i] as isize {
                    ok = false;
                    break;
                }
                q[i] = v as usize;
            }
            if ok {
                out.push(self.id(&q));
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                off[i] += 1;
                if off[i] <= r {
                    break;
                }
                off[i] = -r;
                i += 1;
            }
        }
    }

    /// True when some sup-neighbour of `id` lies off the grid.
    pub fn on_grid_boundary(&self, id: usize) -> bool {
        self.coords(id)
            .iter()
            .zip(&self.res)
            .any(|(&c, &r)| c == 0 || c + 1 == r)
    }
}

/// Sorted collection of cube ids of one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicalSet {
    #[serde(skip)]
    pub grid: CubicalGrid,
    pub ids: Vec<usize>,
}

impl CubicalSet {
    pub fn new(grid: &CubicalGrid, mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        debug_assert!(ids.iter().all(|&i| i < grid.len()));
        CubicalSet {
            grid: grid.clone(),
            ids,
        }
    }

    pub fn empty(grid: &CubicalGrid) -> Self {
        Self::new(grid, Vec::new())
    }

    pub fn full(grid: &CubicalGrid) -> Self {
        Self::new(grid, (0..grid.len()).collect())
    }

    /// Cubes whose box meets the closed set `{p : pred(p)}`, judged at cube
    /// centres.
    pub fn from_predicate(grid: &CubicalGrid, pred: impl Fn(&[f64]) -> bool) -> Self {
        let ids = (0..grid.len()).filter(|&i| pred(&grid.center(i))).collect();
        Self::new(grid, ids)
    }

    /// Cubes within `radius` cells of any of `points`.
    pub fn tube<'a>(
        grid: &CubicalGrid,
        points: impl IntoIterator<Item = &'a [f64]>,
        radius: usize,
    ) -> Self {
        let mut ids = Vec::new();
        for p in points {
            if let Some(c) = grid.cube_of(p) {
                ids.extend(grid.neighbors(c, radius));
            }
        }
        Self::new(grid, ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids.iter().copied()
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn union(&self, other: &CubicalSet) -> CubicalSet {
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        Self::new(&self.grid, ids)
    }

    pub fn difference(&self, other: &CubicalSet) -> CubicalSet {
        let ids = self.iter().filter(|&i| !other.contains(i)).collect();
        Self::new(&self.grid, ids)
    }

    pub fn intersection(&self, other: &CubicalSet) -> CubicalSet {
        let ids = self.iter().filter(|&i| other.contains(i)).collect();
        Self::new(&self.grid, ids)
    }

    pub fn is_subset(&self, other: &CubicalSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn dilate(&self, radius: usize) -> CubicalSet {
        let ids = self
            .iter()
            .flat_map(|i| self.grid.neighbors(i, radius))
            .collect();
        Self::new(&self.grid, ids)
    }

    /// Members touching the topological boundary of the set: some
    /// sup-neighbour is outside the set or off the grid.
    pub fn boundary_collar(&self) -> CubicalSet {
        let ids = self
            .iter()
            .filter(|&i| {
                self.grid.on_grid_boundary(i)
                    || self.grid.neighbors(i, 1).into_iter().any(|j| !self.contains(j))
            })
            .collect();
        Self::new(&self.grid, ids)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.grid.cube_of(p).is_some_and(|c| self.contains(c))
    }

    /// Integer-coordinate CSV dump, one cube per line.
    pub fn to_csv(&self) -> String {
        let n = self.grid.dim();
        let mut out: String = (1..=n).map(|i| format!("c{i}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for id in self.iter() {
            let c = self.grid.coords(id);
            out.push_str(&c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

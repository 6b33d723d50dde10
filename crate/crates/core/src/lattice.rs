//! Open-boundary square lattice geometry.
//!
//! Sites are numbered row-major, `site = row * L + col`, starting at 0.
//! Sources are the left column (`col == 0`) and sinks the right column
//! (`col == L - 1`). External text formats shift every id by one.
//!
//! Bonds are enumerated by visiting sites in row-major order and emitting,
//! for each site, the horizontal bond to its right neighbour followed by the
//! vertical bond to the neighbour below. The resulting ids are stable for a
//! given `L`.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Nearest-neighbour bond between two sites, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
}

/// Immutable `L x L` lattice topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    side: usize,
    bonds: Vec<Bond>,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

impl Lattice {
    /// Builds the `L x L` lattice with open boundaries. Requires `L >= 2`.
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(format!(
                "lattice side length must be at least 2, got {side}"
            )));
        }
        let mut bonds = Vec::with_capacity(2 * side * (side - 1));
        for row in 0..side {
            for col in 0..side {
                let site = row * side + col;
                if col + 1 < side {
                    bonds.push(Bond { a: site, b: site + 1 });
                }
                if row + 1 < side {
                    bonds.push(Bond {
                        a: site,
                        b: site + side,
                    });
                }
            }
        }
        let sources = (0..side).map(|row| row * side).collect();
        let sinks = (0..side).map(|row| row * side + side - 1).collect();
        Ok(Lattice {
            side,
            bonds,
            sources,
            sinks,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.side * self.side
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, id: usize) -> Bond {
        self.bonds[id]
    }

    /// Left-column site ids, top to bottom.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Right-column site ids, top to bottom.
    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn is_source(&self, site: usize) -> bool {
        site.is_multiple_of(self.side)
    }

    pub fn is_sink(&self, site: usize) -> bool {
        site % self.side == self.side - 1
    }

    /// Occupied-bond fraction `n / (2 L (L - 1))`.
    pub fn bond_fraction(&self, occupied: usize) -> Result<f64> {
        if occupied > self.bond_count() {
            return Err(Error::invalid(format!(
                "occupied bond count {occupied} exceeds the {} bonds of an L={} lattice",
                self.bond_count(),
                self.side
            )));
        }
        Ok(occupied as f64 / self.bond_count() as f64)
    }

    /// Graph on the lattice sites containing only the listed bonds.
    pub fn graph<I>(&self, occupied: I) -> Graph
    where
        I: IntoIterator<Item = usize>,
    {
        let edges = occupied
            .into_iter()
            .map(|id| {
                let bond = self.bonds[id];
                (bond.a, bond.b)
            })
            .collect();
        Graph::new(self.site_count(), edges).expect("lattice bonds are valid edges")
    }

    /// Edge-list dump, one `bond_id site_a site_b` line per bond, 1-based.
    pub fn edge_list(&self) -> String {
        let mut out = String::with_capacity(self.bonds.len() * 12);
        for (id, bond) in self.bonds.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", id + 1, bond.a + 1, bond.b + 1);
        }
        out
    }
}

/// Undirected simple graph on `0..sites`; the carrier for every lattice
/// operator. Arbitrary graphs are allowed so small hand-solvable fixtures
/// can be fed to the transport routines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    sites: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(sites: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= sites || b >= sites {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) references a site outside 0..{sites}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on site {a}")));
            }
        }
        Ok(Graph { sites, edges })
    }

    /// Graph without edges.
    pub fn empty(sites: usize) -> Self {
        Graph {
            sites,
            edges: Vec::new(),
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, each a sorted site list, ordered by smallest site.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.sites).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut slot = vec![usize::MAX; self.sites];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for site in 0..self.sites {
            let root = find(&mut parent, site);
            if slot[root] == usize::MAX {
                slot[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[slot[root]].push(site);
        }
        comps
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn bond_counts() {
        assert_eq!(Lattice::new(7).unwrap().bond_count(), 84);
        assert_eq!(Lattice::new(4).unwrap().bond_count(), 24);
        let l2 = Lattice::new(2).unwrap();
        assert_eq!(l2.bond_count(), 4);
        // 1-based {1,3} and {2,4}
        assert_eq!(l2.sources(), &[0, 2]);
        assert_eq!(l2.sinks(), &[1, 3]);
    }

    #[test]
    fn rejects_degenerate_side() {
        assert!(matches!(Lattice::new(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(Lattice::new(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bond_fraction_examples() {
        let l = Lattice::new(7).unwrap();
        assert_eq!(l.bond_fraction(84).unwrap(), 1.0);
        assert_eq!(l.bond_fraction(0).unwrap(), 0.0);
        assert_eq!(l.bond_fraction(42).unwrap(), 0.5);
        assert!(l.bond_fraction(85).is_err());
    }

    #[test]
    fn degrees_and_structure() {
        for side in 2..=12 {
            let l = Lattice::new(side).unwrap();
            assert_eq!(l.bond_count(), 2 * side * (side - 1));
            let mut seen = HashSet::new();
            let mut degree = vec![0usize; l.site_count()];
            for b in l.bonds() {
                assert!(b.a < b.b);
                let (ra, ca) = (b.a / side, b.a % side);
                let (rb, cb) = (b.b / side, b.b % side);
                assert_eq!(ra.abs_diff(rb) + ca.abs_diff(cb), 1);
                assert!(seen.insert(*b));
                degree[b.a] += 1;
                degree[b.b] += 1;
            }
            let count = |d| degree.iter().filter(|&&x| x == d).count();
            assert_eq!(count(2), 4);
            assert_eq!(count(3), 4 * (side - 2));
            assert_eq!(count(4), (side - 2) * (side - 2));
            assert_eq!(l.sources().len(), side);
            assert_eq!(l.sinks().len(), side);
            assert!(l.sources().iter().all(|s| !l.sinks().contains(s)));
            assert_eq!(l, Lattice::new(side).unwrap());
        }
    }

    #[test]
    fn edge_list_is_one_based() {
        let l = Lattice::new(2).unwrap();
        assert_eq!(l.edge_list(), "1 1 2\n2 1 3\n3 2 4\n4 3 4\n");
    }

    #[test]
    fn components_of_small_graph() {
        let g = Graph::new(5, vec![(3, 1), (4, 0)]).unwrap();
        assert_eq!(g.components(), vec![vec![0, 4], vec![1, 3], vec![2]]);
        assert!(Graph::new(2, vec![(0, 2)]).is_err());
        assert!(Graph::new(2, vec![(1, 1)]).is_err());
    }
}

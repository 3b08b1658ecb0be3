use serde::{Deserialize, Serialize};

use super::LayoutError;

pub const MAX_ORDER: u32 = 8;

/// Axial hex coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hex {
    pub q: i32,
    pub r: i32,
}

/// Neighbor offsets, counterclockwise from east.
pub const DIRECTIONS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Pointy-top corners on the doubled lattice, counterclockwise from 30°.
/// Corner `i` to corner `i + 1` is the side facing direction `i + 1`.
pub(crate) const CORNERS: [(i64, i64); 6] = [(1, 1), (0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1)];

impl Hex {
    pub fn new(q: i32, r: i32) -> Self {
        Hex { q, r }
    }

    pub fn neighbor(self, dir: usize) -> Hex {
        let (dq, dr) = DIRECTIONS[dir % 6];
        Hex::new(self.q + dq, self.r + dr)
    }

    pub fn is_adjacent(self, other: Hex) -> bool {
        (0..6).any(|d| self.neighbor(d) == other)
    }

    /// Center on the integer lattice with `x = X·√3/2`, `y = Y/2`.
    pub(crate) fn lattice_center(self) -> (i64, i64) {
        (2 * self.q as i64 + self.r as i64, 3 * self.r as i64)
    }

    /// Center in plane coordinates for unit circumradius.
    pub fn center(self) -> [f64; 2] {
        lattice_to_plane(self.lattice_center())
    }
}

pub(crate) fn lattice_to_plane((x, y): (i64, i64)) -> [f64; 2] {
    [x as f64 * 3f64.sqrt() / 2.0, y as f64 / 2.0]
}

struct Walker {
    pos: Hex,
    heading: usize,
    cells: Vec<Hex>,
}

impl Walker {
    fn turn(&mut self, c: u8) {
        match c {
            b'+' => self.heading = (self.heading + 1) % 6,
            b'-' => self.heading = (self.heading + 5) % 6,
            _ => {}
        }
    }

    fn step(&mut self) {
        self.cells.push(self.pos);
        self.pos = self.pos.neighbor(self.heading);
    }

    fn expand(&mut self, symbol: u8, depth: u32) {
        if depth == 0 {
            self.step();
            return;
        }
        let rule: &[u8] = if symbol == b'A' {
            b"A-B--B+A++AA+B-"
        } else {
            b"+A-BB--B-A++A+B"
        };
        for &c in rule {
            match c {
                b'A' | b'B' => self.expand(c, depth - 1),
                _ => self.turn(c),
            }
        }
    }
}

/// Cells visited by the flowsnake of the given order, in curve order.
pub fn gosper_curve(order: u32) -> Result<Vec<Hex>, LayoutError> {
    if order > MAX_ORDER {
        return Err(LayoutError::OrderTooLarge(order));
    }
    let mut w = Walker {
        pos: Hex::new(0, 0),
        heading: 0,
        cells: Vec::with_capacity(7usize.pow(order)),
    };
    w.expand(b'A', order);
    Ok(w.cells)
}

/// Smallest `k` with `7^k ≥ n`.
pub fn order_for(n: usize) -> u32 {
    let mut k = 0;
    let mut cap = 1usize;
    while cap < n {
        cap *= 7;
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_orders() {
        assert_eq!(gosper_curve(0).unwrap(), vec![Hex::new(0, 0)]);
        let c1 = gosper_curve(1).unwrap();
        assert_eq!(c1.len(), 7);
        for w in c1.windows(2) {
            assert!(w[0].is_adjacent(w[1]));
        }
        let c2 = gosper_curve(2).unwrap();
        assert_eq!(c2.iter().collect::<HashSet<_>>().len(), 49);
        assert!(matches!(
            gosper_curve(9),
            Err(LayoutError::OrderTooLarge(9))
        ));
    }

    #[test]
    fn orders() {
        assert_eq!(order_for(0), 0);
        assert_eq!(order_for(1), 0);
        assert_eq!(order_for(7), 1);
        assert_eq!(order_for(8), 2);
        assert_eq!(order_for(2401), 4);
        assert_eq!(order_for(2615), 5);
    }

    #[test]
    fn corners_are_unit_distance() {
        for (x, y) in CORNERS {
            let [px, py] = lattice_to_plane((x, y));
            assert!(((px * px + py * py).sqrt() - 1.0).abs() < 1e-12);
        }
        // side i sits halfway towards neighbor i + 1
        for i in 0..6 {
            let (a, b) = (CORNERS[i], CORNERS[(i + 1) % 6]);
            let mid = lattice_to_plane((a.0 + b.0, a.1 + b.1));
            let n = Hex::new(0, 0).neighbor(i + 1).center();
            assert!((mid[0] - n[0]).abs() < 1e-12 && (mid[1] - n[1]).abs() < 1e-12);
        }
    }
}

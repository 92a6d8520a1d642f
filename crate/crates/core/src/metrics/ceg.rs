//! Clarke error grid.
//!
//! With reference `x` and estimate `y` (mg/dl), the zones are tested in the
//! order A, E, C, D; everything else is B.
//!
//! ```text
//! A: (x ≤ 70 and y ≤ 70) or 0.8x ≤ y ≤ 1.2x
//! E: (x ≥ 180 and y ≤ 70) or (x ≤ 70 and y ≥ 180)
//! C: (70 ≤ x ≤ 290 and y ≥ x + 110) or (130 ≤ x ≤ 180 and y ≤ 1.4x - 182)
//! D: (x ≥ 240 and 70 ≤ y ≤ 180) or (x ≤ 175/3 and 70 ≤ y ≤ 180)
//!    or (175/3 ≤ x ≤ 70 and y ≥ 1.2x)
//! ```

use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
    D,
    E,
}

impl Zone {
    pub const ALL: [Zone; 5] = [Zone::A, Zone::B, Zone::C, Zone::D, Zone::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

pub fn ceg_zone(g_true: f64, g_est: f64) -> Zone {
    let (x, y) = (g_true, g_est);
    if (x <= 70.0 && y <= 70.0) || (y >= 0.8 * x && y <= 1.2 * x) {
        Zone::A
    } else if (x >= 180.0 && y <= 70.0) || (x <= 70.0 && y >= 180.0) {
        Zone::E
    } else if ((70.0..=290.0).contains(&x) && y >= x + 110.0)
        || ((130.0..=180.0).contains(&x) && y <= 1.4 * x - 182.0)
    {
        Zone::C
    } else if (x >= 240.0 && (70.0..=180.0).contains(&y))
        || (x <= 175.0 / 3.0 && (70.0..=180.0).contains(&y))
        || ((175.0 / 3.0..=70.0).contains(&x) && y >= 1.2 * x)
    {
        Zone::D
    } else {
        Zone::B
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_examples() {
        assert_eq!(ceg_zone(100.0, 100.0), Zone::A);
        assert_eq!(ceg_zone(100.0, 119.0), Zone::A);
        assert_eq!(ceg_zone(100.0, 121.0), Zone::B);
        assert_eq!(ceg_zone(60.0, 60.0), Zone::A);
        assert_eq!(ceg_zone(60.0, 69.0), Zone::A);
    }

    #[test]
    fn one_point_per_zone() {
        assert_eq!(ceg_zone(300.0, 50.0), Zone::E);
        assert_eq!(ceg_zone(50.0, 250.0), Zone::E);
        assert_eq!(ceg_zone(100.0, 215.0), Zone::C);
        assert_eq!(ceg_zone(170.0, 50.0), Zone::C);
        assert_eq!(ceg_zone(160.0, 40.0), Zone::C);
        assert_eq!(ceg_zone(300.0, 150.0), Zone::D);
        assert_eq!(ceg_zone(40.0, 100.0), Zone::D);
        assert_eq!(ceg_zone(65.0, 100.0), Zone::D);
        assert_eq!(ceg_zone(200.0, 100.0), Zone::B);
    }

    #[test]
    fn letters() {
        assert_eq!(Zone::ALL.map(Zone::letter), ['A', 'B', 'C', 'D', 'E']);
    }
}

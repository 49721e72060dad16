use serde::{Deserialize, Serialize};

pub(crate) const BACKGROUND_RGB: [f64; 3] = [0.45, 0.45, 0.45];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Square,
    Circle,
    Triangle,
    Cross,
}

impl ShapeKind {
    /// Base RGB colour; instances jitter brightness around it.
    pub fn color(self) -> [f64; 3] {
        match self {
            ShapeKind::Square => [0.85, 0.25, 0.2],
            ShapeKind::Circle => [0.25, 0.75, 0.3],
            ShapeKind::Triangle => [0.25, 0.35, 0.85],
            ShapeKind::Cross => [0.85, 0.8, 0.2],
        }
    }

    pub fn contains(self, dy: isize, dx: isize, r: isize) -> bool {
        match self {
            ShapeKind::Square => dy.abs() <= r && dx.abs() <= r,
            ShapeKind::Circle => dy * dy + dx * dx <= r * r,
            // apex up, base on the bottom row of the box
            ShapeKind::Triangle => dy.abs() <= r && 2 * dx.abs() <= dy + r,
            ShapeKind::Cross => {
                let arm = (r / 3).max(1);
                (dx.abs() <= arm && dy.abs() <= r) || (dy.abs() <= arm && dx.abs() <= r)
            }
        }
    }
}

/// Calls `paint` with the flat index of every pixel covered by the shape.
/// The shape's bounding box must lie inside the image.
pub fn paint_shape(kind: ShapeKind, cy: usize, cx: usize, r: usize, width: usize, mut paint: impl FnMut(usize)) {
    let ri = r as isize;
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if kind.contains(dy, dx, ri) {
                let y = (cy as isize + dy) as usize;
                let x = (cx as isize + dx) as usize;
                paint(y * width + x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(kind: ShapeKind, r: usize) -> usize {
        let mut n = 0;
        paint_shape(kind, r, r, r, 2 * r + 1, |_| n += 1);
        n
    }

    #[test]
    fn square_area() {
        assert_eq!(area(ShapeKind::Square, 4), 81);
    }

    #[test]
    fn shapes_nonempty_and_within_box() {
        for kind in [ShapeKind::Square, ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Cross] {
            for r in 1..10 {
                let a = area(kind, r);
                assert!(a > 0 && a <= (2 * r + 1) * (2 * r + 1));
            }
        }
        // arm width 1 at r = 3: two 7x3 bars sharing a 3x3 centre
        assert_eq!(area(ShapeKind::Cross, 3), 21 + 21 - 9);
    }
}

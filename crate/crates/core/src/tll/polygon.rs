//! Convex polygon clipping in the plane.

pub(crate) type Point = [f64; 2];

/// Keep the part of a convex polygon where `a·x + c ≥ 0`.
pub(crate) fn clip(poly: &[Point], a: [f64; 2], c: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = a[0] * p[0] + a[1] * p[1] + c;
        let fq = a[0] * q[0] + a[1] * q[1] + c;
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

pub(crate) fn area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - p[1] * q[0]
        })
        .sum();
    0.5 * twice.abs()
}

pub(crate) fn centroid(poly: &[Point]) -> Point {
    let k = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / k, sy / k]
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn clip_half() {
        let h = clip(&SQUARE, [-1.0, 0.0], 0.5);
        assert!((area(&h) - 0.5).abs() < 1e-15);
        assert!(h.iter().all(|p| p[0] <= 0.5));
    }

    #[test]
    fn clip_corner_triangle() {
        let t = clip(&SQUARE, [-1.0, -1.0], 0.5);
        assert_eq!(t.len(), 3);
        assert!((area(&t) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn clip_away_and_keep_all() {
        assert!(clip(&SQUARE, [1.0, 0.0], -2.0).is_empty());
        assert_eq!(clip(&SQUARE, [1.0, 0.0], 2.0).len(), 4);
        assert_eq!(centroid(&SQUARE), [0.5, 0.5]);
    }
}

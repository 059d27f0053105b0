//! Convex polygon primitives. Polygons are counter-clockwise vertex lists.

pub type Point = [f64; 2];
pub type Segment = [Point; 2];

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Mean of the vertices; strictly interior for a non-degenerate convex
/// polygon.
pub fn vertex_centroid(poly: &[Point]) -> Point {
    let n = poly.len() as f64;
    let (su, sv) = poly.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [su / n, sv / n]
}

#[inline]
pub fn line_value(a: [f64; 2], c: f64, p: Point) -> f64 {
    a[0] * p[0] + a[1] * p[1] + c
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitOutcome {
    /// Entire polygon on the non-negative side (within tolerance).
    Positive,
    Negative,
    Split { positive: Vec<Point>, negative: Vec<Point> },
}

/// Splits a convex polygon by the line `a·p + c = 0`. Vertices within
/// `eps` (signed distance) of the line are treated as on it.
pub fn split(poly: &[Point], a: [f64; 2], c: f64, eps: f64) -> SplitOutcome {
    let norm = a[0].hypot(a[1]);
    if norm == 0.0 {
        return if c >= 0.0 {
            SplitOutcome::Positive
        } else {
            SplitOutcome::Negative
        };
    }
    let dist: Vec<f64> = poly.iter().map(|&p| line_value(a, c, p) / norm).collect();
    let class: Vec<i8> = dist
        .iter()
        .map(|&d| {
            if d > eps {
                1
            } else if d < -eps {
                -1
            } else {
                0
            }
        })
        .collect();
    if !class.contains(&1) {
        return SplitOutcome::Negative;
    }
    if !class.contains(&-1) {
        return SplitOutcome::Positive;
    }
    let n = poly.len();
    let mut positive = Vec::with_capacity(n + 2);
    let mut negative = Vec::with_capacity(n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        let p = poly[i];
        if class[i] >= 0 {
            positive.push(p);
        }
        if class[i] <= 0 {
            negative.push(p);
        }
        if class[i] * class[j] < 0 {
            let t = dist[i] / (dist[i] - dist[j]);
            let q = poly[j];
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            positive.push(x);
            negative.push(x);
        }
    }
    SplitOutcome::Split { positive, negative }
}

/// Part of the convex polygon on the non-negative side of the line.
pub fn clip_keep_positive(poly: &[Point], a: [f64; 2], c: f64, eps: f64) -> Vec<Point> {
    match split(poly, a, c, eps) {
        SplitOutcome::Positive => poly.to_vec(),
        SplitOutcome::Negative => Vec::new(),
        SplitOutcome::Split { positive, .. } => positive,
    }
}

pub fn clip_to_rect(poly: &[Point], rect: &super::Rect) -> Vec<Point> {
    let mut p = poly.to_vec();
    for (a, c) in [
        ([1.0, 0.0], -rect.u_min),
        ([-1.0, 0.0], rect.u_max),
        ([0.0, 1.0], -rect.v_min),
        ([0.0, -1.0], rect.v_max),
    ] {
        if p.is_empty() {
            break;
        }
        p = clip_keep_positive(&p, a, c, 0.0);
    }
    p
}

/// Intersection of the line `a·p + c = 0` with a convex polygon, if it
/// passes through the interior.
pub fn clip_line(poly: &[Point], a: [f64; 2], c: f64, eps: f64) -> Option<Segment> {
    let norm = a[0].hypot(a[1]);
    if norm == 0.0 {
        return None;
    }
    let n = poly.len();
    let dist: Vec<f64> = poly.iter().map(|&p| line_value(a, c, p) / norm).collect();
    if !(dist.iter().any(|&d| d > eps) && dist.iter().any(|&d| d < -eps)) {
        return None;
    }
    let mut pts: Vec<Point> = Vec::with_capacity(2);
    for i in 0..n {
        let j = (i + 1) % n;
        let (di, dj) = (dist[i], dist[j]);
        if di.abs() <= eps {
            pts.push(poly[i]);
        } else if dj.abs() > eps && (di > 0.0) != (dj > 0.0) {
            let t = di / (di - dj);
            let (p, q) = (poly[i], poly[j]);
            pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    if pts.len() < 2 {
        return None;
    }
    // Farthest pair guards against duplicate near-vertex hits.
    let mut best = (0, 1, -1.0);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = dist2(pts[i], pts[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    Some([pts[best.0], pts[best.1]])
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Euclidean distance from `p` to the closed segment.
pub fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let [a, b] = *s;
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    };
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1]]).sqrt()
}

/// Closed point-in-convex-polygon test.
pub fn contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub fn segments_intersect(s: &Segment, t: &Segment) -> bool {
    let (p1, p2, p3, p4) = (s[0], s[1], t[0], t[1]);
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p3, p4, p1))
        || (d2 == 0.0 && on_segment(p3, p4, p2))
        || (d3 == 0.0 && on_segment(p1, p2, p3))
        || (d4 == 0.0 && on_segment(p1, p2, p4))
}

/// Whether a segment meets a closed convex polygon.
pub fn segment_meets_polygon(s: &Segment, poly: &[Point]) -> bool {
    if contains(poly, s[0]) || contains(poly, s[1]) {
        return true;
    }
    let n = poly.len();
    (0..n).any(|i| segments_intersect(s, &[poly[i], poly[(i + 1) % n]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    #[test]
    fn split_square_diagonally() {
        match split(&unit_square(), [1.0, -1.0], 0.0, 1e-12) {
            SplitOutcome::Split { positive, negative } => {
                assert!((area(&positive) - 0.5).abs() < 1e-15);
                assert!((area(&negative) - 0.5).abs() < 1e-15);
                assert!(signed_area(&positive) > 0.0 && signed_area(&negative) > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(split(&unit_square(), [1.0, 0.0], 2.0, 1e-12), SplitOutcome::Positive);
        assert_eq!(split(&unit_square(), [1.0, 0.0], 0.0, 1e-12), SplitOutcome::Positive);
    }

    #[test]
    fn clip_line_through_square() {
        let s = clip_line(&unit_square(), [0.0, 1.0], -0.25, 1e-12).unwrap();
        assert_eq!(s[0][1], 0.25);
        assert_eq!(dist2(s[0], s[1]), 1.0);
        assert!(clip_line(&unit_square(), [0.0, 1.0], 3.0, 1e-12).is_none());
    }

    #[test]
    fn rect_clipping_and_containment() {
        let rect = super::super::Rect::new(0.5, 2.0, -1.0, 0.5).unwrap();
        let clipped = clip_to_rect(&unit_square(), &rect);
        assert!((area(&clipped) - 0.25).abs() < 1e-15);
        assert!(contains(&unit_square(), [0.5, 0.5]));
        assert!(contains(&unit_square(), [1.0, 0.5]));
        assert!(!contains(&unit_square(), [1.01, 0.5]));
    }

    #[test]
    fn segment_queries() {
        let sq = unit_square();
        assert!(segment_meets_polygon(&[[-1.0, 0.5], [2.0, 0.5]], &sq));
        assert!(!segment_meets_polygon(&[[-1.0, 2.0], [2.0, 2.0]], &sq));
        assert!((point_segment_distance([0.0, 1.0], &[[-1.0, 0.0], [1.0, 0.0]]) - 1.0).abs() < 1e-15);
        assert!((point_segment_distance([3.0, 0.0], &[[-1.0, 0.0], [1.0, 0.0]]) - 2.0).abs() < 1e-15);
    }
}

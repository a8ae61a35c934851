//! Exact areas for the built-in smooth domains.
//!
//! Every built-in is an axis-scaled offset box: the set of points within
//! `radius` of a centered square of half-width `half`, after scaling x by
//! `sx` and y by `sy`. A disc has `half = 0`, an ellipse additionally has
//! unequal scales, and a rounded square has `half > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-parallel rectangle `[x0,x1] × [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let r = Rect { x0: self.x0.max(o.x0), x1: self.x1.min(o.x1), y0: self.y0.max(o.y0), y1: self.y1.min(o.y1) };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }
}

/// Primitive of `sqrt(r² − u²)`.
fn half_chord_integral(u: f64, r: f64) -> f64 {
    let u = u.clamp(-r, r);
    0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
}

/// Area of the disc of radius `r` centered at the origin intersected with
/// `rect`, by integrating the clipped chord length piecewise in x.
pub fn disc_rect_area(r: f64, rect: &Rect) -> f64 {
    let a = rect.x0.max(-r);
    let b = rect.x1.min(r);
    if a >= b || rect.y0 >= r || rect.y1 <= -r {
        return 0.0;
    }
    let mut breaks = vec![a, b];
    for y in [rect.y0, rect.y1] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            breaks.extend([-s, s].into_iter().filter(|&x| x > a && x < b));
        }
    }
    breaks.sort_by(f64::total_cmp);
    let h = |x: f64| (r * r - x * x).max(0.0).sqrt();
    let mut area = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        // On each piece the bounds are either a rectangle edge or ±h(x).
        let (top_const, top_curve) = if hm < rect.y1 { (0.0, 1.0) } else { (rect.y1, 0.0) };
        let (bot_const, bot_curve) = if -hm > rect.y0 { (0.0, -1.0) } else { (rect.y0, 0.0) };
        if top_const + top_curve * hm <= bot_const + bot_curve * hm {
            continue;
        }
        let curve = half_chord_integral(hi, r) - half_chord_integral(lo, r);
        area += (top_const - bot_const) * (hi - lo) + (top_curve - bot_curve) * curve;
    }
    area.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SmoothDomain {
    Disc { cx: f64, cy: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, a: f64, b: f64 },
    RoundedSquare { cx: f64, cy: f64, half: f64, radius: f64 },
}

/// Normalized form: offset box in scaled coordinates.
struct OffsetBox {
    cx: f64,
    cy: f64,
    sx: f64,
    sy: f64,
    half: f64,
    radius: f64,
}

impl SmoothDomain {
    /// The default disc used by the oracle checks.
    pub fn default_disc() -> Self {
        SmoothDomain::Disc { cx: 0.5, cy: 0.5, r: 0.3 }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "disc" => Ok(Self::default_disc()),
            "ellipse" => Ok(SmoothDomain::Ellipse { cx: 0.5, cy: 0.5, a: 0.35, b: 0.2 }),
            "rounded-square" => Ok(SmoothDomain::RoundedSquare { cx: 0.5, cy: 0.5, half: 0.3, radius: 0.1 }),
            other => Err(Error::Config(format!("unknown shape `{other}` (disc | ellipse | rounded-square)"))),
        }
    }

    fn offset_box(&self) -> OffsetBox {
        match *self {
            SmoothDomain::Disc { cx, cy, r } => OffsetBox { cx, cy, sx: 1.0, sy: 1.0, half: 0.0, radius: r },
            SmoothDomain::Ellipse { cx, cy, a, b } => OffsetBox { cx, cy, sx: a, sy: b, half: 0.0, radius: 1.0 },
            SmoothDomain::RoundedSquare { cx, cy, half, radius } => {
                OffsetBox { cx, cy, sx: 1.0, sy: 1.0, half: half - radius, radius }
            }
        }
    }

    pub fn bounding_box(&self) -> Rect {
        let o = self.offset_box();
        let ex = (o.half + o.radius) * o.sx;
        let ey = (o.half + o.radius) * o.sy;
        Rect { x0: o.cx - ex, x1: o.cx + ex, y0: o.cy - ey, y1: o.cy + ey }
    }

    /// Checks positivity of the shape parameters and that the closure lies
    /// strictly inside the open unit square.
    pub fn validate(&self) -> Result<()> {
        let ok_params = match *self {
            SmoothDomain::Disc { r, .. } => r > 0.0,
            SmoothDomain::Ellipse { a, b, .. } => a > 0.0 && b > 0.0,
            SmoothDomain::RoundedSquare { half, radius, .. } => radius > 0.0 && radius <= half,
        };
        let bb = self.bounding_box();
        let inside = bb.x0 > 0.0 && bb.y0 > 0.0 && bb.x1 < 1.0 && bb.y1 < 1.0;
        if !ok_params || !inside || ![bb.x0, bb.x1, bb.y0, bb.y1].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("{self:?} must be non-degenerate and strictly inside (0,1)^2")));
        }
        Ok(())
    }

    fn to_local(&self, o: &OffsetBox, r: &Rect) -> Rect {
        Rect { x0: (r.x0 - o.cx) / o.sx, x1: (r.x1 - o.cx) / o.sx, y0: (r.y0 - o.cy) / o.sy, y1: (r.y1 - o.cy) / o.sy }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let o = self.offset_box();
        let u = (((x - o.cx) / o.sx).abs() - o.half).max(0.0);
        let v = (((y - o.cy) / o.sy).abs() - o.half).max(0.0);
        u * u + v * v <= o.radius * o.radius
    }

    /// Exact area of the domain inside `rect`.
    pub fn area_in(&self, rect: &Rect) -> f64 {
        let o = self.offset_box();
        let local = self.to_local(&o, rect);
        let (h, rad) = (o.half, o.radius);
        let mut area = 0.0;
        // Cross made of a horizontal bar and two vertical caps.
        let bars = [
            Rect { x0: -h - rad, x1: h + rad, y0: -h, y1: h },
            Rect { x0: -h, x1: h, y0: h, y1: h + rad },
            Rect { x0: -h, x1: h, y0: -h - rad, y1: -h },
        ];
        for bar in &bars {
            if let Some(i) = bar.intersect(&local) {
                area += i.area();
            }
        }
        // Quarter discs at the corners of the inner square.
        area += self.corner_area(&o, &local);
        area * o.sx * o.sy
    }

    fn corner_area(&self, o: &OffsetBox, local: &Rect) -> f64 {
        let (h, rad) = (o.half, o.radius);
        let mut area = 0.0;
        // Each quarter disc is centered on a corner of the inner square and
        // lies outside it along both axes.
        for (px, py) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            let (ccx, ccy) = (px * h, py * h);
            let (qx0, qx1) = if px > 0.0 { (ccx, ccx + rad) } else { (ccx - rad, ccx) };
            let (qy0, qy1) = if py > 0.0 { (ccy, ccy + rad) } else { (ccy - rad, ccy) };
            let q = Rect { x0: qx0, x1: qx1, y0: qy0, y1: qy1 };
            if let Some(i) = q.intersect(local) {
                let shifted = Rect { x0: i.x0 - ccx, x1: i.x1 - ccx, y0: i.y0 - ccy, y1: i.y1 - ccy };
                area += disc_rect_area(rad, &shifted);
            }
        }
        area
    }

    /// Whether the closed cell meets the boundary curve: the distance to the
    /// inner square attains `radius` somewhere on the cell.
    pub fn boundary_meets(&self, rect: &Rect) -> bool {
        let o = self.offset_box();
        let l = self.to_local(&o, rect);
        let h = o.half;
        let gap = |lo: f64, hi: f64| (lo - h).max(-h - hi).max(0.0);
        let dmin = gap(l.x0, l.x1).hypot(gap(l.y0, l.y1));
        let far = |lo: f64, hi: f64| (lo.abs().max(hi.abs()) - h).max(0.0);
        let dmax = far(l.x0, l.x1).hypot(far(l.y0, l.y1));
        dmin <= o.radius && o.radius <= dmax
    }

    /// Exact total area.
    pub fn area(&self) -> f64 {
        self.area_in(&self.bounding_box())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn full_areas_match_closed_forms() {
        let d = SmoothDomain::default_disc();
        assert!((d.area() - PI * 0.09).abs() < 1e-14);
        assert!((d.area_in(&Rect::UNIT) - PI * 0.09).abs() < 1e-14);
        let e = SmoothDomain::Ellipse { cx: 0.5, cy: 0.5, a: 0.35, b: 0.2 };
        assert!((e.area_in(&Rect::UNIT) - PI * 0.35 * 0.2).abs() < 1e-14);
        let s = SmoothDomain::RoundedSquare { cx: 0.5, cy: 0.5, half: 0.3, radius: 0.1 };
        let expected = 0.36 - (4.0 - PI) * 0.01;
        assert!((s.area_in(&Rect::UNIT) - expected).abs() < 1e-14);
    }

    #[test]
    fn disc_quarter_and_half() {
        let d = SmoothDomain::default_disc();
        let q = Rect { x0: 0.5, x1: 1.0, y0: 0.5, y1: 1.0 };
        assert!((d.area_in(&q) - PI * 0.09 / 4.0).abs() < 1e-15);
        let half = Rect { x0: 0.0, x1: 0.5, y0: 0.0, y1: 1.0 };
        assert!((d.area_in(&half) - PI * 0.09 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_touching_domains() {
        assert!(SmoothDomain::Disc { cx: 0.5, cy: 0.5, r: 0.5 }.validate().is_err());
        assert!(SmoothDomain::Disc { cx: 0.5, cy: 0.5, r: 0.0 }.validate().is_err());
        assert!(SmoothDomain::RoundedSquare { cx: 0.5, cy: 0.5, half: 0.1, radius: 0.2 }.validate().is_err());
        assert!(SmoothDomain::from_name("rounded-square").unwrap().validate().is_ok());
        assert!(SmoothDomain::from_name("hexagon").is_err());
    }

    #[test]
    fn boundary_test_on_simple_cells() {
        let d = SmoothDomain::default_disc();
        assert!(d.boundary_meets(&Rect::UNIT));
        assert!(!d.boundary_meets(&Rect { x0: 0.45, x1: 0.55, y0: 0.45, y1: 0.55 }));
        assert!(!d.boundary_meets(&Rect { x0: 0.0, x1: 0.1, y0: 0.0, y1: 0.1 }));
        assert!(d.boundary_meets(&Rect { x0: 0.75, x1: 0.85, y0: 0.45, y1: 0.55 }));
    }

    /// Midpoint-grid estimate of the area for cross-checking.
    fn grid_area(d: &SmoothDomain, r: &Rect, n: usize) -> f64 {
        let (dx, dy) = ((r.x1 - r.x0) / n as f64, (r.y1 - r.y0) / n as f64);
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                if d.contains(r.x0 + (i as f64 + 0.5) * dx, r.y0 + (j as f64 + 0.5) * dy) {
                    hits += 1;
                }
            }
        }
        hits as f64 * dx * dy
    }

    fn domains() -> impl Strategy<Value = SmoothDomain> {
        prop_oneof![
            (0.3f64..0.7, 0.3f64..0.7, 0.05f64..0.25).prop_map(|(cx, cy, r)| SmoothDomain::Disc { cx, cy, r }),
            (0.3f64..0.7, 0.3f64..0.7, 0.05f64..0.25, 0.05f64..0.25)
                .prop_map(|(cx, cy, a, b)| SmoothDomain::Ellipse { cx, cy, a, b }),
            (0.3f64..0.7, 0.3f64..0.7, 0.1f64..0.25, 0.1f64..0.9)
                .prop_map(|(cx, cy, half, f)| SmoothDomain::RoundedSquare { cx, cy, half, radius: f * half }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn area_matches_grid_count(d in domains(), x0 in 0.0f64..0.9, y0 in 0.0f64..0.9, w in 0.05f64..0.5, h in 0.05f64..0.5) {
            let r = Rect { x0, x1: (x0 + w).min(1.0), y0, y1: (y0 + h).min(1.0) };
            let exact = d.area_in(&r);
            let approx = grid_area(&d, &r, 400);
            prop_assert!(exact >= 0.0 && exact <= r.area() + 1e-15);
            prop_assert!((exact - approx).abs() < 4.0 * (r.x1 - r.x0 + r.y1 - r.y0) / 400.0 * (r.area()).sqrt() + 1e-4);
        }

        #[test]
        fn area_is_additive_over_splits(d in domains(), x0 in 0.0f64..0.5, y0 in 0.0f64..0.5, t in 0.1f64..0.9) {
            let r = Rect { x0, x1: x0 + 0.5, y0, y1: y0 + 0.5 };
            let cut = x0 + t * 0.5;
            let left = Rect { x1: cut, ..r };
            let right = Rect { x0: cut, ..r };
            prop_assert!((d.area_in(&r) - d.area_in(&left) - d.area_in(&right)).abs() < 1e-14);
        }

        #[test]
        fn boundary_test_agrees_with_mixed_area(d in domains(), x0 in 0.0f64..0.95, y0 in 0.0f64..0.95, w in 0.01f64..0.05) {
            let r = Rect { x0, x1: x0 + w, y0, y1: y0 + w };
            let a = d.area_in(&r);
            let mixed = a > 1e-12 * r.area() && a < r.area() * (1.0 - 1e-12);
            if mixed {
                prop_assert!(d.boundary_meets(&r));
            }
        }
    }
}

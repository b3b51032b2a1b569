//! Deterministic SVG figures: skeleton polylines, affinity-field quivers and
//! boxes with their expansion history.
//!
//! Every limb with both joints present is one `<line>`, every box one
//! `<rect>`; quivers and history outlines use `<path>`/`<polyline>` so the
//! element counts stay meaningful.

use std::fmt::Write;

use crate::boxes::{BBox, Side};
use crate::geometry::Point2;
use crate::grids::VectorGrid;
use crate::scalar::Real;
use crate::skeleton::Skeleton;

const PALETTE: [&str; 8] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324"];

#[derive(Debug, Clone)]
pub struct Figure<'a, T> {
    pub width: usize,
    pub height: usize,
    pub skeleton: &'a Skeleton,
    /// Joint positions per person, `None` where absent.
    pub poses: Vec<Vec<Option<Point2<T>>>>,
    pub boxes: Vec<BBox<T>>,
    pub quiver: Option<Quiver<'a, T>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Quiver<'a, T> {
    pub fields: &'a [VectorGrid<T>],
    /// Sample every `stride` pixels along each axis.
    pub stride: usize,
}

fn num<T: Real>(v: T) -> String {
    format!("{:.2}", v.wide())
}

/// Box outlines before each recorded expansion step, oldest first.
fn history_outlines<T: Real>(b: &BBox<T>) -> Vec<[T; 4]> {
    let mut state = [b.x_min, b.y_min, b.x_max, b.y_max];
    let mut out = Vec::with_capacity(b.history.len());
    for e in b.history.iter().rev() {
        match e.direction {
            Side::Left => state[0] += e.step,
            Side::Top => state[1] += e.step,
            Side::Right => state[2] -= e.step,
            Side::Bottom => state[3] -= e.step,
        }
        out.push(state);
    }
    out.reverse();
    out
}

pub fn render_svg<T: Real>(fig: &Figure<'_, T>) -> String {
    let mut s = String::new();
    let (w, h) = (fig.width, fig.height);
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="-0.5 -0.5 {w} {h}" style="background:#111">"#
    )
    .unwrap();

    if let Some(q) = fig.quiver {
        let stride = q.stride.max(1);
        for (c, field) in q.fields.iter().enumerate() {
            let mut d = String::new();
            for y in (0..field.height()).step_by(stride) {
                for x in (0..field.width()).step_by(stride) {
                    let v = field.get(x, y);
                    if v.norm() < T::lit(0.05) {
                        continue;
                    }
                    let tip = Point2::new(T::lit(x as f64), T::lit(y as f64)) + v * T::lit(0.8 * stride as f64);
                    write!(d, "M{} {}L{} {}", x, y, num(tip.x), num(tip.y)).unwrap();
                }
            }
            if !d.is_empty() {
                let color = PALETTE[c % PALETTE.len()];
                writeln!(s, r#"<path class="paf" d="{d}" stroke="{color}" stroke-opacity="0.6" stroke-width="0.5" fill="none"/>"#).unwrap();
            }
        }
    }

    for (i, b) in fig.boxes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for [x0, y0, x1, y1] in history_outlines(b) {
            let (x0, y0, x1, y1) = (num(x0), num(y0), num(x1), num(y1));
            writeln!(
                s,
                r#"<polyline class="history" points="{x0},{y0} {x1},{y0} {x1},{y1} {x0},{y1} {x0},{y0}" stroke="{color}" stroke-dasharray="2 2" stroke-width="0.5" fill="none"/>"#
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" stroke="{color}" stroke-width="1" fill="none"/>"#,
            num(b.x_min),
            num(b.y_min),
            num(b.width()),
            num(b.height())
        )
        .unwrap();
    }

    for (i, pose) in fig.poses.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(s, r#"<g class="pose" stroke="{color}" fill="{color}">"#).unwrap();
        for &[a, b] in fig.skeleton.limbs() {
            if let (Some(Some(p)), Some(Some(q))) = (pose.get(a), pose.get(b)) {
                writeln!(
                    s,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke-width="1.5"/>"#,
                    num(p.x),
                    num(p.y),
                    num(q.x),
                    num(q.y)
                )
                .unwrap();
            }
        }
        for p in pose.iter().flatten() {
            writeln!(s, r#"<circle cx="{}" cy="{}" r="2"/>"#, num(p.x), num(p.y)).unwrap();
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::Expansion;

    #[test]
    fn counts_lines_and_rects() {
        let sk = Skeleton::preset("coco17").unwrap();
        let pose: Vec<_> = (0..17).map(|j| Some(Point2::new(j as f64, 2.0 * j as f64))).collect();
        let mut b = BBox::new(1.0, 1.0, 10.0, 10.0).unwrap();
        b.history.push(Expansion { joint: 3, direction: Side::Right, step: 0.5 });
        b.x_max += 0.5;
        let fig = Figure {
            width: 40,
            height: 40,
            skeleton: &sk,
            poses: vec![pose],
            boxes: vec![b, BBox::new(20.0, 20.0, 30.0, 30.0).unwrap()],
            quiver: None,
        };
        let svg = render_svg(&fig);
        assert_eq!(svg.matches("<line ").count(), 16);
        assert_eq!(svg.matches("<rect ").count(), 2);
        assert_eq!(svg.matches("<polyline ").count(), 1);
        assert!(svg.contains(r#"points="1.00,1.00 10.00,1.00"#));
        assert_eq!(svg, render_svg(&fig));
    }

    #[test]
    fn missing_joints_drop_limbs() {
        let sk = Skeleton::preset("mpii16").unwrap();
        let mut pose: Vec<_> = (0..16).map(|j| Some(Point2::new(j as f32, 0.0))).collect();
        pose[7] = None; // thorax: four limbs
        let fig = Figure { width: 20, height: 5, skeleton: &sk, poses: vec![pose], boxes: vec![], quiver: None };
        assert_eq!(render_svg(&fig).matches("<line ").count(), 11);
    }
}

use std::fmt::Write as _;

use planbd::stl::{Formula, PredicateRef, Trajectory};
use planbd::world::{GridMap, TriggerPattern};

/// Pixels per map cell in the rendered figure.
const CELL: f64 = 16.0;

/// A labeled, colored path in a figure.
pub struct PathLayer<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub traj: &'a Trajectory,
}

enum Region {
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

fn collect_pred(p: &PredicateRef, out: &mut Vec<Region>) {
    match *p {
        PredicateRef::Ball { cx, cy, r } => out.push(Region::Circle { cx, cy, r }),
        PredicateRef::BoxRegion { x0, y0, x1, y1 } => out.push(Region::Rect { x0, y0, x1, y1 }),
        _ => {}
    }
}

/// Geometric target regions mentioned anywhere in the formula (the map's
/// own obstacle field is drawn as cells, not as a region).
fn collect_regions(f: &Formula, out: &mut Vec<Region>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Pred(p) => collect_pred(p, out),
        Formula::Not(c) | Formula::Next(c) => collect_regions(c, out),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
            collect_regions(l, out);
            collect_regions(r, out);
        }
        Formula::Eventually { child, .. } | Formula::Globally { child, .. } => {
            collect_regions(child, out)
        }
        Formula::Until { lhs, rhs, .. } => {
            collect_regions(lhs, out);
            collect_regions(rhs, out);
        }
        Formula::Reach { pred, .. } | Formula::Avoid { pred, .. } | Formula::Stay { pred, .. } => {
            collect_pred(pred, out)
        }
    }
}

/// Render one scenario as a standalone SVG: occupancy cells, the trigger
/// footprint (if any), the formula's target regions, and the given paths
/// with start/goal markers and a legend.
pub fn render_svg(
    map: &GridMap,
    trigger: Option<&TriggerPattern>,
    formula: &Formula,
    paths: &[PathLayer],
    start: (f64, f64),
    goal: (f64, f64),
) -> String {
    let (w, h) = (map.width as f64 * CELL, map.height as f64 * CELL);
    let px = |p: (f64, f64)| (p.0 / map.resolution * CELL, p.1 / map.resolution * CELL);
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>");

    // Occupancy cells; trigger cells get their own color on top.
    for row in 0..map.height {
        for col in 0..map.width {
            let i = map.idx(col, row);
            let in_trigger = trigger.is_some_and(|t| t.mask[i] == 0);
            let fill = if in_trigger {
                "#c0392b"
            } else if !map.is_free_cell(col, row) {
                "#3b3b3b"
            } else {
                continue;
            };
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"/>",
                col as f64 * CELL,
                row as f64 * CELL
            );
        }
    }

    let mut regions = Vec::new();
    collect_regions(formula, &mut regions);
    for reg in &regions {
        match *reg {
            Region::Circle { cx, cy, r } => {
                let (x, y) = px((cx, cy));
                let _ = writeln!(
                    s,
                    "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{:.1}\" fill=\"none\" \
                     stroke=\"#2ca02c\" stroke-width=\"2.5\" stroke-dasharray=\"6,4\"/>",
                    r / map.resolution * CELL
                );
            }
            Region::Rect { x0, y0, x1, y1 } => {
                let (ax, ay) = px((x0, y0));
                let (bx, by) = px((x1, y1));
                let _ = writeln!(
                    s,
                    "<rect x=\"{ax:.1}\" y=\"{ay:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
                     fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2.5\" \
                     stroke-dasharray=\"6,4\"/>",
                    bx - ax,
                    by - ay
                );
            }
        }
    }

    for layer in paths {
        let pts: Vec<String> = layer
            .traj
            .states
            .iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"3\" \
             stroke-opacity=\"0.9\" stroke-linejoin=\"round\"/>",
            pts.join(" "),
            layer.color
        );
    }

    let (sx, sy) = px(start);
    let (gx, gy) = px(goal);
    let _ = writeln!(
        s,
        "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"6\" fill=\"#1a1a1a\" stroke=\"#ffffff\" \
         stroke-width=\"2\"/>"
    );
    let _ = writeln!(
        s,
        "<path d=\"M {:.1} {gy:.1} L {:.1} {gy:.1} M {gx:.1} {:.1} L {gx:.1} {:.1}\" \
         stroke=\"#1a1a1a\" stroke-width=\"3\"/>",
        gx - 7.0,
        gx + 7.0,
        gy - 7.0,
        gy + 7.0
    );

    for (i, layer) in paths.iter().enumerate() {
        let y = 22.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"10\" y=\"{:.1}\" width=\"18\" height=\"5\" fill=\"{}\"/>\
             <text x=\"34\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\" \
             fill=\"#1a1a1a\">{}</text>",
            y - 4.0,
            layer.color,
            y + 2.0,
            layer.label
        );
    }

    s.push_str("</svg>\n");
    s
}

//! Deterministic SVG scatter plots: points colored by assigned cluster,
//! open facilities marked, and a circle per positive-radius ball.

/// Solution layer for the plot; indices refer to the instance's facilities.
pub struct PlotSolution<'a> {
    /// Open facility ids, ascending.
    pub facilities: &'a [usize],
    /// Radii aligned with `facilities`.
    pub radii: &'a [f64],
    /// Per-point assigned facility id.
    pub assignment: &'a [usize],
}

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 24.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Renders the instance (and optionally a solution) to a standalone SVG
/// document. Output is deterministic: fixed ordering, fixed float precision.
pub fn render_svg(
    points: &[[f64; 2]],
    facilities: &[[f64; 2]],
    sol: Option<&PlotSolution>,
) -> String {
    // world bounds over everything drawn, including ball extents
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |x: f64, y: f64, r: f64| {
        lo[0] = lo[0].min(x - r);
        hi[0] = hi[0].max(x + r);
        lo[1] = lo[1].min(y - r);
        hi[1] = hi[1].max(y + r);
    };
    for p in points {
        grow(p[0], p[1], 0.0);
    }
    for f in facilities {
        grow(f[0], f[1], 0.0);
    }
    if let Some(s) = sol {
        for (&x, &r) in s.facilities.iter().zip(s.radii) {
            let c = facilities[x];
            grow(c[0], c[1], r);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let height = (hi[1] - lo[1]) * scale + 2.0 * MARGIN;
    // SVG y grows downward; world y grows upward
    let px = |x: f64| MARGIN + (x - lo[0]) * scale;
    let py = |y: f64| height - (MARGIN + (y - lo[1]) * scale);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let color_of = |fac: usize, s: &PlotSolution| {
        let idx = s.facilities.iter().position(|&f| f == fac).unwrap_or(0);
        PALETTE[idx % PALETTE.len()]
    };

    // balls underneath everything else
    if let Some(s) = sol {
        for (&x, &r) in s.facilities.iter().zip(s.radii) {
            if r > 0.0 {
                let c = facilities[x];
                out.push_str(&format!(
                    "<circle class=\"ball\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n",
                    px(c[0]),
                    py(c[1]),
                    r * scale,
                    color_of(x, s)
                ));
            }
        }
    }
    // candidate facilities as faint crosses, open ones as filled squares
    for (i, f) in facilities.iter().enumerate() {
        let open = sol.map_or(false, |s| s.facilities.contains(&i));
        if open {
            let s = sol.expect("checked above");
            out.push_str(&format!(
                "<rect class=\"fac\" x=\"{:.2}\" y=\"{:.2}\" width=\"9\" height=\"9\" fill=\"{}\" stroke=\"black\"/>\n",
                px(f[0]) - 4.5,
                py(f[1]) - 4.5,
                color_of(i, s)
            ));
        } else {
            out.push_str(&format!(
                "<rect class=\"cand\" x=\"{:.2}\" y=\"{:.2}\" width=\"4\" height=\"4\" fill=\"#bbbbbb\"/>\n",
                px(f[0]) - 2.0,
                py(f[1]) - 2.0
            ));
        }
    }
    for (i, p) in points.iter().enumerate() {
        let fill = sol
            .map(|s| color_of(s.assignment[i], s))
            .unwrap_or("#555555");
        out.push_str(&format!(
            "<circle class=\"pt\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            px(p[0]),
            py(p[1]),
            fill
        ));
    }
    out.push_str("</svg>\n");
    out
}

//! Hand-written SVG of a steering run in the `(s_x, s_y)` plane: the predicted mean
//! path, 3σ ellipses of every predicted state, the initial (blue) and target (red)
//! distributions, and terminal Monte Carlo particles.

use std::fmt::Write as _;

use gpcs::{SteeringTarget, SteeringTrace};
use nalgebra::{DMatrix, DVector};

const SIZE: f64 = 640.0;
const MARGIN: f64 = 48.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    /// Rotation of the `rx` axis from the x axis, in degrees.
    pub angle: f64,
}

/// `k`-σ ellipse of the leading 2×2 block, semi-axes along its eigenvectors.
pub fn sigma_ellipse(mean: &DVector<f64>, cov: &DMatrix<f64>, k: f64) -> Ellipse {
    let (a, b, c) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (big, small) = ((mid + rad).max(0.0), (mid - rad).max(0.0));
    Ellipse {
        cx: mean[0],
        cy: mean[1],
        rx: k * big.sqrt(),
        ry: k * small.sqrt(),
        angle: 0.5 * (2.0 * b).atan2(a - c).to_degrees(),
    }
}

fn f(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".to_owned()
    } else {
        r.to_string()
    }
}

struct Bounds {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Bounds {
    fn new() -> Self {
        Self {
            lo: [f64::INFINITY; 2],
            hi: [f64::NEG_INFINITY; 2],
        }
    }

    fn add(&mut self, x: f64, y: f64, pad: f64) {
        self.lo = [self.lo[0].min(x - pad), self.lo[1].min(y - pad)];
        self.hi = [self.hi[0].max(x + pad), self.hi[1].max(y + pad)];
    }
}

fn ellipse_svg(out: &mut String, e: &Ellipse, style: &str) {
    let _ = writeln!(
        out,
        r#"<ellipse cx="{}" cy="{}" rx="{}" ry="{}" transform="rotate({} {} {})" {style} vector-effect="non-scaling-stroke"/>"#,
        f(e.cx),
        f(e.cy),
        f(e.rx),
        f(e.ry),
        f(e.angle),
        f(e.cx),
        f(e.cy)
    );
}

pub fn render(
    trace: &SteeringTrace,
    target: Option<&SteeringTarget>,
    particles: Option<&DMatrix<f64>>,
) -> String {
    let ellipses: Vec<Ellipse> = trace
        .states
        .iter()
        .map(|s| sigma_ellipse(&s.mean, &s.cov, 3.0))
        .collect();
    let goal = target.map(|t| sigma_ellipse(&t.mean, &t.cov, 3.0));
    let mut b = Bounds::new();
    for e in ellipses.iter().chain(goal.iter()) {
        b.add(e.cx, e.cy, e.rx);
    }
    if let Some(p) = particles {
        for row in p.row_iter() {
            b.add(row[0], row[1], 0.0);
        }
    }
    let span = (b.hi[0] - b.lo[0]).max(b.hi[1] - b.lo[1]).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let ox = MARGIN - b.lo[0] * scale + 0.5 * (span - (b.hi[0] - b.lo[0])) * scale;
    let oy = SIZE - MARGIN + b.lo[1] * scale - 0.5 * (span - (b.hi[1] - b.lo[1])) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="#888" stroke-width="1"/>"##,
        w = SIZE - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">s_x</text>"#,
        SIZE / 2.0,
        SIZE - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 14 {})">s_y</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(
        out,
        r#"<g id="data" transform="translate({} {}) scale({} {})">"#,
        f(ox),
        f(oy),
        f(scale),
        f(-scale)
    );
    for e in ellipses.iter().skip(1) {
        ellipse_svg(
            &mut out,
            e,
            r##"fill="none" stroke="#999" stroke-width="0.75""##,
        );
    }
    if let Some(p) = particles {
        let r = 2.0 / scale;
        for row in p.row_iter() {
            let _ = writeln!(
                out,
                r#"<circle class="particle" cx="{}" cy="{}" r="{}" fill="red" fill-opacity="0.5"/>"#,
                f(row[0]),
                f(row[1]),
                f(r)
            );
        }
    }
    let path: Vec<String> = ellipses
        .iter()
        .map(|e| format!("{},{}", f(e.cx), f(e.cy)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
        path.join(" ")
    );
    if let Some(g) = goal {
        ellipse_svg(
            &mut out,
            &g,
            r#"id="target" fill="none" stroke="red" stroke-width="2""#,
        );
    }
    ellipse_svg(
        &mut out,
        &ellipses[0],
        r#"id="initial" fill="none" stroke="blue" stroke-width="2""#,
    );
    out.push_str("</g>\n</svg>\n");
    out
}

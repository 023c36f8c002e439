//! Static SVG scatter plots. Points beyond two dimensions are drawn with a
//! fixed oblique projection of the first three coordinates.

use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const PAD: f64 = 30.0;

pub fn project2(p: &[f64]) -> (f64, f64) {
    match p.len() {
        1 => (p[0], 0.0),
        2 => (p[0], p[1]),
        _ => (p[0] + 0.4 * p[2], p[1] + 0.25 * p[2]),
    }
}

/// Fill colour of chart `c`: hues spaced by the golden angle, so every chart
/// gets its own colour.
pub fn chart_color(c: usize) -> String {
    let hue = (c as f64 * 137.507_764_050_037_85) % 360.0;
    format!("hsl({hue:.2},70%,45%)")
}

pub struct Scatter<'a> {
    pub title: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Chart of each point; `None` is drawn grey.
    pub labels: Option<Vec<Option<usize>>>,
    pub overlay: Option<Vec<(f64, f64)>>,
}

impl Scatter<'_> {
    pub fn render(&self) -> String {
        let all = self.points.iter().chain(self.overlay.iter().flatten());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-12);
        let sx = |x: f64| PAD + (x - x0) / span * (SIZE - 2.0 * PAD);
        // SVG y grows downwards.
        let sy = |y: f64| SIZE - PAD - (y - y0) / span * (SIZE - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
            self.title
        );
        for (i, &(x, y)) in self.points.iter().enumerate() {
            let fill = match self.labels.as_ref().map(|l| l[i]) {
                Some(Some(c)) => chart_color(c),
                Some(None) => "#999999".to_string(),
                None => "#1f5fa8".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="2" fill="{fill}"/>"#,
                sx(x),
                sy(y)
            );
        }
        if let Some(path) = &self.overlay {
            let pts: Vec<String> = path.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="path" points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

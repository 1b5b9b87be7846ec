//! Minimal SVG plot of a confidence region.

use std::fmt::Write;

use xcm_bootstrap::model::Region;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

pub struct Plot<'a> {
    pub region: &'a Region,
    pub cloud: &'a [[f64; 2]],
    pub polygons: &'a [Vec<[f64; 2]>],
    pub estimate: Option<[f64; 2]>,
    pub truth: Option<[f64; 2]>,
    pub title: String,
}

impl Plot<'_> {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let r = self.region;
        let u = (p[0] - r.lo[0]) / r.width(0);
        let v = (p[1] - r.lo[1]) / r.width(1);
        (MARGIN + u * SIZE, MARGIN + (1.0 - v) * SIZE)
    }

    pub fn render(&self) -> String {
        let total = SIZE + 2.0 * MARGIN;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
            MARGIN - 14.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black" stroke-width="1.5"/>"#
        );

        let _ = writeln!(s, r##"<g fill="#4a6fa5" fill-opacity="0.5">"##);
        for &p in self.cloud {
            let (x, y) = self.map(p);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2"/>"#);
        }
        let _ = writeln!(s, "</g>");

        if !self.polygons.is_empty() {
            let mut d = String::new();
            for poly in self.polygons {
                for (i, &p) in poly.iter().enumerate() {
                    let (x, y) = self.map(p);
                    let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
                }
                d.push_str("Z ");
            }
            let _ = writeln!(
                s,
                r##"<path d="{}" fill="#e07b39" fill-opacity="0.15" fill-rule="evenodd" stroke="#c0392b" stroke-width="1.5"/>"##,
                d.trim_end()
            );
        }

        if let Some(p) = self.estimate {
            let (x, y) = self.map(p);
            let _ = writeln!(
                s,
                r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black" stroke-width="2"/>"#,
                x - 6.0,
                y - 6.0,
                x + 6.0,
                y + 6.0,
                x - 6.0,
                y + 6.0,
                x + 6.0,
                y - 6.0
            );
        }
        if let Some(p) = self.truth {
            let (x, y) = self.map(p);
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="#2e7d32" stroke-width="2"/>"##
            );
        }

        let r = self.region;
        for (text, x, y, anchor) in [
            (
                format!("{}", r.lo[0]),
                MARGIN,
                MARGIN + SIZE + 16.0,
                "start",
            ),
            (
                format!("{}", r.hi[0]),
                MARGIN + SIZE,
                MARGIN + SIZE + 16.0,
                "end",
            ),
            (format!("{}", r.lo[1]), MARGIN - 4.0, MARGIN + SIZE, "end"),
            (format!("{}", r.hi[1]), MARGIN - 4.0, MARGIN + 10.0, "end"),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
